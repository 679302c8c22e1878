"""Simulate gravity and TMI over a two-body model and store the files."""

from pathlib import Path

import numpy as np

from gravmaginv.forward import NoiseModel, simulate
from gravmaginv.grid import VoxelGrid, stack_model
from gravmaginv.io import write_field_data, write_survey, write_volume
from gravmaginv.scenario import (
    BoxBody,
    ScenarioSpec,
    SphereBody,
    generate_scenario,
    grid_survey,
    noise_for_snr,
)

OUT = Path(__file__).parent / "out" / "fields"

grid = VoxelGrid(12, 12, 8, 50.0, (0.0, 0.0, -400.0))
bodies = (
    BoxBody(x=(100.0, 300.0), y=(150.0, 450.0), z=(-250.0, -100.0),
            density=400.0, susceptibility=0.06),
    SphereBody(center=(450.0, 300.0, -180.0), radius=90.0,
               density=-200.0, susceptibility=0.01),
)
survey = grid_survey(grid, 16, 16, 40.0)
spec = ScenarioSpec(grid=grid, bodies=bodies, survey=survey,
                    noise=NoiseModel(1.0, 1.0))

# placeholder noise first, then rescale it to a 10:1 signal-to-noise ratio
sc = generate_scenario(spec, seed=0)
noise = noise_for_snr(sc.operator, sc.model, snr=10.0)
data = simulate(sc.operator, stack_model(sc.model), noise, seed=42)

print(f"grid {grid.nx}x{grid.ny}x{grid.nz}, {survey.n_points} stations")
print(f"sigma_grav {noise.sigma_grav:.4f} mGal, sigma_mag {noise.sigma_mag:.2f} nT")
for name, vals in [("gravity [mGal]", data.grav), ("TMI [nT]", data.mag)]:
    print(f"{name:>14}: min {vals.min():8.3f}  max {vals.max():8.3f}  "
          f"rms {np.sqrt(np.mean(vals**2)):8.3f}")

OUT.mkdir(parents=True, exist_ok=True)
write_volume(OUT / "rho.pvol", sc.model.rho)
write_volume(OUT / "chi.pvol", sc.model.chi)
write_survey(OUT / "survey.surv", survey)
write_field_data(OUT / "field.fdat", data, spec.mag_config, spec.grav_config)
print(f"wrote rho.pvol, chi.pvol, survey.surv, field.fdat to {OUT}")
