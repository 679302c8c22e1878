"""Synthetic subsurface scenarios: simple bodies, surveys, simulated data.

A scenario paints density contrast and susceptibility onto the grid from
a short list of geometric bodies (cells are assigned by their centers,
later bodies overwrite earlier ones), builds the joint operator for a
survey, and simulates noisy observations.  Everything downstream of the
(spec, seed) pair is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .forward import (
    FieldData,
    GravityKernelConfig,
    JointOperator,
    MagneticKernelConfig,
    NoiseModel,
    assemble_gravity_operator,
    assemble_magnetic_operator,
    joint_operator,
    simulate,
)
from .grid import JointModel, PropertyVolume, SurveyGeometry, VoxelGrid


def _check_range(name, r):
    lo, hi = float(r[0]), float(r[1])
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError(f"{name} range must be finite with lo < hi, got {r}")
    return lo, hi


@dataclass(frozen=True)
class BoxBody:
    """Axis-aligned box; assigns density and susceptibility to covered cells."""

    x: tuple
    y: tuple
    z: tuple
    density: float
    susceptibility: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, _check_range(name, getattr(self, name)))
        for name in ("density", "susceptibility"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def check_inside(self, grid: VoxelGrid):
        lims = ((grid.origin[0], grid.origin[0] + grid.nx * grid.h),
                (grid.origin[1], grid.origin[1] + grid.ny * grid.h),
                (grid.origin[2], grid.origin[2] + grid.nz * grid.h))
        for (lo, hi), (gmin, gmax), name in zip((self.x, self.y, self.z), lims, "xyz"):
            if lo < gmin or hi > gmax:
                raise ValueError(
                    f"box {name} range ({lo}, {hi}) extends outside the grid "
                    f"extent ({gmin}, {gmax})"
                )

    def contains(self, centers: np.ndarray) -> np.ndarray:
        (x1, x2), (y1, y2), (z1, z2) = self.x, self.y, self.z
        cx, cy, cz = centers[:, 0], centers[:, 1], centers[:, 2]
        return ((cx >= x1) & (cx <= x2) & (cy >= y1) & (cy <= y2)
                & (cz >= z1) & (cz <= z2))


@dataclass(frozen=True)
class SphereBody:
    """Ball of given center and radius with uniform properties."""

    center: tuple
    radius: float
    density: float
    susceptibility: float

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 3 or not all(np.isfinite(v) for v in c):
            raise ValueError(f"center must be a finite 3-vector, got {self.center}")
        object.__setattr__(self, "center", c)
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"radius must be positive, got {self.radius}")
        for name in ("density", "susceptibility"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def check_inside(self, grid: VoxelGrid):
        lims = ((grid.origin[0], grid.origin[0] + grid.nx * grid.h),
                (grid.origin[1], grid.origin[1] + grid.ny * grid.h),
                (grid.origin[2], grid.origin[2] + grid.nz * grid.h))
        for c, (gmin, gmax), name in zip(self.center, lims, "xyz"):
            if c - self.radius < gmin or c + self.radius > gmax:
                raise ValueError(
                    f"sphere extends outside the grid along {name}: "
                    f"center {c} radius {self.radius} vs extent ({gmin}, {gmax})"
                )

    def contains(self, centers: np.ndarray) -> np.ndarray:
        d = centers - np.asarray(self.center)
        return (d * d).sum(axis=1) <= self.radius ** 2


def paint_bodies(grid: VoxelGrid, bodies, background_density=0.0,
                 background_chi=0.0) -> JointModel:
    """Assign body properties cell by cell; later bodies overwrite earlier."""
    for b in bodies:
        b.check_inside(grid)
    centers = grid.cell_centers()
    rho = np.full(grid.n_cells, float(background_density))
    chi = np.full(grid.n_cells, float(background_chi))
    for b in bodies:
        mask = b.contains(centers)
        rho[mask] = b.density
        chi[mask] = b.susceptibility
    return JointModel(PropertyVolume(grid, "density", rho),
                      PropertyVolume(grid, "susceptibility", chi))


def grid_survey(grid: VoxelGrid, nx: int, ny: int, height: float,
                margin: float = 0.0) -> SurveyGeometry:
    """Regular nx-by-ny survey at a fixed height above the grid top face.

    Stations span the grid's x/y footprint inset by ``margin`` on every
    side.  ``height`` must be positive so stations sit strictly above
    the top face.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"survey needs nx, ny >= 1, got ({nx}, {ny})")
    if not (np.isfinite(height) and height > 0):
        raise ValueError(f"height must be positive, got {height}")
    x0, x1 = grid.origin[0] + margin, grid.origin[0] + grid.nx * grid.h - margin
    y0, y1 = grid.origin[1] + margin, grid.origin[1] + grid.ny * grid.h - margin
    if x0 > x1 or y0 > y1:
        raise ValueError(f"margin {margin} leaves no survey footprint")
    xs = np.linspace(x0, x1, nx) if nx > 1 else np.array([(x0 + x1) / 2])
    ys = np.linspace(y0, y1, ny) if ny > 1 else np.array([(y0 + y1) / 2])
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    z = np.full(gx.size, grid.top_z + height)
    return SurveyGeometry(np.column_stack([gx.ravel(), gy.ravel(), z]))


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to build a scenario, minus the random seed."""

    grid: VoxelGrid
    bodies: tuple
    survey: SurveyGeometry
    noise: NoiseModel
    grav_config: GravityKernelConfig = field(default_factory=GravityKernelConfig)
    mag_config: MagneticKernelConfig = field(default_factory=MagneticKernelConfig)
    background_density: float = 0.0
    background_chi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "bodies", tuple(self.bodies))
        for b in self.bodies:
            if not isinstance(b, (BoxBody, SphereBody)):
                raise ValueError(f"unsupported body type {type(b).__name__}")


@dataclass(frozen=True)
class Scenario:
    """A realized scenario: true model, operator inputs, simulated data."""

    spec: ScenarioSpec
    model: JointModel
    operator: JointOperator
    data: FieldData
    seed: int

    @property
    def grid(self) -> VoxelGrid:
        return self.spec.grid

    @property
    def survey(self) -> SurveyGeometry:
        return self.spec.survey


def generate_scenario(spec: ScenarioSpec, seed: int, mode: str = "auto") -> Scenario:
    """Paint the true model, assemble the joint operator, simulate data.

    The seed drives only the observation noise; geometry and the true
    model are functions of the spec alone.
    """
    model = paint_bodies(spec.grid, spec.bodies, spec.background_density,
                         spec.background_chi)
    op = joint_operator(
        assemble_gravity_operator(spec.grid, spec.survey, spec.grav_config, mode),
        assemble_magnetic_operator(spec.grid, spec.survey, spec.mag_config, mode),
    )
    data = simulate(op, model, spec.noise, seed)
    return Scenario(spec, model, op, data, int(seed))


def noise_for_snr(op: JointOperator, model: JointModel, snr: float) -> NoiseModel:
    """Noise levels giving each channel the requested signal-to-noise ratio.

    SNR is the plain amplitude ratio rms(noiseless signal) / sigma, so
    snr = 20 means 5 percent noise.  A channel with zero signal cannot
    be assigned a finite-SNR noise level and raises.
    """
    if not (np.isfinite(snr) and snr > 0):
        raise ValueError(f"snr must be positive, got {snr}")
    clean = op.apply(np.concatenate([model.rho.values, model.chi.values]))
    n = op.grav.shape[0]
    rms_g = math.sqrt(float((clean[:n] ** 2).mean()))
    rms_m = math.sqrt(float((clean[n:] ** 2).mean()))
    if rms_g == 0.0 or rms_m == 0.0:
        raise ValueError("cannot set noise by SNR: a channel has zero signal")
    return NoiseModel(sigma_grav=rms_g / snr, sigma_mag=rms_m / snr)
