"""Drive the command line end to end: synth, forward, invert, sample, metrics, rerun."""

import json
from pathlib import Path

from gravmaginv.cli import main

OUT = Path(__file__).parent / "out" / "pipeline"
OUT.mkdir(parents=True, exist_ok=True)


def run(*argv):
    argv = [str(a) for a in argv]
    print("$ gravmaginv " + " ".join(argv))
    code = main(argv)
    assert code == 0, f"exit {code}"


def write(name, obj):
    path = OUT / name
    path.write_text(json.dumps(obj, indent=2))
    return path

scenario = write("scenario.json", {
    "grid": {"nx": 6, "ny": 6, "nz": 4, "h": 1.0, "origin": [0, 0, -4]},
    "bodies": [{"shape": "box", "x": [2, 4], "y": [2, 4], "z": [-2, 0],
                "density": 300.0, "susceptibility": 0.05}],
    "survey": {"nx": 8, "ny": 8, "height": 1.0},
    "noise": {"snr": 20},
})
invert = write("invert.json", {
    "grid": {"nx": 6, "ny": 6, "nz": 4, "h": 1.0, "origin": [0, 0, -4]},
    "bounds": {"chi_min": 0.0, "chi_max": 0.05},
    "gl": {"kappa": 0.5, "eps": 0.7, "h": 1.0},
    "map": {"lambda_gl": 0.3, "max_iters": 300},
})
sample = write("sample.json", {
    "grid": {"nx": 6, "ny": 6, "nz": 4, "h": 1.0, "origin": [0, 0, -4]},
    "bounds": {"chi_min": 0.0, "chi_max": 0.05},
    "gl": {"kappa": 0.5, "eps": 0.5, "h": 1.0, "lambda0": 0.1},
    "prior": {"mu_rho": 0.0, "mu_chi": 0.025, "sigma0": 1.0},
    "sampler": {"n_steps": 16, "k_ref": 3, "alpha_ref": 1e-6},
})

syn = OUT / "syn"
run("synth", "--config", scenario, "--out", syn, "--seed", 3)

# re-predict the fields from the stored truth and score the fit
fwd = OUT / "fwd"
noise_only = write("forward.json", {"noise": {"sigma_grav": 1e-12, "sigma_mag": 1e-12}})
run("forward", "--config", noise_only, "--rho", syn / "rho.pvol",
    "--chi", syn / "chi.pvol", "--survey", syn / "survey.surv", "--out", fwd)
run("metrics", "--pred", fwd / "field.fdat", "--obs", syn / "field.fdat",
    "--out", OUT / "fit")
print(json.loads((OUT / "fit" / "metrics.json").read_text()))

inv = OUT / "inv"
run("invert-map", "--config", invert, "--obs", syn / "field.fdat",
    "--survey", syn / "survey.surv", "--out", inv)
print(json.loads((inv / "summary.json").read_text()))

smp = OUT / "smp"
run("sample", "--config", sample, "--obs", syn / "field.fdat",
    "--survey", syn / "survey.surv", "--out", smp, "--seed", 7, "--chains", 4)

# any run re-executes bit-identically from its manifest
run("rerun", "--manifest", smp / "manifest.json", "--out", OUT / "smp_redo")
same = all((smp / n).read_bytes() == (OUT / "smp_redo" / n).read_bytes()
           for n in json.loads((smp / "manifest.json").read_text())["outputs"])
print(f"rerun byte-identical: {same}")
