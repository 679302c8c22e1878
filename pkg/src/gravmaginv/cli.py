"""Command line front end.

Subcommands cover the full desk workflow:

  synth       build a synthetic scenario and simulate observations
  forward     apply the forward operators to stored model volumes
  invert-map  deterministic phase-regularized inversion of stored data
  sample      guided posterior sampling, one output set per chain
  metrics     field RMSE of a prediction, or ranked method comparisons
  gl-diag     interface-energy convergence table for the phase physics
  rerun       execute a run again from its manifest

Every run reads a JSON configuration (plus a few flags), writes its
outputs into ``--out``, and drops a ``manifest.json`` recording the
resolved configuration, input hashes, output hashes, seed, and package
versions.  Unknown configuration keys are hard errors.  Exit codes:
0 success, 2 configuration error, 3 data error, 4 numerical failure.

Set GEOINV_THREADS to cap worker threads for multi-chain sampling;
unset means serial execution.  Results are identical either way.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, NumericsError
from .flow import GaussianPriorVelocity
from .forward import (
    FieldData,
    GravityKernelConfig,
    MagneticKernelConfig,
    NoiseModel,
    assemble_gravity_operator,
    assemble_magnetic_operator,
    joint_operator,
    simulate,
)
from .glphysics import GLParams, INTERFACE_ENERGY_CONSTANT, interface_energy_diagnostic
from .grid import ChiBounds, VoxelGrid, check_survey
from .io import (
    build_manifest,
    read_field_arrays,
    read_field_data,
    read_json,
    read_manifest,
    read_survey,
    read_volume,
    sha256_file,
    write_bytes_atomic,
    write_field_data,
    write_json_atomic,
    write_survey,
    write_volume,
)
from .mapinv import MapConfig, invert_map
from .metrics import delta_rmse_and_ranks, rmse
from .sampler import IdentityDecoder, SamplerConfig, sample_chains
from .scenario import BoxBody, SphereBody, grid_survey, noise_for_snr, paint_bodies


# ---------------------------------------------------------------- config


def _check_keys(section, allowed, where, required=()):
    """Reject unknown keys outright; report missing required ones."""
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a JSON object, got {type(section).__name__}")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}; "
                          f"allowed: {sorted(allowed)}")
    missing = sorted(set(required) - set(section))
    if missing:
        raise ConfigError(f"missing required key(s) {missing} in {where}")


def _build(where, ctor, *args, **kwargs):
    """Construct a library object, reporting value errors as config errors."""
    try:
        return ctor(*args, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _load_config(path) -> dict:
    try:
        return read_json(path)
    except DataError as exc:
        raise ConfigError(str(exc)) from exc


def _grid_from(section) -> VoxelGrid:
    _check_keys(section, {"nx", "ny", "nz", "h", "origin"}, "grid",
                required=("nx", "ny", "nz", "h", "origin"))
    return _build("grid", VoxelGrid, section["nx"], section["ny"], section["nz"],
                  section["h"], tuple(section["origin"]))


def _bounds_from(section) -> ChiBounds:
    _check_keys(section, {"chi_min", "chi_max"}, "bounds",
                required=("chi_min", "chi_max"))
    return _build("bounds", ChiBounds, section["chi_min"], section["chi_max"])


def _gl_from(section) -> GLParams:
    _check_keys(section, {"kappa", "eps", "h", "lambda0", "gamma", "lambda_gl"},
                "gl", required=("kappa", "eps", "h"))
    return _build("gl", GLParams, **section)


def _mag_from(section) -> MagneticKernelConfig:
    _check_keys(section, {"b0", "inclination_deg", "declination_deg"}, "magnetic")
    return _build("magnetic", MagneticKernelConfig, **section)


def _grav_from(section) -> GravityKernelConfig:
    _check_keys(section, {"G", "unit"}, "gravity")
    return _build("gravity", GravityKernelConfig, **section)


def _noise_from(section) -> NoiseModel:
    _check_keys(section, {"sigma_grav", "sigma_mag"}, "noise",
                required=("sigma_grav", "sigma_mag"))
    return _build("noise", NoiseModel, section["sigma_grav"], section["sigma_mag"])


def _bodies_from(raw):
    if not isinstance(raw, list) or not raw:
        raise ConfigError("bodies must be a nonempty JSON array")
    bodies = []
    for i, entry in enumerate(raw):
        where = f"bodies[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where} must be a JSON object")
        shape = entry.get("shape")
        if shape == "box":
            _check_keys(entry, {"shape", "x", "y", "z", "density", "susceptibility"},
                        where, required=("x", "y", "z", "density", "susceptibility"))
            bodies.append(_build(where, BoxBody, tuple(entry["x"]), tuple(entry["y"]),
                                 tuple(entry["z"]), entry["density"],
                                 entry["susceptibility"]))
        elif shape == "sphere":
            _check_keys(entry, {"shape", "center", "radius", "density",
                                "susceptibility"},
                        where, required=("center", "radius", "density",
                                         "susceptibility"))
            bodies.append(_build(where, SphereBody, tuple(entry["center"]),
                                 entry["radius"], entry["density"],
                                 entry["susceptibility"]))
        else:
            raise ConfigError(f"{where}: shape must be 'box' or 'sphere', "
                              f"got {shape!r}")
    return bodies


def _schedule_from(raw, where):
    """JSON schedule spec: a name string, or [name, value...]."""
    if isinstance(raw, str):
        return (raw,)
    if isinstance(raw, list) and raw and isinstance(raw[0], str):
        try:
            return (raw[0], *(float(v) for v in raw[1:]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where} must be a schedule name or [name, value] list, "
                      f"got {raw!r}")


def _thread_cap():
    raw = os.environ.get("GEOINV_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"GEOINV_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"GEOINV_THREADS must be >= 1, got {n}")
    return n


# ------------------------------------------------------------- assembly


def _assemble(grid, survey, grav_config, mag_config):
    try:
        check_survey(grid, survey)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return joint_operator(
        assemble_gravity_operator(grid, survey, grav_config),
        assemble_magnetic_operator(grid, survey, mag_config),
    )


def _read_observations(flags, grid):
    """Survey + field data + the kernel configs recorded with the data."""
    survey = read_survey(flags["survey"])
    y, mag_config, grav_config = read_field_data(flags["obs"], survey)
    op = _assemble(grid, survey, grav_config, mag_config)
    return survey, y, op


def _scalar_sigma(value, name):
    if np.ndim(value) != 0:
        raise ConfigError(
            f"observation file stores per-observation {name}; the sampler "
            f"needs a scalar, set one in the sampler config section"
        )
    return float(value)


# ------------------------------------------------------------- handlers


def _run_synth(config, flags, out_dir):
    _check_keys(config, {"grid", "bodies", "survey", "noise", "magnetic",
                         "gravity", "background"},
                "config", required=("grid", "bodies", "survey"))
    grid = _grid_from(config["grid"])
    bodies = _bodies_from(config["bodies"])
    sv = config["survey"]
    _check_keys(sv, {"nx", "ny", "height", "margin"}, "survey",
                required=("nx", "ny", "height"))
    survey = _build("survey", grid_survey, grid, sv["nx"], sv["ny"], sv["height"],
                    sv.get("margin", 0.0))
    bg = config.get("background", {})
    _check_keys(bg, {"density", "susceptibility"}, "background")
    mag_config = _mag_from(config.get("magnetic", {}))
    grav_config = _grav_from(config.get("gravity", {}))

    model = _build("bodies", paint_bodies, grid, bodies,
                   bg.get("density", 0.0), bg.get("susceptibility", 0.0))
    op = _assemble(grid, survey, grav_config, mag_config)

    noise_cfg = config.get("noise", {"sigma_grav": 0.1, "sigma_mag": 15.0})
    if "snr" in noise_cfg:
        _check_keys(noise_cfg, {"snr"}, "noise")
        noise = _build("noise", noise_for_snr, op, model, noise_cfg["snr"])
    else:
        noise = _noise_from(noise_cfg)

    seed = flags["seed"]
    data = simulate(op, model, noise, seed)
    clean_vec = op.apply(np.concatenate([model.rho.values, model.chi.values]))
    m = survey.n_points
    clean = FieldData(survey, clean_vec[:m], clean_vec[m:], noise)

    outputs = {
        "rho.pvol": lambda p: write_volume(p, model.rho),
        "chi.pvol": lambda p: write_volume(p, model.chi),
        "survey.surv": lambda p: write_survey(p, survey),
        "field.fdat": lambda p: write_field_data(p, data, mag_config, grav_config),
        "field_clean.fdat": lambda p: write_field_data(p, clean, mag_config,
                                                       grav_config),
    }
    written = []
    for name, write in outputs.items():
        path = out_dir / name
        write(path)
        written.append(path)
    print(f"synth: {grid.n_cells} cells, {m} stations, seed {seed}")
    return written


def _run_forward(config, flags, out_dir):
    _check_keys(config, {"noise", "magnetic", "gravity"}, "config")
    rho = read_volume(flags["rho"])
    chi = read_volume(flags["chi"])
    if rho.grid != chi.grid:
        raise DataError("model volumes sit on different grids")
    if rho.kind != "density" or chi.kind != "susceptibility":
        raise DataError(f"expected density and susceptibility volumes, "
                        f"got {rho.kind!r} and {chi.kind!r}")
    survey = read_survey(flags["survey"])
    mag_config = _mag_from(config.get("magnetic", {}))
    grav_config = _grav_from(config.get("gravity", {}))
    noise = _noise_from(config.get("noise", {"sigma_grav": 0.1, "sigma_mag": 15.0}))

    op = _assemble(rho.grid, survey, grav_config, mag_config)
    vec = np.concatenate([rho.values, chi.values])
    seed = flags["seed"]
    if seed is None:
        clean = op.apply(vec)
        m = survey.n_points
        data = FieldData(survey, clean[:m], clean[m:], noise)
    else:
        data = simulate(op, vec, noise, seed)

    path = out_dir / "field.fdat"
    write_field_data(path, data, mag_config, grav_config)
    tag = "clean" if seed is None else f"noisy, seed {seed}"
    print(f"forward: {survey.n_points} stations ({tag})")
    return [path]


def _run_invert_map(config, flags, out_dir):
    _check_keys(config, {"grid", "bounds", "gl", "map"}, "config",
                required=("grid", "bounds"))
    grid = _grid_from(config["grid"])
    bounds = _bounds_from(config["bounds"])
    map_cfg = dict(config.get("map", {}))
    _check_keys(map_cfg, {"lambda_gl", "lambda_tik", "max_iters", "grad_tol",
                          "shrink", "sufficient_decrease", "step0", "n_restarts",
                          "init"}, "map")
    gl = _gl_from(config["gl"]) if "gl" in config else None
    cfg = _build("map", MapConfig, gl_params=gl, seed=flags["seed"], **map_cfg)

    _, y, op = _read_observations(flags, grid)
    result = invert_map(y, op, bounds, cfg)

    trace_path = out_dir / flags["trace"]
    trace_lines = ["iter,energy\n"]
    trace_lines += [f"{i},{e:.17g}\n" for i, e in enumerate(result.trace)]
    write_bytes_atomic(trace_path, "".join(trace_lines).encode("ascii"))

    rho_path, chi_path = out_dir / "rho.pvol", out_dir / "chi.pvol"
    write_volume(rho_path, result.model.rho)
    write_volume(chi_path, result.model.chi)
    summary_path = out_dir / "summary.json"
    write_json_atomic(summary_path, {
        "energy": result.energy,
        "grad_norm": result.grad_norm,
        "n_iters": result.n_iters,
        "converged": result.converged,
        "restart": result.restart,
        "n_restarts": cfg.n_restarts,
    })
    print(f"invert-map: energy {result.energy:.6g} after {result.n_iters} "
          f"iterations, converged={result.converged}")
    return [rho_path, chi_path, trace_path, summary_path]


def _json_floats(arr):
    """Finite floats stay numbers; non-finite entries become null."""
    return [float(v) if np.isfinite(v) else None for v in np.asarray(arr, float)]


def _run_sample(config, flags, out_dir):
    _check_keys(config, {"grid", "bounds", "gl", "prior", "sampler"}, "config",
                required=("grid", "prior"))
    grid = _grid_from(config["grid"])
    bounds = _bounds_from(config["bounds"]) if "bounds" in config else None
    gl = _gl_from(config["gl"]) if "gl" in config else None

    prior = config["prior"]
    _check_keys(prior, {"mu_rho", "mu_chi", "sigma0"}, "prior",
                required=("mu_rho", "mu_chi"))
    n = grid.n_cells
    mu = np.concatenate([np.full(n, float(prior["mu_rho"])),
                         np.full(n, float(prior["mu_chi"]))])
    velocity = _build("prior", GaussianPriorVelocity, mu,
                      prior.get("sigma0", 1.0))

    _, y, op = _read_observations(flags, grid)

    sp = dict(config.get("sampler", {}))
    _check_keys(sp, {"n_steps", "k_ref", "alpha_ref", "clamp_norm", "gamma",
                     "eta", "guidance_mode", "sigma_grav", "sigma_mag"}, "sampler")
    if "gamma" in sp:
        sp["gamma_schedule"] = _schedule_from(sp.pop("gamma"), "sampler.gamma")
    if "eta" in sp:
        sp["eta_schedule"] = _schedule_from(sp.pop("eta"), "sampler.eta")
    sp.setdefault("sigma_grav", _scalar_sigma(y.noise.sigma_grav, "sigma_grav"))
    sp.setdefault("sigma_mag", _scalar_sigma(y.noise.sigma_mag, "sigma_mag"))
    cfg = _build("sampler", SamplerConfig, gl_params=gl, bounds=bounds,
                 seed=flags["seed"], **sp)

    n_chains = flags["chains"]
    if n_chains < 1:
        raise ConfigError(f"--chains must be >= 1, got {n_chains}")
    records = sample_chains(y, velocity, IdentityDecoder(grid), op, cfg,
                            n_chains=n_chains, max_workers=_thread_cap())

    written = []
    ok_rho, ok_chi, final_misfits, aborted = [], [], [], []
    for i, rec in enumerate(records):
        if rec.model is not None:
            rho_path = out_dir / f"chain_{i:03d}_rho.pvol"
            chi_path = out_dir / f"chain_{i:03d}_chi.pvol"
            write_volume(rho_path, rec.model.rho)
            write_volume(chi_path, rec.model.chi)
            written += [rho_path, chi_path]
            ok_rho.append(rec.model.rho.values)
            ok_chi.append(rec.model.chi.values)
            final_misfits.append(float(rec.misfit[-1]))
        else:
            aborted.append(i)
        diag_path = out_dir / f"chain_{i:03d}_diag.json"
        write_json_atomic(diag_path, {
            "seed": rec.seed,
            "config_hash": rec.config_hash,
            "aborted": rec.aborted,
            "abort_step": rec.abort_step,
            "misfit": _json_floats(rec.misfit),
            "gl_energy": _json_floats(rec.gl_energy),
            "guidance_norm": _json_floats(rec.guidance_norm),
            "clamp_active": [bool(v) for v in rec.clamp_active],
        })
        written.append(diag_path)

    summary = {
        "n_chains": n_chains,
        "n_ok": len(ok_rho),
        "aborted_chains": aborted,
        "config_hash": cfg.config_hash(),
        "final_misfit": None,
    }
    if not ok_rho:
        # diagnostics stay on disk for post-mortem; the run still failed
        write_json_atomic(out_dir / "summary.json", summary)
        raise NumericsError(
            f"all {n_chains} chains aborted; see diagnostics in {out_dir}"
        )
    if ok_rho:
        fm = np.asarray(final_misfits)
        summary["final_misfit"] = {"mean": float(fm.mean()), "std": float(fm.std()),
                                   "min": float(fm.min()), "max": float(fm.max())}
        mean_rho = out_dir / "mean_rho.pvol"
        mean_chi = out_dir / "mean_chi.pvol"
        write_volume(mean_rho, records[0].model.rho.with_values(
            np.mean(ok_rho, axis=0)))
        write_volume(mean_chi, records[0].model.chi.with_values(
            np.mean(ok_chi, axis=0)))
        written += [mean_rho, mean_chi]
    summary_path = out_dir / "summary.json"
    write_json_atomic(summary_path, summary)
    written.append(summary_path)
    print(f"sample: {len(ok_rho)}/{n_chains} chains completed"
          + (f", aborted {aborted}" if aborted else ""))
    return written


def _run_metrics(config, flags, out_dir):
    pair_mode = flags.get("pred") is not None or flags.get("obs") is not None
    if pair_mode and config:
        raise ConfigError("metrics takes either --pred/--obs or a config with "
                          "baseline and method tables, not both")
    path = out_dir / "metrics.json"
    if pair_mode:
        if flags.get("pred") is None or flags.get("obs") is None:
            raise ConfigError("metrics needs both --pred and --obs")
        _, pg, pm = read_field_arrays(flags["pred"])
        _, og, om = read_field_arrays(flags["obs"])
        if pg.size != og.size or pm.size != om.size:
            raise DataError(f"prediction covers {pg.size}+{pm.size} observations, "
                            f"reference {og.size}+{om.size}")
        report = {
            "rmse_grav": rmse(pg, og),
            "rmse_mag": rmse(pm, om),
            "rmse_total": rmse(np.concatenate([pg, pm]), np.concatenate([og, om])),
        }
        write_json_atomic(path, report)
        print(f"metrics: rmse grav {report['rmse_grav']:.6g}, "
              f"mag {report['rmse_mag']:.6g}")
        return [path]

    _check_keys(config, {"baseline", "methods"}, "config",
                required=("baseline", "methods"))
    rep = _build("metrics", delta_rmse_and_ranks, config["baseline"],
                 config["methods"])
    write_json_atomic(path, {
        "n_obs": rep.n_obs,
        "method_names": list(rep.method_names),
        "win_rates": {k: float(v) for k, v in rep.win_rates.items()},
        "mean_delta_rmse": {k: float(np.mean(v)) for k, v in rep.delta_rmse.items()},
        "delta_rmse": {k: _json_floats(v) for k, v in rep.delta_rmse.items()},
        "ranks": {k: [str(r) for r in v] for k, v in rep.ranks.items()},
    })
    wins = ", ".join(f"{k} {rep.win_rates[k]:.2f}" for k in rep.method_names)
    print(f"metrics: {rep.n_obs} observations, win rates {wins}")
    return [path]


def _run_gl_diag(config, flags, out_dir):
    _check_keys(config, {"profile_resolution", "eps_list"}, "config")
    resolution = config.get("profile_resolution", 4096)
    eps_list = config.get("eps_list", [0.2, 0.1, 0.05, 0.025, 0.0125])
    rows = _build("gl-diag", interface_energy_diagnostic, resolution, eps_list)
    c0 = INTERFACE_ENERGY_CONSTANT
    lines = ["eps,energy,c0_gap\n"]
    for eps, energy in rows:
        lines.append(f"{eps:.17g},{energy:.17g},{abs(energy - c0) / c0:.17g}\n")
    path = out_dir / "diag.csv"
    write_bytes_atomic(path, "".join(lines).encode("ascii"))
    eps_fine, e_fine = rows[-1]
    print(f"gl-diag: gap {abs(e_fine - c0) / c0:.4%} at eps {eps_fine}")
    return [path]


_HANDLERS = {
    "synth": _run_synth,
    "forward": _run_forward,
    "invert-map": _run_invert_map,
    "sample": _run_sample,
    "metrics": _run_metrics,
    "gl-diag": _run_gl_diag,
}

_INPUT_ROLES = {
    "synth": (),
    "forward": ("rho", "chi", "survey"),
    "invert-map": ("obs", "survey"),
    "sample": ("obs", "survey"),
    "metrics": ("pred", "obs"),
    "gl-diag": (),
}


def _execute(command, config, flags, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = _HANDLERS[command](config, flags, out_dir)
    inputs = {role: flags[role] for role in _INPUT_ROLES[command]
              if flags.get(role) is not None}
    manifest = build_manifest(command, flags.get("seed"), config, flags,
                              inputs, out_dir, outputs)
    manifest_path = out_dir / "manifest.json"
    write_json_atomic(manifest_path, manifest)
    print(f"manifest: {manifest_path}")
    return manifest


def _run_rerun(args):
    manifest = read_manifest(args.manifest)
    command = manifest["subcommand"]
    if command not in _HANDLERS:
        raise DataError(f"manifest names unknown subcommand {command!r}")
    for role, entry in manifest["inputs"].items():
        path = entry["path"]
        if not os.path.exists(path):
            raise DataError(f"input {role} missing: {path}")
        digest = sha256_file(path)
        if digest != entry["sha256"]:
            raise DataError(f"input {role} changed since the original run: {path}")
    new_manifest = _execute(command, manifest["config"], manifest["flags"],
                            args.out)
    old_out, new_out = manifest["outputs"], new_manifest["outputs"]
    if old_out != new_out:
        differing = sorted(set(old_out) ^ set(new_out)
                           | {k for k in set(old_out) & set(new_out)
                              if old_out[k] != new_out[k]})
        raise DataError(f"rerun outputs differ from the original: {differing}")
    print(f"rerun: {len(new_out)} outputs match the original manifest")


# ----------------------------------------------------------------- main


def _abspath(value):
    return None if value is None else os.path.abspath(value)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="gravmaginv",
        description="Joint gravity/magnetic inversion toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, config_required=False, seed_default=None,
            with_seed=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=config_required,
                       help="JSON run configuration")
        p.add_argument("--out", required=True, help="output directory")
        if with_seed:
            p.add_argument("--seed", type=int, default=seed_default)
        return p

    add("synth", "simulate a synthetic scenario", config_required=True,
        seed_default=0)

    p = add("forward", "apply forward operators to model volumes")
    p.add_argument("--rho", required=True, help="density volume (PVOL1)")
    p.add_argument("--chi", required=True, help="susceptibility volume (PVOL1)")
    p.add_argument("--survey", required=True, help="station file (SURV1)")

    p = add("invert-map", "deterministic regularized inversion",
            config_required=True, seed_default=0)
    p.add_argument("--obs", required=True, help="observed data (FDAT1)")
    p.add_argument("--survey", required=True, help="station file (SURV1)")
    p.add_argument("--grid", help="JSON grid geometry, overrides config")
    p.add_argument("--lambda-gl", type=float, dest="lambda_gl",
                   help="phase regularization weight, overrides config")
    p.add_argument("--trace", default="trace.csv",
                   help="energy trace file name inside --out")

    p = add("sample", "guided posterior sampling", config_required=True,
            seed_default=0)
    p.add_argument("--obs", required=True, help="observed data (FDAT1)")
    p.add_argument("--survey", required=True, help="station file (SURV1)")
    p.add_argument("--chains", type=int, default=8)

    p = add("metrics", "field RMSE or ranked method comparison", with_seed=False)
    p.add_argument("--pred", help="predicted data (FDAT1)")
    p.add_argument("--obs", help="reference data (FDAT1)")

    add("gl-diag", "interface energy convergence table", with_seed=False)

    p = sub.add_parser("rerun", help="execute a run again from its manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory for the rerun")

    return parser


def _resolve(args):
    """Turn parsed flags into (resolved config, manifest flags)."""
    config = _load_config(args.config) if args.config else {}
    flags = {}
    if hasattr(args, "seed"):
        flags["seed"] = args.seed
    for role in _INPUT_ROLES[args.command]:
        if getattr(args, role, None) is not None:
            flags[role] = _abspath(getattr(args, role))
    if args.command == "invert-map":
        if args.grid is not None:
            config["grid"] = _load_config(args.grid)
        if args.lambda_gl is not None:
            config.setdefault("map", {})
            if not isinstance(config["map"], dict):
                raise ConfigError("config section 'map' must be a JSON object")
            config["map"]["lambda_gl"] = args.lambda_gl
        flags["trace"] = args.trace
    if args.command == "sample":
        flags["chains"] = args.chains
    return config, flags


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "rerun":
            _run_rerun(args)
        else:
            config, flags = _resolve(args)
            _execute(args.command, config, flags, args.out)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
