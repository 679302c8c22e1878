"""Self-describing binary files, atomic writes, and run manifests.

Three formats share one layout: a single-line JSON header (always with a
"magic" key naming the format) followed by a newline and little-endian
float64 payload blocks.

  PVOL1  one property volume plus its voxel grid geometry
  SURV1  survey observation points, one (x, y, z) row per station
  FDAT1  gravity and total-field magnetic data on one survey, with the
         noise sigmas and ambient-field configuration in the header

Every write lands via a temporary file in the destination directory
followed by an atomic rename, so a reader never observes a partial
file.  Readers validate the header against the payload byte count and
raise DataError on any mismatch, so rereading an emitted file either
reproduces the in-memory values bitwise or fails loudly.

A manifest is a JSON document recording one command line run: the
subcommand, the fully resolved configuration, the seed, input files
with content hashes, output files with content hashes, and the package
and interpreter versions.  Two runs of the same command agree on every
manifest field except the creation timestamp, and a manifest contains
everything needed to execute the run again.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import DataError
from .forward import FieldData, GravityKernelConfig, MagneticKernelConfig, NoiseModel
from .grid import PropertyVolume, SurveyGeometry, VoxelGrid

MANIFEST_MAGIC = "GMINV-MANIFEST-1"

_FLOAT = np.dtype("<f8")


def write_bytes_atomic(path, data: bytes) -> None:
    """Write bytes to path via a temp file and rename in one step."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, target)
    except BaseException:
        # never leave temp droppings after a failed write
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _header_bytes(header: dict) -> bytes:
    return json.dumps(header).encode("ascii") + b"\n"


def _split_file(path, magic: str):
    """Return (header dict, payload bytes), validating the magic key."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    nl = raw.find(b"\n")
    if nl < 0:
        raise DataError(f"{path}: no header line found")
    try:
        header = json.loads(raw[:nl].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: malformed header: {exc}") from exc
    if not isinstance(header, dict):
        raise DataError(f"{path}: header is not a JSON object")
    if header.get("magic") != magic:
        raise DataError(f"{path}: expected a {magic} file, got magic "
                        f"{header.get('magic')!r}")
    return header, raw[nl + 1:]


def _payload_floats(path, payload: bytes, count: int, what: str) -> np.ndarray:
    if len(payload) != count * 8:
        raise DataError(
            f"{path}: {what} payload holds {len(payload)} bytes, "
            f"expected {count * 8}"
        )
    return np.frombuffer(payload, dtype=_FLOAT).astype(np.float64)


def _grid_header(grid: VoxelGrid) -> dict:
    return {"nx": grid.nx, "ny": grid.ny, "nz": grid.nz,
            "h": grid.h, "origin": list(grid.origin)}


def _grid_from_header(path, header: dict) -> VoxelGrid:
    try:
        return VoxelGrid(header["nx"], header["ny"], header["nz"],
                         header["h"], tuple(header["origin"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad grid geometry in header: {exc}") from exc


def write_volume(path, vol: PropertyVolume) -> None:
    """Write one property volume as a PVOL1 file."""
    header = {"magic": "PVOL1", "kind": vol.kind, **_grid_header(vol.grid)}
    write_bytes_atomic(path, _header_bytes(header)
                       + np.ascontiguousarray(vol.values, dtype=_FLOAT).tobytes())


def read_volume(path) -> PropertyVolume:
    header, payload = _split_file(path, "PVOL1")
    grid = _grid_from_header(path, header)
    values = _payload_floats(path, payload, grid.n_cells, "volume")
    try:
        return PropertyVolume(grid, header.get("kind"), values)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def write_survey(path, survey: SurveyGeometry) -> None:
    """Write station coordinates as a SURV1 file."""
    header = {"magic": "SURV1", "n_points": survey.n_points}
    write_bytes_atomic(path, _header_bytes(header)
                       + np.ascontiguousarray(survey.points, dtype=_FLOAT).tobytes())


def read_survey(path) -> SurveyGeometry:
    header, payload = _split_file(path, "SURV1")
    n = header.get("n_points")
    if not isinstance(n, int) or n < 1:
        raise DataError(f"{path}: bad n_points {n!r}")
    pts = _payload_floats(path, payload, 3 * n, "survey").reshape(n, 3)
    try:
        return SurveyGeometry(pts)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def _sigma_json(sigma):
    return float(sigma) if np.ndim(sigma) == 0 else [float(v) for v in sigma]


def write_field_data(path, data: FieldData, mag_config: MagneticKernelConfig,
                     grav_config: GravityKernelConfig = GravityKernelConfig()) -> None:
    """Write gravity and magnetic observations as an FDAT1 file.

    The survey coordinates live in their own SURV1 file; the header here
    records only counts, units, noise sigmas, and the ambient field.
    """
    header = {
        "magic": "FDAT1",
        "n_grav": int(data.grav.size),
        "n_mag": int(data.mag.size),
        "units": {"grav": grav_config.unit, "mag": "nT"},
        "sigma_grav": _sigma_json(data.noise.sigma_grav),
        "sigma_mag": _sigma_json(data.noise.sigma_mag),
        "b0": mag_config.b0,
        "inclination_deg": mag_config.inclination_deg,
        "declination_deg": mag_config.declination_deg,
    }
    write_bytes_atomic(
        path,
        _header_bytes(header)
        + np.ascontiguousarray(data.grav, dtype=_FLOAT).tobytes()
        + np.ascontiguousarray(data.mag, dtype=_FLOAT).tobytes(),
    )


def read_field_arrays(path):
    """Low-level FDAT1 read: (header dict, grav array, mag array)."""
    header, payload = _split_file(path, "FDAT1")
    ng, nm = header.get("n_grav"), header.get("n_mag")
    for name, n in (("n_grav", ng), ("n_mag", nm)):
        if not isinstance(n, int) or n < 1:
            raise DataError(f"{path}: bad {name} {n!r}")
    block = _payload_floats(path, payload, ng + nm, "field data")
    return header, block[:ng], block[ng:]


def read_field_data(path, survey: SurveyGeometry):
    """Read an FDAT1 file onto a survey.

    Returns (FieldData, MagneticKernelConfig, GravityKernelConfig); the
    field configuration comes from the header so downstream operator
    assembly matches the file that produced the data.
    """
    header, grav, mag = read_field_arrays(path)
    if grav.size != survey.n_points or mag.size != survey.n_points:
        raise DataError(
            f"{path}: {grav.size}/{mag.size} observations do not match "
            f"survey with {survey.n_points} stations"
        )
    try:
        noise = NoiseModel(np.asarray(header["sigma_grav"], dtype=np.float64),
                           np.asarray(header["sigma_mag"], dtype=np.float64))
        mag_config = MagneticKernelConfig(header["b0"], header["inclination_deg"],
                                          header["declination_deg"])
        grav_config = GravityKernelConfig(unit=header["units"]["grav"])
        data = FieldData(survey, grav, mag, noise)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    return data, mag_config, grav_config


def read_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            obj = json.load(f)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise DataError(f"{path}: expected a JSON object at top level")
    return obj


def write_json_atomic(path, obj: dict) -> None:
    """Write a JSON document with stable key order and a trailing newline."""
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    write_bytes_atomic(path, text.encode("utf-8"))


def _versions() -> dict:
    import platform

    import scipy

    from . import __version__

    return {"package": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def build_manifest(subcommand: str, seed, config: dict, flags: dict,
                   inputs: dict, out_dir, outputs) -> dict:
    """Record one run: resolved config, inputs and outputs with hashes.

    ``inputs`` maps role names to paths of files the run read;
    ``outputs`` lists paths the run wrote, stored relative to out_dir.
    """
    out_dir = Path(out_dir)
    return {
        "magic": MANIFEST_MAGIC,
        "subcommand": subcommand,
        "seed": seed,
        "config": config,
        "flags": flags,
        "inputs": {role: {"path": str(Path(p)), "sha256": sha256_file(p)}
                   for role, p in sorted(inputs.items())},
        "outputs": {os.path.relpath(p, out_dir): sha256_file(p)
                    for p in sorted(str(q) for q in outputs)},
        "versions": _versions(),
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }


def read_manifest(path) -> dict:
    manifest = read_json(path)
    if manifest.get("magic") != MANIFEST_MAGIC:
        raise DataError(f"{path}: not a run manifest (magic {manifest.get('magic')!r})")
    for key in ("subcommand", "config", "flags", "inputs", "outputs"):
        if key not in manifest:
            raise DataError(f"{path}: manifest is missing the {key!r} field")
    return manifest


def manifest_identity(manifest: dict) -> dict:
    """Manifest content that must agree between repeated runs."""
    return {k: v for k, v in manifest.items() if k != "created_utc"}
