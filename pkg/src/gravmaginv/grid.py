"""Voxel grids, property volumes and the value maps between them.

Conventions used throughout the toolkit:

* right handed coordinates with z positive **up**; the subsurface model
  occupies a box of ``nx * ny * nz`` cubic cells of edge ``h`` metres,
* ``origin`` is the minimum corner (x0, y0, z0) of the box, so the top
  face of the model sits at ``z0 + nz * h`` and observation points must
  lie strictly above it,
* a cell ``(ix, iy, iz)`` maps to linear index ``ix + nx*(iy + ny*iz)``
  (x fastest), and every flat array in the toolkit uses that order.

All containers are immutable value objects: arrays are copied on
construction and marked read-only, so instances are safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROPERTY_KINDS = ("density", "susceptibility", "phase")


def _frozen_array(obj, name, values, shape=None):
    arr = np.array(values, dtype=np.float64, copy=True)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: values must be finite")
    arr.setflags(write=False)
    object.__setattr__(obj, name, arr)
    return arr


@dataclass(frozen=True)
class VoxelGrid:
    """Regular cubic-cell grid with z positive up."""

    nx: int
    ny: int
    nz: int
    h: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            n = getattr(self, name)
            if int(n) != n or n < 1:
                raise ValueError(f"{name} must be a positive integer, got {n}")
            object.__setattr__(self, name, int(n))
        if not (self.h > 0.0 and np.isfinite(self.h)):
            raise ValueError(f"cell size h must be positive, got {self.h}")
        object.__setattr__(self, "h", float(self.h))
        if len(self.origin) != 3 or not all(np.isfinite(v) for v in self.origin):
            raise ValueError(f"origin must be three finite floats, got {self.origin}")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    @property
    def top_z(self) -> float:
        """z coordinate of the top face of the model box."""
        return self.origin[2] + self.nz * self.h

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    def linear_index(self, ix: int, iy: int, iz: int) -> int:
        if not (0 <= ix < self.nx and 0 <= iy < self.ny and 0 <= iz < self.nz):
            raise ValueError(f"cell ({ix},{iy},{iz}) outside grid {self.shape}")
        return ix + self.nx * (iy + self.ny * iz)

    def cell_of(self, i: int) -> tuple[int, int, int]:
        if not 0 <= i < self.n_cells:
            raise ValueError(f"linear index {i} outside [0, {self.n_cells})")
        ix = i % self.nx
        iy = (i // self.nx) % self.ny
        iz = i // (self.nx * self.ny)
        return ix, iy, iz

    def as_3d(self, values: np.ndarray) -> np.ndarray:
        """View a flat cell array as (nz, ny, nx); index order v[iz, iy, ix]."""
        return np.asarray(values).reshape(self.nz, self.ny, self.nx)

    def cell_centers(self) -> np.ndarray:
        """Centers of all cells, shape (n_cells, 3), in linear-index order."""
        x0, y0, z0 = self.origin
        cx = x0 + (np.arange(self.nx) + 0.5) * self.h
        cy = y0 + (np.arange(self.ny) + 0.5) * self.h
        cz = z0 + (np.arange(self.nz) + 0.5) * self.h
        Z, Y, X = np.meshgrid(cz, cy, cx, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def cell_bounds(self):
        """Per-cell face coordinates (x1, x2, y1, y2, z1, z2), each (n_cells,)."""
        c = self.cell_centers()
        half = 0.5 * self.h
        return (c[:, 0] - half, c[:, 0] + half,
                c[:, 1] - half, c[:, 1] + half,
                c[:, 2] - half, c[:, 2] + half)


@dataclass(frozen=True)
class PropertyVolume:
    """One scalar property (density contrast, susceptibility or phase) on a grid.

    Density contrast is in kg/m^3, susceptibility is dimensionless SI, and
    phase is the order parameter whose physical range is [-1, 1].  Values
    must be finite; range constraints are enforced by the operations that
    need them (for example the log transform), not by the container, so
    that the affine phase maps remain exact inverses on all of R.
    """

    grid: VoxelGrid
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in PROPERTY_KINDS:
            raise ValueError(f"kind must be one of {PROPERTY_KINDS}, got {self.kind!r}")
        _frozen_array(self, "values", self.values, shape=(self.grid.n_cells,))

    def with_values(self, values) -> "PropertyVolume":
        return PropertyVolume(self.grid, self.kind, values)


@dataclass(frozen=True)
class JointModel:
    """Density-contrast and susceptibility volumes sharing one grid."""

    rho: PropertyVolume
    chi: PropertyVolume

    def __post_init__(self):
        if self.rho.kind != "density":
            raise ValueError(f"rho volume must have kind 'density', got {self.rho.kind!r}")
        if self.chi.kind != "susceptibility":
            raise ValueError(f"chi volume must have kind 'susceptibility', got {self.chi.kind!r}")
        if self.rho.grid != self.chi.grid:
            raise ValueError("rho and chi must share the same grid")

    @property
    def grid(self) -> VoxelGrid:
        return self.rho.grid


@dataclass(frozen=True)
class SurveyGeometry:
    """Observation points, shape (n_points, 3), shared by both field channels."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise ValueError(f"points must have shape (n, 3) with n >= 1, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("survey points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def check_survey(grid: VoxelGrid, survey: SurveyGeometry) -> None:
    """Require every observation point to sit strictly above the model box.

    Points above the top face cannot touch any cell, which keeps both
    field kernels nonsingular.
    """
    z = survey.points[:, 2]
    if not np.all(z > grid.top_z):
        worst = float(z.min())
        raise ValueError(
            f"survey points must lie strictly above the grid top face "
            f"z={grid.top_z}; lowest point has z={worst}"
        )


@dataclass(frozen=True)
class ChiBounds:
    """Susceptibility range [chi_min, chi_max] used by the phase maps.

    chi_max should be a robust upper quantile of the expected
    susceptibility population, never a raw maximum; it is always supplied
    explicitly by configuration.
    """

    chi_min: float
    chi_max: float

    def __post_init__(self):
        ok = (np.isfinite(self.chi_min) and np.isfinite(self.chi_max)
              and 0.0 <= self.chi_min < self.chi_max)
        if not ok:
            raise ValueError(
                f"need 0 <= chi_min < chi_max, got ({self.chi_min}, {self.chi_max})"
            )
        object.__setattr__(self, "chi_min", float(self.chi_min))
        object.__setattr__(self, "chi_max", float(self.chi_max))

    @property
    def width(self) -> float:
        return self.chi_max - self.chi_min

    @property
    def mid(self) -> float:
        return 0.5 * (self.chi_max + self.chi_min)


def _map_values(x, fn, out_kind):
    """Apply fn to a PropertyVolume (rewrapping with out_kind) or a raw array."""
    if isinstance(x, PropertyVolume):
        return PropertyVolume(x.grid, out_kind, fn(x.values))
    return fn(np.asarray(x, dtype=np.float64))


def chi_to_phi(chi, bounds: ChiBounds):
    """Affine map from susceptibility to the phase order parameter.

    phi = (2*chi - (chi_max + chi_min)) / (chi_max - chi_min), so the
    interval [chi_min, chi_max] maps onto [-1, 1].  Out-of-range input is
    mapped affinely as well, never clamped.  Accepts a PropertyVolume or
    a plain array.
    """
    return _map_values(chi, lambda v: (2.0 * v - (bounds.chi_max + bounds.chi_min)) / bounds.width,
                       "phase")


def phi_to_chi(phi, bounds: ChiBounds):
    """Exact inverse of :func:`chi_to_phi` on all of R."""
    return _map_values(phi, lambda v: 0.5 * bounds.width * v + bounds.mid,
                       "susceptibility")


def log_transform(chi, eps_offset: float = 1e-4):
    """Decadic log transform x = log10(chi + eps_offset) for susceptibility.

    The offset keeps chi = 0 finite.  Negative susceptibility is outside
    the transform's domain and raises.
    """
    if not eps_offset > 0.0:
        raise ValueError(f"eps_offset must be positive, got {eps_offset}")

    def fn(v):
        if np.any(v < 0.0):
            raise ValueError("log transform requires nonnegative susceptibility")
        return np.log10(v + eps_offset)

    return _map_values(chi, fn, "susceptibility")


def inverse_log_transform(x, eps_offset: float = 1e-4):
    """Inverse of :func:`log_transform`: chi = 10**x - eps_offset."""
    if not eps_offset > 0.0:
        raise ValueError(f"eps_offset must be positive, got {eps_offset}")
    return _map_values(x, lambda v: np.power(10.0, v) - eps_offset, "susceptibility")


def stack_model(m: JointModel) -> np.ndarray:
    """Concatenate [rho; chi] into one vector of length 2*n_cells."""
    return np.concatenate([m.rho.values, m.chi.values])


def unstack_model(vector: np.ndarray, grid: VoxelGrid) -> JointModel:
    """Split a stacked [rho; chi] vector back into a JointModel."""
    v = np.asarray(vector, dtype=np.float64)
    n = grid.n_cells
    if v.shape != (2 * n,):
        raise ValueError(f"expected stacked vector of shape ({2 * n},), got {v.shape}")
    return JointModel(
        PropertyVolume(grid, "density", v[:n]),
        PropertyVolume(grid, "susceptibility", v[n:]),
    )
