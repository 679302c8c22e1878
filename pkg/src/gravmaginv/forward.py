"""Forward operators for gravity and total-field magnetic anomalies.

Gravity: each cell is a right rectangular prism of constant density
contrast.  The vertical attraction at an exterior point has a closed
form built from logarithm and arctangent corner terms; with z positive
up we report the **downward** component, so a positive density excess
below an observation produces a positive anomaly.

Magnetics: each cell is collapsed to a point dipole at its center,
induced by a uniform ambient field of magnitude ``b0`` (nT) with
inclination I (positive down) and declination D (east of north).  The
total-field anomaly per unit susceptibility is

    b0 * V / (4 pi) * (3 (h.r)^2 - 1) / r^3      [nT]

where ``h`` is the unit field direction, ``r`` the cell-to-observation
offset and V the cell volume.  The approximation degrades near a cell,
so assembled operators require every observation to clear the nearest
cell center by at least one cell size.

Both operators are linear in the cell properties; the joint operator is
block diagonal over [rho; chi] and exposes exact adjoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    JointModel,
    SurveyGeometry,
    VoxelGrid,
    _frozen_array,
    check_survey,
    stack_model,
)

NEWTON_G = 6.674e-11  # m^3 kg^-1 s^-2
MGAL_PER_MS2 = 1e5

# dense assembly is comfortable up to these sizes; beyond them operators
# recompute kernel rows on demand
DENSE_MAX_CELLS = 32 ** 3
DENSE_MAX_OBS = 64 ** 2


@dataclass(frozen=True)
class GravityKernelConfig:
    """Gravitational constant and output unit ('mGal' or 'si')."""

    G: float = NEWTON_G
    unit: str = "mGal"

    def __post_init__(self):
        if not (np.isfinite(self.G) and self.G > 0):
            raise ValueError(f"G must be positive, got {self.G}")
        if self.unit not in ("mGal", "si"):
            raise ValueError(f"unit must be 'mGal' or 'si', got {self.unit!r}")

    @property
    def scale(self) -> float:
        return MGAL_PER_MS2 if self.unit == "mGal" else 1.0


@dataclass(frozen=True)
class MagneticKernelConfig:
    """Ambient field: magnitude b0 in nT, inclination/declination in degrees."""

    b0: float = 50_000.0
    inclination_deg: float = 60.0
    declination_deg: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.b0) and self.b0 > 0):
            raise ValueError(f"b0 must be positive, got {self.b0}")
        if not -90.0 <= self.inclination_deg <= 90.0:
            raise ValueError(f"inclination must be in [-90, 90], got {self.inclination_deg}")
        if not np.isfinite(self.declination_deg):
            raise ValueError("declination must be finite")

    def field_direction(self) -> np.ndarray:
        """Unit vector of the ambient field in (x east, y north, z up)."""
        inc = np.deg2rad(self.inclination_deg)
        dec = np.deg2rad(self.declination_deg)
        return np.array([np.cos(inc) * np.cos(dec),
                         np.cos(inc) * np.sin(dec),
                         -np.sin(inc)])


def _corner_sum(u1, u2, v1, v2, w1, w2):
    """Eight-corner evaluation of the prism antiderivative.

    Arguments are prism face coordinates relative to the observation
    point; all may be arrays of matching shape.  Logarithm arguments are
    rewritten in their cancellation-free form when the offset is
    negative, and terms are defined by continuity where a multiplier
    vanishes.
    """

    def safe_log(a, r):
        # log(a + r); for a < 0 use a + r = (r^2 - a^2) / (r - a),
        # which avoids cancellation when r is barely above |a|
        denom = r - a
        stable = (r * r - a * a) / np.where(denom > 0, denom, 1.0)
        return np.log(np.where(a < 0, stable, a + r))

    total = 0.0
    for su, u in ((-1.0, u1), (1.0, u2)):
        for sv, v in ((-1.0, v1), (1.0, v2)):
            for sw, w in ((-1.0, w1), (1.0, w2)):
                sign = su * sv * sw
                r = np.sqrt(u * u + v * v + w * w)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(w != 0.0, u * v / (np.where(w != 0.0, w, 1.0) * r), 0.0)
                    term = (np.where(u != 0.0, u * safe_log(v, r), 0.0)
                            + np.where(v != 0.0, v * safe_log(u, r), 0.0)
                            - w * np.arctan(ratio))
                total = total + sign * term
    return total


def prism_gravity_kernel(bounds, obs, cfg: GravityKernelConfig) -> float:
    """Vertical attraction of one prism per unit density contrast.

    Parameters
    ----------
    bounds : (x1, x2, y1, y2, z1, z2) prism face coordinates, metres.
    obs : (3,) observation point, strictly outside the closed prism.
    cfg : GravityKernelConfig.

    Returns
    -------
    float
        Downward anomaly per unit density (mGal or m/s^2 per kg/m^3).
    """
    x1, x2, y1, y2, z1, z2 = (float(b) for b in bounds)
    if not (x2 > x1 and y2 > y1 and z2 > z1):
        raise ValueError(f"degenerate prism: need x1<x2, y1<y2, z1<z2, got {bounds}")
    ox, oy, oz = (float(c) for c in obs)
    if x1 <= ox <= x2 and y1 <= oy <= y2 and z1 <= oz <= z2:
        raise ValueError(
            f"observation {tuple(obs)} lies inside or on the prism; kernel is singular"
        )
    s = _corner_sum(x1 - ox, x2 - ox, y1 - oy, y2 - oy, z1 - oz, z2 - oz)
    return float(cfg.G * cfg.scale * s)


def dipole_tmi_kernel(cell_center, cell_size: float, obs, cfg: MagneticKernelConfig) -> float:
    """Total-field anomaly of one cell per unit susceptibility, in nT.

    Raises if the observation is closer than half a cell size to the
    cell center, where the point-dipole replacement is meaningless.
    """
    if not cell_size > 0:
        raise ValueError(f"cell_size must be positive, got {cell_size}")
    center = np.asarray(cell_center, dtype=np.float64)
    r_vec = np.asarray(obs, dtype=np.float64) - center
    r = float(np.linalg.norm(r_vec))
    if r < 0.5 * cell_size:
        raise ValueError(
            f"observation within {r:.3g} m of cell center; dipole approximation "
            f"requires at least half a cell size ({0.5 * cell_size:.3g} m)"
        )
    h_hat = cfg.field_direction()
    cos_t = float(r_vec @ h_hat) / r
    volume = cell_size ** 3
    return float(cfg.b0 * volume / (4.0 * np.pi) * (3.0 * cos_t ** 2 - 1.0) / r ** 3)


class SensitivityOperator:
    """Linear map from one property vector to one field channel.

    Rows are kernel evaluations; the same row routine backs the dense
    matrix, the matrix-free apply and the adjoint, so the two modes agree
    to rounding and the adjoint is the exact transpose.
    """

    def __init__(self, n_obs: int, n_cells: int, row_fn, mode: str,
                 grid: VoxelGrid | None = None, survey: SurveyGeometry | None = None):
        if mode not in ("dense", "matrix-free"):
            raise ValueError(f"mode must be 'dense' or 'matrix-free', got {mode!r}")
        self.shape = (n_obs, n_cells)
        self.grid = grid
        self.survey = survey
        self.mode = mode
        self._row_fn = row_fn
        self._matrix = None
        if mode == "dense":
            self._matrix = np.vstack([row_fn(i) for i in range(n_obs)])

    @classmethod
    def from_matrix(cls, matrix, grid=None, survey=None) -> "SensitivityOperator":
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {m.shape}")
        op = cls.__new__(cls)
        op.shape = m.shape
        op.grid = grid
        op.survey = survey
        op.mode = "dense"
        op._row_fn = lambda i: m[i]
        op._matrix = m
        return op

    def _check_vec(self, v, length, name):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (length,):
            raise ValueError(f"{name}: expected shape ({length},), got {v.shape}")
        return v

    def apply(self, v) -> np.ndarray:
        v = self._check_vec(v, self.shape[1], "apply")
        if self._matrix is not None:
            return self._matrix @ v
        return np.array([self._row_fn(i) @ v for i in range(self.shape[0])])

    def adjoint(self, w) -> np.ndarray:
        w = self._check_vec(w, self.shape[0], "adjoint")
        if self._matrix is not None:
            return self._matrix.T @ w
        out = np.zeros(self.shape[1])
        for i in range(self.shape[0]):
            out += w[i] * self._row_fn(i)
        return out

    def as_matrix(self) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix
        return np.vstack([self._row_fn(i) for i in range(self.shape[0])])


def _pick_mode(mode: str, n_obs: int, n_cells: int) -> str:
    if mode == "auto":
        small = n_cells <= DENSE_MAX_CELLS and n_obs <= DENSE_MAX_OBS
        return "dense" if small else "matrix-free"
    return mode


def assemble_gravity_operator(grid: VoxelGrid, survey: SurveyGeometry,
                              cfg: GravityKernelConfig | None = None,
                              mode: str = "auto") -> SensitivityOperator:
    """Sensitivity of the gravity channel to cell density contrasts."""
    cfg = cfg or GravityKernelConfig()
    check_survey(grid, survey)
    x1, x2, y1, y2, z1, z2 = grid.cell_bounds()
    pts = survey.points
    factor = cfg.G * cfg.scale

    def row(i):
        ox, oy, oz = pts[i]
        return factor * _corner_sum(x1 - ox, x2 - ox, y1 - oy, y2 - oy,
                                    z1 - oz, z2 - oz)

    return SensitivityOperator(survey.n_points, grid.n_cells, row,
                               _pick_mode(mode, survey.n_points, grid.n_cells),
                               grid=grid, survey=survey)


def assemble_magnetic_operator(grid: VoxelGrid, survey: SurveyGeometry,
                               cfg: MagneticKernelConfig | None = None,
                               mode: str = "auto") -> SensitivityOperator:
    """Sensitivity of the TMI channel to cell susceptibilities."""
    cfg = cfg or MagneticKernelConfig()
    check_survey(grid, survey)
    centers = grid.cell_centers()
    pts = survey.points
    # one cell size of clearance from the nearest center keeps the
    # point-dipole error small for every pair
    dmin = np.sqrt(((pts[:, None, :] - centers[None, :, :]) ** 2).sum(-1)).min() \
        if pts.shape[0] * centers.shape[0] <= 4_000_000 else None
    if dmin is None:
        dmin = min(float(np.sqrt(((centers - p) ** 2).sum(-1)).min()) for p in pts)
    if dmin < grid.h:
        raise ValueError(
            f"nearest observation-to-cell-center distance {dmin:.3g} m is below "
            f"one cell size ({grid.h:.3g} m); dipole kernel would be unreliable"
        )
    h_hat = cfg.field_direction()
    factor = cfg.b0 * grid.cell_volume / (4.0 * np.pi)

    def row(i):
        r_vec = pts[i] - centers
        r = np.sqrt((r_vec ** 2).sum(-1))
        cos_t = (r_vec @ h_hat) / r
        return factor * (3.0 * cos_t ** 2 - 1.0) / r ** 3

    return SensitivityOperator(survey.n_points, grid.n_cells, row,
                               _pick_mode(mode, survey.n_points, grid.n_cells),
                               grid=grid, survey=survey)


class JointOperator:
    """Block-diagonal map [rho; chi] -> [gravity; magnetic]."""

    def __init__(self, grav_op: SensitivityOperator, mag_op: SensitivityOperator):
        if grav_op.shape[1] != mag_op.shape[1]:
            raise ValueError(
                f"channel operators disagree on cell count: "
                f"{grav_op.shape[1]} vs {mag_op.shape[1]}"
            )
        self.grav = grav_op
        self.mag = mag_op
        self.n_cells = grav_op.shape[1]
        self.shape = (grav_op.shape[0] + mag_op.shape[0], 2 * self.n_cells)
        self.grid = grav_op.grid if grav_op.grid is not None else mag_op.grid
        self.survey = grav_op.survey if grav_op.survey is not None else mag_op.survey

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.shape[1],):
            raise ValueError(f"apply: expected shape ({self.shape[1]},), got {v.shape}")
        n = self.n_cells
        return np.concatenate([self.grav.apply(v[:n]), self.mag.apply(v[n:])])

    def adjoint(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.shape[0],):
            raise ValueError(f"adjoint: expected shape ({self.shape[0]},), got {w.shape}")
        mg = self.grav.shape[0]
        return np.concatenate([self.grav.adjoint(w[:mg]), self.mag.adjoint(w[mg:])])

    def as_matrix(self) -> np.ndarray:
        out = np.zeros(self.shape)
        mg = self.grav.shape[0]
        n = self.n_cells
        out[:mg, :n] = self.grav.as_matrix()
        out[mg:, n:] = self.mag.as_matrix()
        return out


def joint_operator(grav_op: SensitivityOperator, mag_op: SensitivityOperator) -> JointOperator:
    return JointOperator(grav_op, mag_op)


@dataclass(frozen=True)
class NoiseModel:
    """Independent Gaussian noise, one sigma per channel or per observation."""

    sigma_grav: float | np.ndarray = 0.1
    sigma_mag: float | np.ndarray = 15.0

    def __post_init__(self):
        for name in ("sigma_grav", "sigma_mag"):
            s = np.asarray(getattr(self, name), dtype=np.float64)
            if not (np.all(np.isfinite(s)) and np.all(s > 0)):
                raise ValueError(f"{name} must be positive and finite")
            if s.ndim == 0:
                object.__setattr__(self, name, float(s))
            elif s.ndim == 1:
                s = s.copy()
                s.setflags(write=False)
                object.__setattr__(self, name, s)
            else:
                raise ValueError(f"{name} must be a scalar or 1-D array")

    def _block(self, sigma, m, name):
        s = np.asarray(sigma, dtype=np.float64)
        if s.ndim == 0:
            return np.full(m, float(s))
        if s.shape != (m,):
            raise ValueError(f"{name} has {s.shape[0]} entries but channel has {m}")
        return np.array(s)

    def sigma_vector(self, m_grav: int, m_mag: int) -> np.ndarray:
        """Stacked per-observation sigmas, gravity block first."""
        return np.concatenate([self._block(self.sigma_grav, m_grav, "sigma_grav"),
                               self._block(self.sigma_mag, m_mag, "sigma_mag")])


@dataclass(frozen=True)
class FieldData:
    """Observed (or simulated) gravity and TMI values on one survey."""

    survey: SurveyGeometry
    grav: np.ndarray
    mag: np.ndarray
    noise: NoiseModel

    def __post_init__(self):
        m = self.survey.n_points
        _frozen_array(self, "grav", self.grav, shape=(m,))
        _frozen_array(self, "mag", self.mag, shape=(m,))
        # force early failure on per-observation sigma length mismatch
        self.noise.sigma_vector(m, m)

    @property
    def n_obs(self) -> int:
        return 2 * self.survey.n_points

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.grav, self.mag])


def _model_vector(m, op) -> np.ndarray:
    if isinstance(m, JointModel):
        return stack_model(m)
    v = np.asarray(m, dtype=np.float64)
    if v.shape != (op.shape[1],):
        raise ValueError(f"model vector: expected shape ({op.shape[1]},), got {v.shape}")
    return v


def simulate(op: JointOperator, m, noise: NoiseModel, seed: int) -> FieldData:
    """Forward model plus one seeded draw of independent Gaussian noise."""
    if op.survey is None:
        raise ValueError("operator carries no survey; cannot build FieldData")
    clean = op.apply(_model_vector(m, op))
    mp = op.survey.n_points
    sigma = noise.sigma_vector(mp, op.shape[0] - mp)
    rng = np.random.default_rng(seed)
    y = clean + sigma * rng.standard_normal(op.shape[0])
    return FieldData(op.survey, y[:mp], y[mp:], noise)


def neg_log_likelihood(y: FieldData, m, op: JointOperator, noise: NoiseModel) -> float:
    """0.5 * || G m - y ||^2 weighted by the inverse noise variances.

    Normalization constants are dropped; this is the data-misfit energy
    used by both the MAP objective and the sampler's consistency loss.
    """
    r = op.apply(_model_vector(m, op)) - y.stacked()
    sigma = noise.sigma_vector(y.survey.n_points, y.survey.n_points)
    return float(0.5 * np.sum((r / sigma) ** 2))


def misfit_gradient(y: FieldData, m, op: JointOperator, noise: NoiseModel) -> np.ndarray:
    """Gradient of :func:`neg_log_likelihood` with respect to the model vector."""
    r = op.apply(_model_vector(m, op)) - y.stacked()
    sigma = noise.sigma_vector(y.survey.n_points, y.survey.n_points)
    return op.adjoint(r / sigma ** 2)
