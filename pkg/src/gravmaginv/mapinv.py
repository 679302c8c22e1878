"""Deterministic baseline inversion by penalized gradient descent.

Minimizes one scalar objective over the stacked [rho; chi] vector: the
noise-weighted data misfit, plus lambda_gl times the phase energy of the
mapped susceptibility, plus an optional Tikhonov ridge.  A backtracking
line search keeps every accepted step at sufficient decrease, so the
energy trace is monotone by construction.  The phase term makes the
problem non-convex; multi-start with best-energy selection is the only
globalization used.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericsError
from .forward import FieldData, JointOperator, NoiseModel, misfit_gradient, neg_log_likelihood
from .glphysics import GLParams, _gl_energy_values, gl_prior_score
from .grid import ChiBounds, JointModel, chi_to_phi, unstack_model

_INIT_MODES = ("zeros", "random", "supplied")


@dataclass(frozen=True)
class MapConfig:
    """Objective weights and descent controls for the baseline inverter.

    gl_params carries the phase-energy constants (kappa, eps, h); its
    own guidance weights are ignored here, lambda_gl below is the one
    that scales the phase term.  init picks the starting model: zeros
    puts the density at 0 and the susceptibility at the mid-range value
    (phase 0, biased toward neither well), random draws both blocks,
    supplied uses the caller's vector.
    """

    lambda_gl: float = 0.0
    lambda_tik: float = 0.0
    gl_params: GLParams | None = None
    max_iters: int = 500
    grad_tol: float = 1e-6
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    step0: float = 1.0
    n_restarts: int = 1
    init: str = "zeros"
    seed: int = 0

    def __post_init__(self):
        for name in ("lambda_gl", "lambda_tik"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be >= 0, got {v}")
        if self.lambda_gl > 0 and self.gl_params is None:
            raise ValueError("lambda_gl > 0 needs gl_params for the phase energy")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        for name in ("grad_tol", "step0"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError(f"shrink must be in (0, 1), got {self.shrink}")
        if not 0.0 < self.sufficient_decrease < 1.0:
            raise ValueError(
                f"sufficient_decrease must be in (0, 1), got {self.sufficient_decrease}"
            )
        if self.n_restarts < 1:
            raise ValueError(f"n_restarts must be >= 1, got {self.n_restarts}")
        if self.init not in _INIT_MODES:
            raise ValueError(f"init must be one of {_INIT_MODES}, got {self.init!r}")


def _gl_params_for(cfg: MapConfig) -> GLParams:
    return replace(cfg.gl_params, lambda_gl=cfg.lambda_gl)


def total_energy(m, y: FieldData, op: JointOperator, noise: NoiseModel,
                 bounds: ChiBounds, cfg: MapConfig) -> float:
    """Data misfit + lambda_gl * phase energy + (lambda_tik/2) ||m||^2."""
    v = np.asarray(m, dtype=np.float64)
    e = neg_log_likelihood(y, v, op, noise)
    if cfg.lambda_gl > 0:
        n = op.grid.n_cells
        phi = chi_to_phi(v[n:], bounds)
        e += cfg.lambda_gl * _gl_energy_values(phi, op.grid, cfg.gl_params)
    if cfg.lambda_tik > 0:
        e += 0.5 * cfg.lambda_tik * float(v @ v)
    return float(e)


def total_gradient(m, y: FieldData, op: JointOperator, noise: NoiseModel,
                   bounds: ChiBounds, cfg: MapConfig) -> np.ndarray:
    """Exact gradient of :func:`total_energy` in the stacked model vector."""
    v = np.asarray(m, dtype=np.float64)
    g = misfit_gradient(y, v, op, noise)
    if cfg.lambda_gl > 0:
        model = unstack_model(v, op.grid)
        # the prior score is the descent direction of the phase term,
        # so the energy gradient subtracts it
        g = g - gl_prior_score(model, bounds, _gl_params_for(cfg))
    if cfg.lambda_tik > 0:
        g = g + cfg.lambda_tik * v
    return g


@dataclass(frozen=True)
class MapResult:
    """Winning restart of an inversion plus per-restart energy traces."""

    model: JointModel
    m: np.ndarray
    energy: float
    trace: np.ndarray           # accepted energies of the winning restart
    traces: list                # one trace per restart, in restart order
    grad_norm: float
    n_iters: int
    converged: bool
    restart: int                # index of the winning restart


def _initial_vector(cfg: MapConfig, mode: str, op: JointOperator,
                    bounds: ChiBounds, seed: int, m0) -> np.ndarray:
    n = op.shape[1] // 2
    if mode == "zeros":
        m = np.zeros(2 * n)
        m[n:] = bounds.mid
        return m
    if mode == "random":
        rng = np.random.default_rng(seed)
        m = np.empty(2 * n)
        m[:n] = rng.standard_normal(n)
        m[n:] = rng.uniform(bounds.chi_min, bounds.chi_max, n)
        return m
    if m0 is None:
        raise ValueError("init='supplied' needs an explicit m0 vector")
    m = np.asarray(m0, dtype=np.float64).copy()
    if m.shape != (2 * n,):
        raise ValueError(f"m0 must have shape ({2 * n},), got {m.shape}")
    return m


def _descend(m, y, op, noise, bounds, cfg: MapConfig):
    """One restart: backtracking gradient descent from the given start."""
    e = total_energy(m, y, op, noise, bounds, cfg)
    if not np.isfinite(e):
        raise NumericsError("non-finite starting energy", trace=[e])
    trace = [e]
    step = cfg.step0
    gn = np.nan
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        g = total_gradient(m, y, op, noise, bounds, cfg)
        if not np.isfinite(g).all():
            raise NumericsError(f"non-finite gradient at iteration {it}", trace=trace)
        gn = float(np.linalg.norm(g))
        if gn <= cfg.grad_tol:
            converged = True
            break
        gsq = gn * gn
        s = step
        accepted = False
        while s > 1e-20:
            m_new = m - s * g
            e_new = total_energy(m_new, y, op, noise, bounds, cfg)
            if np.isfinite(e_new) and e_new <= e - cfg.sufficient_decrease * s * gsq:
                accepted = True
                break
            s *= cfg.shrink
        if not accepted:
            break
        m, e = m_new, e_new
        trace.append(e)
        step = 2.0 * s
    return m, e, np.asarray(trace), gn, it, converged


def invert_map(y: FieldData, op: JointOperator, bounds: ChiBounds,
               cfg: MapConfig, m0=None) -> MapResult:
    """Minimize the total energy; return the best restart.

    Restart 0 uses cfg.init; further restarts draw random starts from
    seeds cfg.seed + 1, cfg.seed + 2, ...  Fully deterministic given the
    config.  A non-finite energy or gradient aborts with the trace so
    far attached to the raised error.
    """
    if op.grid is None:
        raise ValueError("operator carries no grid; assemble it with one")
    if y.n_obs != op.shape[0]:
        raise ValueError(f"data length {y.n_obs} does not match operator {op.shape[0]}")
    noise = y.noise
    best = None
    traces = []
    for r in range(cfg.n_restarts):
        mode = cfg.init if r == 0 else "random"
        m_start = _initial_vector(cfg, mode, op, bounds, cfg.seed + r, m0)
        m, e, trace, gn, it, conv = _descend(m_start, y, op, noise, bounds, cfg)
        traces.append(trace)
        if best is None or e < best[1]:
            best = (m, e, trace, gn, it, conv, r)
    m, e, trace, gn, it, conv, r = best
    return MapResult(model=unstack_model(m, op.grid), m=m, energy=e, trace=trace,
                     traces=traces, grad_norm=gn, n_iters=it, converged=conv,
                     restart=r)
