"""Double-well phase energy on the voxel grid and its relaxation dynamics.

The order parameter phi lives on the cells; the discrete energy is

    E[phi] = dV * [ kappa/(2 h^2) * sum_edges (phi_i - phi_j)^2
                    + 1/(4 eps^2) * sum_i (phi_i^2 - 1)^2 ],    dV = h^3,

with 6-neighbour coupling and zero-flux boundaries (missing neighbours
simply drop out).  Gradient and Hessian products differentiate exactly
this quantity, including the cell-volume factor, so finite-difference
checks close without hidden scale constants.

Two scalings of the same physics appear here and are never converted
implicitly: the bulk form above (well depth fixed by eps), used by the
energy/gradient/dynamics, and the interface (perimeter) form
``eps/2 |grad phi|^2 + W(phi)/eps``, used only by the 1-D interface
energy diagnostic whose sharp-interface limit is the constant
``INTERFACE_ENERGY_CONSTANT``.

Explicit-Euler relaxation dissipates the energy for steps below
:func:`dt_max`; the stochastic variant adds per-cell Gaussian kicks of
variance 2*T*dt/dV, whose long-run statistics follow the Boltzmann
weight exp(-E/T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .grid import ChiBounds, JointModel, PropertyVolume, VoxelGrid, chi_to_phi

INTERFACE_ENERGY_CONSTANT = 2.0 * math.sqrt(2.0) / 3.0


@dataclass(frozen=True)
class GLParams:
    """Coefficients of the phase energy and its guidance schedule.

    kappa and eps are the gradient-coupling and well-width coefficients,
    h the grid spacing the energy is discretized on (must match the grid
    the field lives on), lambda0/gamma the guidance schedule amplitude
    and exponent, lambda_gl the prior weight used by scores.
    """

    kappa: float
    eps: float
    h: float
    lambda0: float = 0.0
    gamma: float = 1.0
    lambda_gl: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "eps", "h"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        for name in ("lambda0", "gamma", "lambda_gl"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be nonnegative, got {v}")


def double_well(s):
    """W(s) = (s^2 - 1)^2 / 4, minima at s = +-1, W'' (0) < 0."""
    s = np.asarray(s, dtype=np.float64)
    return 0.25 * (s * s - 1.0) ** 2


def double_well_prime(s):
    """W'(s) = s^3 - s."""
    s = np.asarray(s, dtype=np.float64)
    return s * (s * s - 1.0)


def _check_h(grid: VoxelGrid, p: GLParams):
    if not math.isclose(grid.h, p.h, rel_tol=1e-12, abs_tol=0.0):
        raise ValueError(f"GLParams.h={p.h} does not match grid.h={grid.h}")


def _laplacian_apply_3d(arr3: np.ndarray) -> np.ndarray:
    """Graph Laplacian (degree minus adjacency) with zero-flux boundaries."""
    out = np.zeros_like(arr3)
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        d = arr3[tuple(hi)] - arr3[tuple(lo)]
        out[tuple(lo)] -= d
        out[tuple(hi)] += d
    return out


class GraphLaplacian:
    """6-neighbour graph Laplacian of a grid, matrix-free with a sparse view."""

    def __init__(self, grid: VoxelGrid):
        self.grid = grid

    def apply(self, values: np.ndarray) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        if v.shape != (self.grid.n_cells,):
            raise ValueError(f"expected shape ({self.grid.n_cells},), got {v.shape}")
        return _laplacian_apply_3d(self.grid.as_3d(v)).ravel()

    def to_sparse(self) -> sp.csr_matrix:
        def chain(n):
            if n == 1:
                return sp.csr_matrix((1, 1))
            deg = np.full(n, 2.0)
            deg[0] = deg[-1] = 1.0
            off = -np.ones(n - 1)
            return sp.diags([off, deg, off], [-1, 0, 1], format="csr")

        g = self.grid
        ix, iy, iz = sp.identity(g.nx), sp.identity(g.ny), sp.identity(g.nz)
        lx, ly, lz = chain(g.nx), chain(g.ny), chain(g.nz)
        # linear index runs x fastest, so x is the innermost factor
        return (sp.kron(iz, sp.kron(iy, lx))
                + sp.kron(iz, sp.kron(ly, ix))
                + sp.kron(lz, sp.kron(iy, ix))).tocsr()


def _gl_energy_values(values: np.ndarray, grid: VoxelGrid, p: GLParams) -> float:
    arr3 = grid.as_3d(values)
    grad_sq = 0.0
    for axis in range(3):
        d = np.diff(arr3, axis=axis)
        grad_sq += float((d * d).sum())
    well = float(((values * values - 1.0) ** 2).sum())
    dv = grid.cell_volume
    return dv * (0.5 * p.kappa / p.h ** 2 * grad_sq + well / (4.0 * p.eps ** 2))


def _gl_gradient_values(values: np.ndarray, grid: VoxelGrid, p: GLParams) -> np.ndarray:
    lap = _laplacian_apply_3d(grid.as_3d(values)).ravel()
    dv = grid.cell_volume
    return dv * (p.kappa / p.h ** 2 * lap
                 + values * (values * values - 1.0) / p.eps ** 2)


def gl_energy(phi: PropertyVolume, p: GLParams) -> float:
    """Discrete phase energy of a field (see module docstring for the form)."""
    _check_h(phi.grid, p)
    return _gl_energy_values(phi.values, phi.grid, p)


def gl_gradient(phi: PropertyVolume, p: GLParams) -> np.ndarray:
    """Exact gradient of :func:`gl_energy` with respect to the cell values."""
    _check_h(phi.grid, p)
    return _gl_gradient_values(phi.values, phi.grid, p)


def gl_hessian_apply(phi: PropertyVolume, v: np.ndarray, p: GLParams) -> np.ndarray:
    """Hessian-vector product of :func:`gl_energy` at phi.

    H v = dV * [ kappa/h^2 * L v + (3 phi^2 - 1)/eps^2 * v ]; the well
    curvature is negative wherever |phi| < 1/sqrt(3), so the energy is
    nonconvex in the transition band.
    """
    _check_h(phi.grid, p)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (phi.grid.n_cells,):
        raise ValueError(f"expected shape ({phi.grid.n_cells},), got {v.shape}")
    lap_v = _laplacian_apply_3d(phi.grid.as_3d(v)).ravel()
    phi_v = phi.values
    dv = phi.grid.cell_volume
    return dv * (p.kappa / p.h ** 2 * lap_v
                 + (3.0 * phi_v * phi_v - 1.0) / p.eps ** 2 * v)


def dt_max(p: GLParams) -> float:
    """Largest explicit-Euler step with guaranteed energy decrease.

    Bounds the relaxation operator's curvature by 12 kappa/h^2 (twice
    the maximum neighbour count) plus the well curvature bound 2/eps^2.
    """
    return 1.0 / (12.0 * p.kappa / p.h ** 2 + 2.0 / p.eps ** 2)


class AllenCahnStep(NamedTuple):
    phi: PropertyVolume
    dt_exceeded: bool


def _relaxation_drift(values: np.ndarray, grid: VoxelGrid, p: GLParams) -> np.ndarray:
    """Per-volume steepest-descent direction, i.e. gradient / dV."""
    return (p.kappa / p.h ** 2 * _laplacian_apply_3d(grid.as_3d(values)).ravel()
            + values * (values * values - 1.0) / p.eps ** 2)


def allen_cahn_step(phi: PropertyVolume, dt: float, p: GLParams) -> AllenCahnStep:
    """One explicit-Euler relaxation step phi - dt * (gradient / dV).

    A step larger than :func:`dt_max` is still taken but flagged, since
    energy decrease is no longer guaranteed.
    """
    _check_h(phi.grid, p)
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    new_values = phi.values - dt * _relaxation_drift(phi.values, phi.grid, p)
    return AllenCahnStep(phi.with_values(new_values), dt > dt_max(p))


@dataclass(frozen=True)
class AllenCahnRun:
    phi: PropertyVolume
    energies: np.ndarray  # length n_steps + 1, starting value included
    dt_exceeded: bool


def allen_cahn_evolve(phi: PropertyVolume, dt: float, n_steps: int,
                      p: GLParams) -> AllenCahnRun:
    """Repeated deterministic relaxation with an energy trace."""
    _check_h(phi.grid, p)
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    grid = phi.grid
    values = phi.values.copy()
    energies = np.empty(n_steps + 1)
    energies[0] = _gl_energy_values(values, grid, p)
    for k in range(n_steps):
        values = values - dt * _relaxation_drift(values, grid, p)
        energies[k + 1] = _gl_energy_values(values, grid, p)
    return AllenCahnRun(phi.with_values(values), energies, dt > dt_max(p))


def stochastic_allen_cahn_step(phi: PropertyVolume, dt: float, temperature: float,
                               seed: int, p: GLParams) -> PropertyVolume:
    """One Euler-Maruyama step of the noisy relaxation.

    At temperature zero this reduces bitwise to the deterministic step.
    The per-cell kick has standard deviation sqrt(2*T*dt/dV), which
    makes exp(-E/T) the invariant weight of the continuous-time limit.
    """
    _check_h(phi.grid, p)
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    if not (np.isfinite(temperature) and temperature >= 0):
        raise ValueError(f"temperature must be nonnegative, got {temperature}")
    values = phi.values - dt * _relaxation_drift(phi.values, phi.grid, p)
    if temperature > 0:
        rng = np.random.default_rng(seed)
        scale = math.sqrt(2.0 * temperature * dt / phi.grid.cell_volume)
        values = values + scale * rng.standard_normal(values.size)
    return phi.with_values(values)


@dataclass(frozen=True)
class ChainRun:
    samples: np.ndarray  # (n_recorded, n_cells) post-burn-in states
    phi: PropertyVolume  # final state


def stochastic_allen_cahn_chain(phi0: PropertyVolume, dt: float, temperature: float,
                                n_steps: int, seed: int, p: GLParams,
                                burn_in: int = 0, record_every: int = 1) -> ChainRun:
    """Run the noisy relaxation for n_steps, recording post-burn-in states.

    One random stream drives the whole chain, so a (seed, config) pair
    reproduces the run exactly.
    """
    _check_h(phi0.grid, p)
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    if not (np.isfinite(temperature) and temperature >= 0):
        raise ValueError(f"temperature must be nonnegative, got {temperature}")
    if n_steps < 1 or burn_in < 0 or burn_in >= n_steps or record_every < 1:
        raise ValueError(
            f"need n_steps >= 1, 0 <= burn_in < n_steps, record_every >= 1; "
            f"got n_steps={n_steps}, burn_in={burn_in}, record_every={record_every}"
        )
    grid = phi0.grid
    n = grid.n_cells
    values = phi0.values.copy()
    rng = np.random.default_rng(seed)
    scale = math.sqrt(2.0 * temperature * dt / grid.cell_volume)
    n_rec = (n_steps - burn_in + record_every - 1) // record_every
    samples = np.empty((n_rec, n))
    out = 0
    block = 8192
    done = 0
    while done < n_steps:
        m = min(block, n_steps - done)
        noise = rng.standard_normal((m, n)) if temperature > 0 else None
        for j in range(m):
            values = values - dt * _relaxation_drift(values, grid, p)
            if noise is not None:
                values = values + scale * noise[j]
            k = done + j
            if k >= burn_in and (k - burn_in) % record_every == 0:
                samples[out] = values
                out += 1
        done += m
    return ChainRun(samples[:out], phi0.with_values(values))


def gl_prior_score(m: JointModel, bounds: ChiBounds, p: GLParams) -> np.ndarray:
    """Score of the phase prior on the stacked [rho; chi] model vector.

    Returns -lambda_gl * d/dchi E(phi(chi)) on the susceptibility block
    (chain rule through the affine phase map contributes the constant
    factor 2/width) and zeros on the density block, which the prior does
    not touch.
    """
    _check_h(m.grid, p)
    n = m.grid.n_cells
    score = np.zeros(2 * n)
    if p.lambda_gl > 0:
        phi_values = chi_to_phi(m.chi.values, bounds)
        grad_phi = _gl_gradient_values(phi_values, m.grid, p)
        score[n:] = -p.lambda_gl * (2.0 / bounds.width) * grad_phi
    return score


def lambda_schedule(t: float, p: GLParams) -> float:
    """Guidance weight lambda0 * clamp(1 - t, 0, 1)^gamma.

    Zero at the pure-noise end t = 1 (for gamma > 0), the full weight
    lambda0 at the data end t = 0.
    """
    u = min(max(1.0 - float(t), 0.0), 1.0)
    return p.lambda0 * u ** p.gamma


def gl_loss_weights(energies, lam: float,
                    clamp_lo: float = math.exp(-3.0),
                    clamp_hi: float = math.exp(3.0)) -> np.ndarray:
    """Per-sample weights exp(-lam * standardized energy), clamped.

    Energies are standardized with batch statistics (population std), so
    the weights are scale free.  A batch of fewer than two samples
    cannot be standardized and raises; a zero-variance batch gets unit
    weights.
    """
    e = np.asarray(energies, dtype=np.float64)
    if e.ndim != 1 or e.size < 2:
        raise ValueError(f"need a 1-D batch of at least 2 energies, got shape {e.shape}")
    if not (np.isfinite(lam) and lam >= 0):
        raise ValueError(f"lam must be nonnegative, got {lam}")
    if not (0 < clamp_lo <= clamp_hi):
        raise ValueError(f"need 0 < clamp_lo <= clamp_hi, got ({clamp_lo}, {clamp_hi})")
    std = float(e.std())
    if std == 0.0:
        return np.ones_like(e)
    z = (e - e.mean()) / std
    return np.clip(np.exp(-lam * z), clamp_lo, clamp_hi)


def interface_energy_diagnostic(profile_resolution: int, eps_list):
    """Interface-scaled energy of the 1-D equilibrium profile per eps.

    Builds tanh(x / (sqrt(2) eps)) on a unit interval with the given
    number of cells and evaluates eps/2 |phi'|^2 + W(phi)/eps by
    midpoint sums.  As eps shrinks (while staying resolved) the value
    approaches INTERFACE_ENERGY_CONSTANT, the energy cost per unit
    interface area.  Raises when any requested eps has fewer than 8
    cells per interface width sqrt(2)*eps.
    """
    n = int(profile_resolution)
    if n < 2:
        raise ValueError(f"profile_resolution must be >= 2, got {n}")
    eps_arr = [float(e) for e in eps_list]
    if not eps_arr or any(not (np.isfinite(e) and e > 0) for e in eps_arr):
        raise ValueError(f"eps_list must contain positive floats, got {eps_list}")
    h1 = 1.0 / n
    for e in eps_arr:
        width = math.sqrt(2.0) * e
        if width < 8.0 * h1:
            raise ValueError(
                f"eps={e} under-resolved: interface width {width:.4g} spans fewer "
                f"than 8 cells at resolution {n}"
            )
    x = (np.arange(n) + 0.5) * h1 - 0.5
    out = []
    for e in eps_arr:
        phi = np.tanh(x / (math.sqrt(2.0) * e))
        grad = np.diff(phi) / h1
        energy = float(0.5 * e * (grad * grad).sum() * h1
                       + (double_well(phi) / e).sum() * h1)
        out.append((e, energy))
    return out
