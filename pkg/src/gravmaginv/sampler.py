"""Guided posterior sampling: flow integration with per-step refinement.

One reverse pass from noise (t = 1) to data (t = 0) alternates four
moves at each step: estimate both path endpoints from the velocity,
improve the data endpoint with a few gradient steps on the
noise-weighted data misfit, blend the two data-endpoint estimates with
a trust schedule gamma_t, and re-noise the noise endpoint with a
schedule eta_t before reconstructing the latent at the next time.
With gamma and eta identically zero and guidance off, the loop reduces
to plain Euler integration of the velocity field.

Phase guidance enters through the decoder adjoint: the phase-energy
descent direction on the susceptibility channel is pulled back to
latent space, clamped in norm, and either converted to a velocity
increment via the linear-flow score relation (default) or added to the
refinement gradient.  The conversion factor -t/(1-t) follows from
score = -E[z1|z]/t and v = (-t * score - z)/(1 - t).

Everything downstream of (config, seed) is deterministic; one RNG
stream drives the initial latent and all re-noise draws.
"""

from __future__ import annotations

import hashlib
import json
import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import NumericsError
from .flow import VelocityField
from .forward import (
    FieldData,
    JointOperator,
    NoiseModel,
    misfit_gradient,
    neg_log_likelihood,
)
from .glphysics import GLParams, _gl_energy_values, _gl_gradient_values, lambda_schedule
from .grid import ChiBounds, JointModel, PropertyVolume, VoxelGrid, chi_to_phi


class Decoder(ABC):
    """Differentiable map from latent space to the stacked [rho; chi] model.

    Subclasses supply apply and the exact adjoint of its Jacobian; the
    susceptibility-channel helpers are derived from those two.
    """

    def __init__(self, grid: VoxelGrid):
        self.grid = grid

    @property
    @abstractmethod
    def latent_dim(self) -> int:
        """Length of the latent vector."""

    @abstractmethod
    def apply(self, z: np.ndarray) -> np.ndarray:
        """Decode latent z to a stacked model vector of length 2 n_cells."""

    @abstractmethod
    def adjoint_jacobian_apply(self, z: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Apply the transposed Jacobian of apply at z to a model-space g."""

    def decode_chi(self, z: np.ndarray) -> np.ndarray:
        return self.apply(z)[self.grid.n_cells:]

    def adjoint_jacobian_chi(self, z: np.ndarray, g_chi: np.ndarray) -> np.ndarray:
        """Pull a susceptibility-space direction back to latent space."""
        g = np.zeros(2 * self.grid.n_cells)
        g[self.grid.n_cells:] = g_chi
        return self.adjoint_jacobian_apply(z, g)

    def decode_model(self, z: np.ndarray) -> JointModel:
        x = self.apply(z)
        n = self.grid.n_cells
        return JointModel(PropertyVolume(self.grid, "density", x[:n]),
                          PropertyVolume(self.grid, "susceptibility", x[n:]))


class IdentityDecoder(Decoder):
    """Latent space is model space: apply is the identity."""

    @property
    def latent_dim(self) -> int:
        return 2 * self.grid.n_cells

    def apply(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.latent_dim,):
            raise ValueError(f"expected latent shape ({self.latent_dim},), got {z.shape}")
        return z.copy()

    def adjoint_jacobian_apply(self, z, g):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != (self.latent_dim,):
            raise ValueError(f"expected model shape ({self.latent_dim},), got {g.shape}")
        return g.copy()


class LinearDecoder(Decoder):
    """Decode through a fixed matrix: x = W z, adjoint Jacobian W^T."""

    def __init__(self, grid: VoxelGrid, matrix: np.ndarray):
        super().__init__(grid)
        w = np.asarray(matrix, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != 2 * grid.n_cells:
            raise ValueError(
                f"matrix must be (2 n_cells, L) = ({2 * grid.n_cells}, L), got {w.shape}"
            )
        if not np.isfinite(w).all():
            raise ValueError("matrix must be finite")
        self.matrix = w

    @property
    def latent_dim(self) -> int:
        return self.matrix.shape[1]

    def apply(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.latent_dim,):
            raise ValueError(f"expected latent shape ({self.latent_dim},), got {z.shape}")
        return self.matrix @ z

    def adjoint_jacobian_apply(self, z, g):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != (self.matrix.shape[0],):
            raise ValueError(f"expected model shape ({self.matrix.shape[0]},), got {g.shape}")
        return self.matrix.T @ g


_GAMMA_SCHEDULES = ("ramp", "constant")
_ETA_SCHEDULES = ("linear", "constant")


def gamma_value(schedule, t: float) -> float:
    """Refinement-trust weight at time t for a named schedule."""
    name = schedule[0]
    if name == "ramp":
        return min(max(1.0 - t, 0.0), 1.0)
    if name == "constant":
        return float(schedule[1])
    raise ValueError(f"unknown gamma schedule {name!r}")


def eta_value(schedule, t: float) -> float:
    """Re-noising weight at time t for a named schedule."""
    name = schedule[0]
    if name == "linear":
        return float(schedule[1]) * t
    if name == "constant":
        return float(schedule[1])
    raise ValueError(f"unknown eta schedule {name!r}")


def _check_schedule(schedule, allowed, kind):
    if not schedule or schedule[0] not in allowed:
        raise ValueError(f"{kind} schedule must be one of {allowed}, got {schedule!r}")
    if schedule[0] != "ramp":
        if len(schedule) != 2 or not (np.isfinite(schedule[1]) and 0.0 <= schedule[1] <= 1.0):
            raise ValueError(f"{kind} schedule {schedule!r} needs one parameter in [0, 1]")
    return tuple(schedule)


@dataclass(frozen=True)
class SamplerConfig:
    """Controls of the guided sampling loop.

    The noise sigmas weight the data-consistency loss; gl_params and
    bounds switch phase guidance on (guidance_mode picks where the
    clamped score enters: the velocity or the refinement gradient).
    """

    n_steps: int = 64
    k_ref: int = 8
    alpha_ref: float = 0.1
    sigma_grav: float = 0.1
    sigma_mag: float = 15.0
    clamp_norm: float = 100.0
    gamma_schedule: tuple = ("ramp",)
    eta_schedule: tuple = ("linear", 0.3)
    gl_params: GLParams | None = None
    bounds: ChiBounds | None = None
    guidance_mode: str = "velocity"
    seed: int = 0

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.k_ref < 0:
            raise ValueError(f"k_ref must be >= 0, got {self.k_ref}")
        if not (np.isfinite(self.alpha_ref) and self.alpha_ref > 0):
            raise ValueError(f"alpha_ref must be positive, got {self.alpha_ref}")
        for name in ("sigma_grav", "sigma_mag", "clamp_norm"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        object.__setattr__(self, "gamma_schedule",
                           _check_schedule(self.gamma_schedule, _GAMMA_SCHEDULES, "gamma"))
        object.__setattr__(self, "eta_schedule",
                           _check_schedule(self.eta_schedule, _ETA_SCHEDULES, "eta"))
        if self.guidance_mode not in ("velocity", "refinement"):
            raise ValueError(
                f"guidance_mode must be 'velocity' or 'refinement', got {self.guidance_mode!r}"
            )
        if self.gl_params is not None and self.bounds is None:
            raise ValueError("gl_params without bounds: guidance needs the chi range")

    @property
    def noise(self) -> NoiseModel:
        return NoiseModel(sigma_grav=self.sigma_grav, sigma_mag=self.sigma_mag)

    def config_hash(self) -> str:
        """Stable digest of everything except the seed.

        Chains of one run share the hash while differing in seed, so
        records group naturally by configuration.
        """
        payload = asdict(self)
        payload.pop("seed")
        if self.gl_params is not None:
            payload["gl_params"] = asdict(self.gl_params)
        if self.bounds is not None:
            payload["bounds"] = [self.bounds.chi_min, self.bounds.chi_max]
        text = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()

    def guidance_enabled(self) -> bool:
        return self.gl_params is not None and self.gl_params.lambda0 > 0


@dataclass(frozen=True)
class SampleRecord:
    """One chain's output: decoded model, latent, per-step diagnostics."""

    model: JointModel | None
    z0: np.ndarray
    misfit: np.ndarray          # data-consistency loss per step
    gl_energy: np.ndarray       # phase energy of the decoded chi per step
    guidance_norm: np.ndarray   # pre-clamp guidance score norm per step
    clamp_active: np.ndarray    # bool per step
    seed: int
    config_hash: str
    aborted: bool = False
    abort_step: int | None = None


def data_consistency_loss(z0_hat, y: FieldData, dec: Decoder, op: JointOperator,
                          noise: NoiseModel) -> float:
    """Noise-weighted squared data residual of the decoded latent."""
    return neg_log_likelihood(y, dec.apply(np.asarray(z0_hat, dtype=np.float64)),
                              op, noise)


def data_consistency_gradient(z0_hat, y: FieldData, dec: Decoder, op: JointOperator,
                              noise: NoiseModel) -> np.ndarray:
    """Latent-space gradient of :func:`data_consistency_loss`.

    Composes the operator adjoint with the decoder's Jacobian transpose.
    """
    z = np.asarray(z0_hat, dtype=np.float64)
    g_model = misfit_gradient(y, dec.apply(z), op, noise)
    return dec.adjoint_jacobian_apply(z, g_model)


def refine_endpoint(z0_hat, y: FieldData, dec: Decoder, op: JointOperator,
                    cfg: SamplerConfig, guidance: np.ndarray | None = None) -> np.ndarray:
    """k_ref gradient-descent steps on the data-consistency loss.

    An optional guidance vector is added to each descent direction (the
    refinement-mode entry point for the phase score).  A non-finite
    gradient aborts with the loss trace attached.
    """
    z = np.array(z0_hat, dtype=np.float64)
    noise = cfg.noise
    trace = []
    for k in range(cfg.k_ref):
        g = data_consistency_gradient(z, y, dec, op, noise)
        if guidance is not None:
            g = g - guidance
        if not np.isfinite(g).all():
            raise NumericsError(
                f"non-finite refinement gradient at inner step {k}", trace=trace)
        z = z - cfg.alpha_ref * g
        trace.append(data_consistency_loss(z, y, dec, op, noise))
    return z


def gl_guidance_score(z, t: float, dec: Decoder, bounds: ChiBounds,
                      gl_params: GLParams) -> np.ndarray:
    """Latent-space phase-energy descent direction, weighted by lambda_t.

    Maps the decoded susceptibility to the phase variable, takes the
    phase-energy gradient, chains back through the affine map and the
    decoder Jacobian.  Moving along the returned vector lowers the
    phase energy of the decoded model.
    """
    z = np.asarray(z, dtype=np.float64)
    lam = lambda_schedule(t, gl_params)
    if lam == 0.0:
        return np.zeros(dec.latent_dim)
    chi = dec.decode_chi(z)
    phi = chi_to_phi(chi, bounds)
    grad_phi = _gl_gradient_values(phi, dec.grid, gl_params)
    g_chi = -lam * (2.0 / bounds.width) * grad_phi
    return dec.adjoint_jacobian_chi(z, g_chi)


def clamp_score(g, max_norm: float) -> np.ndarray:
    """Scale g down to max_norm if longer; direction is preserved."""
    if not (np.isfinite(max_norm) and max_norm > 0):
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    g = np.asarray(g, dtype=np.float64)
    norm = float(np.linalg.norm(g))
    if norm <= max_norm:
        return g.copy()
    return g * (max_norm / norm)


def _decoded_gl_energy(z, dec: Decoder, cfg: SamplerConfig) -> float:
    if cfg.gl_params is None or cfg.bounds is None:
        return math.nan
    chi = dec.decode_chi(np.asarray(z, dtype=np.float64))
    phi = chi_to_phi(chi, cfg.bounds)
    return _gl_energy_values(phi, dec.grid, cfg.gl_params)


def sample_posterior(y: FieldData, velocity: VelocityField, dec: Decoder,
                     op: JointOperator, cfg: SamplerConfig) -> SampleRecord:
    """Run one guided chain from noise to data time.

    Fully deterministic in (cfg, cfg.seed).  A non-finite latent or
    refinement gradient stops the chain early and returns an aborted
    record carrying the failing step index.
    """
    if op.shape[1] != 2 * dec.grid.n_cells:
        raise ValueError(
            f"operator model dimension {op.shape[1]} does not match decoder grid "
            f"({2 * dec.grid.n_cells})"
        )
    if y.n_obs != op.shape[0]:
        raise ValueError(f"data length {y.n_obs} does not match operator {op.shape[0]}")

    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_steps
    z = rng.standard_normal(dec.latent_dim)
    ts = np.linspace(1.0, 0.0, n + 1)
    noise = cfg.noise
    chash = cfg.config_hash()

    misfit = np.full(n, np.nan)
    energy = np.full(n, np.nan)
    gnorm = np.full(n, np.nan)
    clampact = np.zeros(n, dtype=bool)

    def aborted(step):
        return SampleRecord(None, z.copy(), misfit, energy, gnorm, clampact,
                            cfg.seed, chash, aborted=True, abort_step=step)

    guide = cfg.guidance_enabled()
    for k in range(n):
        t, t_next = float(ts[k]), float(ts[k + 1])
        if not np.isfinite(z).all():
            return aborted(k)

        v = velocity.evaluate(z, t)
        g_clamped = None
        if guide and 1.0 - t > 1e-12:
            g_raw = gl_guidance_score(z, t, dec, cfg.bounds, cfg.gl_params)
            raw_norm = float(np.linalg.norm(g_raw))
            gnorm[k] = raw_norm
            clampact[k] = raw_norm > cfg.clamp_norm
            g_clamped = clamp_score(g_raw, cfg.clamp_norm)
            if cfg.guidance_mode == "velocity":
                v = v + (-t / (1.0 - t)) * g_clamped
                g_clamped = None
        elif guide:
            gnorm[k] = 0.0

        z0_hat = z - t * v
        z1_hat = z + (1.0 - t) * v
        try:
            z0_ref = refine_endpoint(z0_hat, y, dec, op, cfg, guidance=g_clamped)
        except NumericsError:
            return aborted(k)

        gamma = gamma_value(cfg.gamma_schedule, t)
        z0_blend = (1.0 - gamma) * z0_hat + gamma * z0_ref

        eta = eta_value(cfg.eta_schedule, t)
        if eta > 0.0:
            epsilon = rng.standard_normal(dec.latent_dim)
            z1_blend = math.sqrt(1.0 - eta) * z1_hat + math.sqrt(eta) * epsilon
        else:
            z1_blend = z1_hat

        z = (1.0 - t_next) * z0_blend + t_next * z1_blend

        misfit[k] = data_consistency_loss(z0_blend, y, dec, op, noise)
        energy[k] = _decoded_gl_energy(z0_blend, dec, cfg)

    if not np.isfinite(z).all():
        return aborted(n - 1)
    return SampleRecord(dec.decode_model(z), z.copy(), misfit, energy, gnorm,
                        clampact, cfg.seed, chash)


def sample_chains(y: FieldData, velocity: VelocityField, dec: Decoder,
                  op: JointOperator, cfg: SamplerConfig, n_chains: int,
                  max_workers: int | None = None) -> list:
    """Independent chains with seeds cfg.seed, cfg.seed + 1, ...

    Chains share the read-only operator, decoder, and velocity; each
    gets its own RNG stream.  Runs in a thread pool when max_workers
    allows (numpy releases the interpreter lock in the heavy kernels).
    """
    if n_chains < 1:
        raise ValueError(f"n_chains must be >= 1, got {n_chains}")
    configs = [replace(cfg, seed=cfg.seed + i) for i in range(n_chains)]
    if max_workers is None or max_workers <= 1 or n_chains == 1:
        return [sample_posterior(y, velocity, dec, op, c) for c in configs]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(sample_posterior, y, velocity, dec, op, c)
                   for c in configs]
        return [f.result() for f in futures]
