"""Rectified linear flow: velocity fields, endpoint estimates, integration.

Convention throughout: t = 0 is the data end, t = 1 the noise end, and a
latent path is the straight line z_t = (1-t) z0 + t z1 between a data
sample z0 and a standard normal z1.  A velocity field returns
E[z1 - z0 | z_t], so endpoint estimates are affine in (z, v) and the
reconstruction identity (1-t) z0_hat + t z1_hat = z holds exactly.

The Gaussian-prior field is the analytic stand-in for a trained model:
with z0 ~ N(mu, sigma0^2 I) and independent z1 ~ N(0, I), both
conditional endpoint means are linear in z and the velocity is known in
closed form, which makes every sampler property checkable without any
training.  A tabulated affine field can be loaded from an .npz file for
externally supplied models.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FlowState:
    """Latent vector z at flow time t (0 = data, 1 = noise)."""

    z: np.ndarray
    t: float

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        if z.ndim != 1 or z.size == 0:
            raise ValueError(f"z must be a nonempty 1-D vector, got shape {z.shape}")
        if not np.isfinite(z).all():
            raise ValueError("z must be finite")
        z = z.copy()
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        t = float(self.t)
        if not (np.isfinite(t) and 0.0 <= t <= 1.0):
            raise ValueError(f"t must lie in [0, 1], got {t}")
        object.__setattr__(self, "t", t)


class VelocityField(ABC):
    """Deterministic, side-effect-free velocity evaluator."""

    @abstractmethod
    def evaluate(self, z: np.ndarray, t: float) -> np.ndarray:
        """Velocity at latent z (leading batch axes allowed) and time t."""

    def __call__(self, z, t):
        return self.evaluate(z, t)


def gaussian_endpoint_means(z, t, mu, sigma0):
    """Conditional endpoint means (E[z0|z_t], E[z1|z_t]) of the Gaussian path.

    z_t = (1-t) z0 + t z1 with z0 ~ N(mu, sigma0^2 I), z1 ~ N(0, I)
    independent; the conditional variance s_t^2 = (1-t)^2 sigma0^2 + t^2
    never vanishes for sigma0 > 0.
    """
    z = np.asarray(z, dtype=np.float64)
    t = float(t)
    mu = np.asarray(mu, dtype=np.float64)
    s2 = (1.0 - t) ** 2 * sigma0 ** 2 + t ** 2
    centered = z - (1.0 - t) * mu
    e0 = mu + ((1.0 - t) * sigma0 ** 2 / s2) * centered
    e1 = (t / s2) * centered
    return e0, e1


def gaussian_velocity(z, t, mu, sigma0):
    """E[z1 - z0 | z_t = z] for the independent Gaussian coupling."""
    e0, e1 = gaussian_endpoint_means(z, t, mu, sigma0)
    return e1 - e0


class GaussianPriorVelocity(VelocityField):
    """Exact flow velocity for a N(mu, sigma0^2 I) data distribution."""

    def __init__(self, mu, sigma0: float):
        mu_arr = np.asarray(mu, dtype=np.float64)
        if mu_arr.ndim > 1:
            raise ValueError(f"mu must be a scalar or 1-D vector, got shape {mu_arr.shape}")
        if not np.isfinite(mu_arr).all():
            raise ValueError("mu must be finite")
        if not (np.isfinite(sigma0) and sigma0 > 0):
            raise ValueError(f"sigma0 must be positive, got {sigma0}")
        self.mu = mu_arr
        self.sigma0 = float(sigma0)

    def evaluate(self, z, t):
        return gaussian_velocity(z, t, self.mu, self.sigma0)

    def affine_coefficients(self, t: float):
        """Gain and offset with evaluate(z, t) == gain * z + offset."""
        t = float(t)
        s2 = (1.0 - t) ** 2 * self.sigma0 ** 2 + t ** 2
        gain = (t - (1.0 - t) * self.sigma0 ** 2) / s2
        offset = -gain * (1.0 - t) * self.mu - self.mu
        return gain, offset


class TabulatedAffineVelocity(VelocityField):
    """Affine velocity v = gain(t) * z + offset(t) interpolated from tables.

    Gains are scalar per node; offsets are scalar or per-component.
    Evaluation clamps t to the tabulated range.  The node layout matches
    what :meth:`save` writes and :meth:`from_npz` reads.
    """

    def __init__(self, t_nodes, gains, offsets):
        t = np.asarray(t_nodes, dtype=np.float64)
        g = np.asarray(gains, dtype=np.float64)
        b = np.asarray(offsets, dtype=np.float64)
        if t.ndim != 1 or t.size < 2 or not (np.diff(t) > 0).all():
            raise ValueError("t_nodes must be strictly increasing with >= 2 entries")
        if g.shape != t.shape:
            raise ValueError(f"gains shape {g.shape} does not match nodes {t.shape}")
        if b.ndim not in (1, 2) or b.shape[0] != t.size:
            raise ValueError(f"offsets must be (K,) or (K, L), got {b.shape}")
        if not (np.isfinite(g).all() and np.isfinite(b).all()):
            raise ValueError("gains and offsets must be finite")
        self.t_nodes = t
        self.gains = g
        self.offsets = b

    def evaluate(self, z, t):
        z = np.asarray(z, dtype=np.float64)
        t = float(np.clip(t, self.t_nodes[0], self.t_nodes[-1]))
        gain = float(np.interp(t, self.t_nodes, self.gains))
        if self.offsets.ndim == 1:
            offset = np.interp(t, self.t_nodes, self.offsets)
        else:
            k = min(int(np.searchsorted(self.t_nodes, t, side="right")) - 1,
                    self.t_nodes.size - 2)
            t0, t1 = self.t_nodes[k], self.t_nodes[k + 1]
            w = (t - t0) / (t1 - t0)
            offset = (1.0 - w) * self.offsets[k] + w * self.offsets[k + 1]
        return gain * z + offset

    def save(self, path):
        np.savez(path, t_nodes=self.t_nodes, gains=self.gains, offsets=self.offsets)

    @classmethod
    def from_npz(cls, path) -> "TabulatedAffineVelocity":
        with np.load(path) as data:
            return cls(data["t_nodes"], data["gains"], data["offsets"])


def endpoint_estimates(state: FlowState, v: np.ndarray):
    """Linear-flow endpoint estimates (z0_hat, z1_hat) from one velocity.

    z0_hat = z - t v and z1_hat = z + (1-t) v, so the reconstruction
    identity (1-t) z0_hat + t z1_hat = z holds exactly.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != state.z.shape:
        raise ValueError(f"velocity shape {v.shape} does not match z {state.z.shape}")
    z0_hat = state.z - state.t * v
    z1_hat = state.z + (1.0 - state.t) * v
    return z0_hat, z1_hat


def integrate_flow(velocity: VelocityField, z_start, t_start: float, t_end: float,
                   n_steps: int) -> np.ndarray:
    """Explicit Euler integration of dz/dt = v(z, t) in uniform steps.

    Works on a single latent vector or a batch with leading axes.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    t_start, t_end = float(t_start), float(t_end)
    if not (np.isfinite(t_start) and np.isfinite(t_end)):
        raise ValueError("t_start and t_end must be finite")
    z = np.array(z_start, dtype=np.float64)
    dt = (t_end - t_start) / n_steps
    for k in range(n_steps):
        t = t_start + k * dt
        z = z + dt * velocity.evaluate(z, t)
    return z
