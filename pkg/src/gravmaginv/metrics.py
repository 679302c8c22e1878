"""Benchmark error metrics: RMSE, baseline-relative improvement, rank labels.

Given per-observation RMSE tables for a baseline and several named
methods, the report carries, per method, the observation-wise
improvement over the baseline (positive means lower error), a
best/worst/mixed label per observation, and the fraction of
observations on which the method is best.

Rank rules, applied per observation over the method values only (the
baseline enters improvements, not ranks): ties at the minimum are all
"best"; remaining values at the maximum are "worst"; anything else is
"mixed".  With every method equal, all are "best".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_BEST = "best"
RANK_WORST = "worst"
RANK_MIXED = "mixed"


def rmse(pred, obs) -> float:
    """Root-mean-square difference of two equal-length field arrays."""
    p = np.asarray(pred, dtype=np.float64)
    o = np.asarray(obs, dtype=np.float64)
    if p.shape != o.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {o.shape}")
    if p.size == 0:
        raise ValueError("rmse of empty arrays is undefined")
    d = p.ravel() - o.ravel()
    return float(np.sqrt(np.mean(d * d)))


@dataclass(frozen=True)
class MetricsReport:
    """Per-method improvement arrays, rank labels, and win rates."""

    baseline: np.ndarray           # (n_obs,) per-observation baseline RMSE
    methods: dict                  # name -> (n_obs,) per-observation RMSE
    delta_rmse: dict               # name -> (n_obs,) baseline - method
    ranks: dict                    # name -> (n_obs,) labels best/worst/mixed
    win_rates: dict                # name -> fraction of observations ranked best

    @property
    def n_obs(self) -> int:
        return self.baseline.size

    @property
    def method_names(self) -> tuple:
        return tuple(sorted(self.methods))


def delta_rmse_and_ranks(baseline, methods: dict) -> MetricsReport:
    """Build a MetricsReport from a baseline table and named method tables.

    All tables must cover the same observations in the same order.
    """
    base = np.asarray(baseline, dtype=np.float64)
    if base.ndim != 1 or base.size == 0:
        raise ValueError(f"baseline must be a nonempty 1-D array, got shape {base.shape}")
    if not methods:
        raise ValueError("need at least one method table")
    tables = {}
    for name, vals in methods.items():
        v = np.asarray(vals, dtype=np.float64)
        if v.shape != base.shape:
            raise ValueError(
                f"method {name!r} covers {v.shape} observations, baseline {base.shape}"
            )
        tables[str(name)] = v

    names = list(tables)
    stacked = np.stack([tables[n] for n in names])      # (n_methods, n_obs)
    mins = stacked.min(axis=0)
    maxs = stacked.max(axis=0)

    delta = {n: base - tables[n] for n in names}
    ranks = {}
    win = {}
    for i, n in enumerate(names):
        v = stacked[i]
        labels = np.where(v == mins, RANK_BEST,
                          np.where(v == maxs, RANK_WORST, RANK_MIXED))
        ranks[n] = labels
        win[n] = float(np.mean(labels == RANK_BEST))
    return MetricsReport(base.copy(), tables, delta, ranks, win)
