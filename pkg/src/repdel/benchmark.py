"""Threshold benchmark: f(tau), the best fixed threshold, regret and gaps."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .core import InvalidParameter, SetKind
from .instances import InstanceModel

DEFAULT_GRID = 2000
DEFAULT_SAMPLES = 100_000
DEFAULT_SEED = 20240601
MC_BATCH = 50_000

_cache: dict = {}


@dataclass
class BenchmarkResult:
    tau_star: float
    opt_per_round: float
    taus: np.ndarray
    f_values: np.ndarray
    stderr: np.ndarray
    estimator: str  # "exact" | "analytic" | "monte-carlo"
    n_samples: int = 0
    seed: Optional[int] = None
    extra: dict = field(default_factory=dict)

    @property
    def f_curve(self):
        return list(zip(self.taus.tolist(), self.f_values.tolist()))

    def to_dict(self) -> dict:
        return {"tau_star": self.tau_star, "opt_per_round": self.opt_per_round, "estimator": self.estimator,
                "n_samples": self.n_samples, "seed": self.seed, "grid_points": int(len(self.taus))}


def _mc_curve(instance: InstanceModel, taus: np.ndarray, n_samples: int, seed):
    """Sum and sum of squares of the best-response utility at each tau (inclusive sets)."""
    rng = np.random.default_rng(seed)
    order = np.argsort(taus, kind="stable")
    sorted_taus = taus[order]
    tot = np.zeros(len(taus))
    tot2 = np.zeros(len(taus))
    left = n_samples
    while left > 0:
        n = min(MC_BATCH, left)
        X, Y = instance.sample_block(rng, n)
        s, s2 = kernels.threshold_curve(X, Y, sorted_taus)
        tot += s
        tot2 += s2
        left -= n
    sums = np.empty_like(tot)
    sq = np.empty_like(tot2)
    sums[order] = tot
    sq[order] = tot2
    return sums, sq


def _mean_stderr(sums, sq, n):
    mean = sums / n
    var = np.maximum(sq / n - mean * mean, 0.0)
    se = np.sqrt(var / max(n - 1, 1))
    return mean, se


def f_tau_stats(instance: InstanceModel, tau: float, inclusive: bool = True,
                n_samples: int = DEFAULT_SAMPLES, seed=DEFAULT_SEED) -> tuple[float, float]:
    """(estimate, standard error) of the best-response principal utility at threshold tau."""
    kind = int(SetKind.INCLUSIVE if inclusive else SetKind.STRICT)
    if instance.is_deterministic:
        if instance.K == 0:
            return 0.0, 0.0
        b = kernels.best_response(instance.xs, instance.ys, kind, float(tau))
        return (float(instance.xs[b]) if b >= 0 else 0.0), 0.0
    if n_samples < 1:
        raise InvalidParameter("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    tot = tot2 = 0.0
    left = n_samples
    while left > 0:
        n = min(MC_BATCH, left)
        X, Y = instance.sample_block(rng, n)
        u = kernels.threshold_utilities(X, Y, kind, float(tau))
        tot += float(u.sum())
        tot2 += float((u * u).sum())
        left -= n
    mean = tot / n_samples
    var = max(tot2 / n_samples - mean * mean, 0.0)
    return mean, math.sqrt(var / max(n_samples - 1, 1))


def f_tau(instance: InstanceModel, tau: float, inclusive: bool = True,
          n_samples: int = DEFAULT_SAMPLES, seed=DEFAULT_SEED) -> float:
    """Expected principal utility of the myopic best response to the threshold set at tau.

    Exact on deterministic instances; Monte Carlo mean otherwise.
    """
    return f_tau_stats(instance, tau, inclusive, n_samples, seed)[0]


def _argmax(values: np.ndarray, taus: np.ndarray, highest: bool = False) -> int:
    best = np.max(values)
    idx = np.flatnonzero(values == best)
    return int(idx[np.argmax(taus[idx])] if highest else idx[np.argmin(taus[idx])])


def opt_threshold(instance: InstanceModel, grid_size: int = DEFAULT_GRID, n_samples: int = DEFAULT_SAMPLES,
                  seed=DEFAULT_SEED, estimator: str = "auto") -> BenchmarkResult:
    """Best inclusive threshold on the grid {j/grid_size}.

    ``estimator``: "auto" (exact for deterministic instances, analytic when
    the sampler has a closed-form curve, Monte Carlo otherwise), "exact",
    "analytic" or "monte-carlo".  Deterministic instances also evaluate
    every distinct X, so their optimum is max X exactly, and ties go to the
    highest tau (tau_star = max X).  Elsewhere ties go to the lowest tau.
    For the analytic estimator the closed-form maximiser is added to the grid.
    """
    if grid_size < 2:
        raise InvalidParameter("grid_size must be at least 2")
    taus = np.arange(grid_size + 1, dtype=np.float64) / grid_size
    if estimator == "auto":
        if instance.is_deterministic:
            estimator = "exact"
        elif instance.has_curve:
            estimator = "analytic"
        else:
            estimator = "monte-carlo"
    if estimator == "exact":
        if not instance.is_deterministic:
            raise InvalidParameter("exact benchmark needs a deterministic instance")
        taus = np.unique(np.concatenate([taus, instance.xs]))
        xs, ys = instance.xs, instance.ys
        vals = np.zeros(len(taus))
        if instance.K:
            for j, tau in enumerate(taus.tolist()):
                b = kernels.best_response(xs, ys, 0, tau)
                if b >= 0:
                    vals[j] = xs[b]
        se = np.zeros(len(taus))
        n = 0
        seed = None
    elif estimator == "analytic":
        ts, fs = instance.curve_argmax()
        taus = np.unique(np.concatenate([taus, [ts]]))
        vals = np.asarray(instance.curve(taus), dtype=np.float64)
        se = np.zeros(len(taus))
        n = 0
        seed = None
    elif estimator == "monte-carlo":
        if instance.is_deterministic:
            raise InvalidParameter("use the exact estimator on deterministic instances")
        sums, sq = _mc_curve(instance, taus, n_samples, seed)
        vals, se = _mean_stderr(sums, sq, n_samples)
        n = n_samples
    else:
        raise InvalidParameter(f"unknown estimator {estimator!r}")
    # on deterministic instances every tau up to max X can tie; report max X itself
    i = _argmax(vals, taus, highest=estimator == "exact")
    return BenchmarkResult(float(taus[i]), float(vals[i]), taus, vals, se, estimator, n, seed)


def cached_opt(instance: InstanceModel, grid_size: int = DEFAULT_GRID, n_samples: int = DEFAULT_SAMPLES,
               seed=DEFAULT_SEED, estimator: str = "auto") -> BenchmarkResult:
    key = (instance.key(), grid_size, n_samples, seed, estimator)
    hit = _cache.get(key)
    if hit is None:
        hit = opt_threshold(instance, grid_size, n_samples, seed, estimator)
        _cache[key] = hit
    return hit


def stackelberg_regret(history, opt_per_round: float) -> float:
    """T * opt - total principal utility.  ``history`` is a History or an array of utilities."""
    u = getattr(history, "principal_utilities", history)
    u = np.asarray(u, dtype=np.float64)
    return len(u) * opt_per_round - float(u.sum())


def regret_trace(utilities, opt_per_round: float) -> np.ndarray:
    """Cumulative regret after each round."""
    u = np.asarray(utilities, dtype=np.float64)
    return np.arange(1, len(u) + 1) * opt_per_round - np.cumsum(u)


def gaps(means: Sequence[float]) -> list[float]:
    """max_j means_j - means_i for every i."""
    if len(means) == 0:
        raise InvalidParameter("means must be non-empty")
    m = max(means)
    return [m - v for v in means]


def write_f_curve_csv(result: BenchmarkResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "f_estimate", "stderr", "n_samples"])
        for t, f, s in zip(result.taus.tolist(), result.f_values.tolist(), result.stderr.tolist()):
            w.writerow([repr(t), repr(f), repr(s), result.n_samples])
