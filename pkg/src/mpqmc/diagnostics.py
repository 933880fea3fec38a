"""Estimator-quality metrics over replicated runs.

Vector-valued estimates are summarised by summing the per-component
quantities, so ``mse`` is E||estimate - reference||^2 and so on.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .driving import POLYNOMIAL_FAMILIES, make_driving, period_register
from .errors import ConfigError, NonPositiveMetric, NoReference, TooFewSamples, WrongMode
from .proposals import uniforms_per_iteration
from .samplers import RunOutput, SamplerConfig, config_hash, run_sampler


@dataclass
class ReplicateSet:
    """Estimates of R replicates at sample sizes ``grid``.

    ``estimates`` has shape (R, len(grid), p).  Replicates differ only in
    their seed (or CUD polynomial and offset); ``seeds`` records which.
    """

    grid: np.ndarray
    estimates: np.ndarray
    reference: np.ndarray | None = None
    seeds: list | None = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid)
        est = np.asarray(self.estimates, dtype=float)
        if est.ndim == 2:
            est = est[:, :, None]
        if est.ndim != 3 or est.shape[1] != self.grid.size:
            raise ValueError("estimates must have shape (R, len(grid), p)")
        self.estimates = est
        if self.reference is not None:
            self.reference = np.atleast_1d(np.asarray(self.reference, dtype=float))

    @property
    def R(self) -> int:
        return self.estimates.shape[0]

    def at(self, n) -> np.ndarray:
        hits = np.flatnonzero(self.grid == n)
        if hits.size == 0:
            raise KeyError(f"sample size {n} is not on the grid")
        return self.estimates[:, hits[0], :]


def _need_replicates(rs: ReplicateSet):
    if rs.R < 2:
        raise TooFewSamples("need at least two replicates")


def _need_reference(rs: ReplicateSet):
    if rs.reference is None:
        raise NoReference("no reference mean to measure bias against")


def empirical_variance(rs: ReplicateSet, n) -> float:
    _need_replicates(rs)
    return float(np.var(rs.at(n), axis=0, ddof=1).sum())


def squared_bias(rs: ReplicateSet, n) -> float:
    _need_replicates(rs)
    _need_reference(rs)
    return float(np.sum((rs.at(n).mean(axis=0) - rs.reference) ** 2))


def mse(rs: ReplicateSet, n) -> float:
    """Unbiased variance plus squared bias."""
    return empirical_variance(rs, n) + squared_bias(rs, n)


def mean_squared_deviation(rs: ReplicateSet, n) -> float:
    """Plain average of ||estimate - reference||^2; equals
    (R-1)/R * variance + bias^2."""
    _need_reference(rs)
    return float(np.mean(np.sum((rs.at(n) - rs.reference) ** 2, axis=1)))


def metric_stderr(rs: ReplicateSet, n, metric: str) -> float:
    """Rough standard error of a metric across replicates (Gaussian formulas)."""
    est = rs.at(n)
    R = rs.R
    if metric == "variance":
        return empirical_variance(rs, n) * np.sqrt(2.0 / (R - 1))
    if metric == "bias2":
        bias = est.mean(axis=0) - rs.reference
        se_mean = est.std(axis=0, ddof=1) / np.sqrt(R)
        return float(np.sqrt(np.sum((2.0 * bias * se_mean) ** 2)))
    if metric in ("mse", "msd"):
        sq = np.sum((est - rs.reference) ** 2, axis=1)
        return float(sq.std(ddof=1) / np.sqrt(R))
    raise ValueError(f"unknown metric {metric!r}")


@dataclass(frozen=True)
class RateFit:
    slope: float
    stderr: float
    intercept: float


def fit_rate(points) -> RateFit:
    """Least-squares slope of log(metric) against log(n)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three (n, metric) pairs")
    n, metric = pts[:, 0], pts[:, 1]
    if np.unique(n).size < 3:
        raise ValueError("need at least three distinct sample sizes")
    if np.any(metric <= 0) or np.any(n <= 0):
        raise NonPositiveMetric("log-log fit needs positive sample sizes and metrics")
    x, y = np.log(n), np.log(metric)
    xc = x - x.mean()
    sxx = xc @ xc
    slope = (xc @ (y - y.mean())) / sxx
    intercept = y.mean() - slope * x.mean()
    resid = y - intercept - slope * x
    dof = x.size - 2
    stderr = np.sqrt((resid @ resid) / dof / sxx) if dof > 0 else np.nan
    return RateFit(float(slope), float(stderr), float(intercept))


def _sampling_view(run) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(run, RunOutput):
        if run.mode != "sampling":
            raise WrongMode("acceptance rate and jumping distance need a sampling-mode run")
        return run.samples, run.fresh
    return np.asarray(run, dtype=float), None


def acceptance_rate(run) -> float:
    """Fraction of index draws that picked a freshly proposed state.

    Accepts a :class:`RunOutput` or a boolean array of fresh-draw flags.
    """
    if isinstance(run, RunOutput):
        _, fresh = _sampling_view(run)
    else:
        fresh = np.asarray(run, dtype=bool)
    if fresh.size < 2:
        raise TooFewSamples("need at least two samples")
    return float(fresh.mean())


def msjd(run) -> float:
    """Mean squared jump between consecutive samples (a run or an array)."""
    X, _ = _sampling_view(run)
    X = X.reshape(len(X), -1)
    if len(X) < 2:
        raise TooFewSamples("need at least two samples")
    steps = np.diff(X, axis=0)
    return float(np.mean(np.sum(steps * steps, axis=1)))


def asymptotic_variance_batch_means(run, batch_count: int = 20):
    """Batch-means estimate of the variance in the central limit theorem of
    the sample mean, n * Var(mean) as n grows.

    This estimates the aggregate (lag-0 plus twice the summed autocovariance)
    rather than its individual terms.  Returns a float for scalar chains and
    one value per component otherwise.
    """
    X, _ = _sampling_view(run)
    X = X.reshape(len(X), -1)
    n = X.shape[0]
    if batch_count < 2 or n < 10 * batch_count:
        raise TooFewSamples(f"need at least {10 * batch_count} samples for {batch_count} batches")
    size = n // batch_count
    means = X[: size * batch_count].reshape(batch_count, size, -1).mean(axis=1)
    out = size * np.var(means, axis=0, ddof=1)
    return float(out[0]) if out.size == 1 else out


def estimate_at(run: RunOutput, iterations) -> np.ndarray:
    """Running estimate after each requested iteration count (1-based)."""
    mu = np.asarray(run.diagnostics["mu"])
    return mu[np.asarray(iterations) - 1]


def replicate_set(runs, iterations, reference=None, seeds=None) -> ReplicateSet:
    est = np.stack([estimate_at(r, iterations) for r in runs])
    return ReplicateSet(np.asarray(iterations), est, reference, seeds)


def _fingerprint(target) -> str:
    h = hashlib.sha256(json.dumps(target.describe(), sort_keys=True, default=str).encode())
    for key in sorted(vars(target)):
        val = getattr(target, key)
        if isinstance(val, np.ndarray):
            h.update(key.encode())
            h.update(np.ascontiguousarray(val).tobytes())
    return h.hexdigest()[:16]


@dataclass
class GoldStandard:
    mean: np.ndarray
    stderr: np.ndarray
    key: str
    replicates: int


def gold_standard_mean(target, kernel, f=None, budget: int = 1 << 18, N: int = 255,
                       replicates: int = 10, seed: int = 0, x0=None,
                       largest_experiment: int | None = None,
                       cache_dir=None) -> GoldStandard:
    """High-budget IS-MP-QMCMC mean, averaged over CUD replicates.

    ``budget`` counts weighted points per replicate.  The register is the
    smallest whose period covers one replicate.  Replicate r drives the
    sampler with feedback polynomial ``r`` of the register family, offset by
    ``seed + r``; registers without a family use offsets alone.  With ``cache_dir`` the result is
    stored under its configuration hash and reused.
    """
    if replicates < 10:
        raise ConfigError("a gold standard needs at least 10 replicates")
    if largest_experiment is not None and budget < 10 * largest_experiment:
        raise ConfigError("gold-standard budget must be at least 10x the largest experiment")
    L = max(1, budget // (N + 1))
    width = uniforms_per_iteration(kernel, N, 1)
    m = period_register(width, L)
    config = SamplerConfig(N=N, L=L, mode="importance")
    x0 = getattr(kernel, "mean", np.zeros(kernel.dim)) if x0 is None else x0
    key = config_hash(config.as_dict(), kernel.describe(), _fingerprint(target),
                      {"m": m, "replicates": replicates, "seed": seed,
                       "x0": np.asarray(x0, dtype=float).tolist(),
                       "f": getattr(f, "__name__", None)})
    path = Path(cache_dir) / f"gold_{key}.json" if cache_dir is not None else None
    if path is not None and path.exists():
        blob = json.loads(path.read_text())
        return GoldStandard(np.array(blob["mean"]), np.array(blob["stderr"]), key, blob["replicates"])
    ests = []
    for r in range(replicates):
        variant = r if r < len(POLYNOMIAL_FAMILIES.get(m, ())) else 0
        stream = make_driving("cud_lfsr", seed + r, m=m, width=width, variant=variant)
        ests.append(run_sampler(config, target, kernel, stream, x0, f).estimate.mu)
    ests = np.array(ests)
    out = GoldStandard(ests.mean(axis=0), ests.std(axis=0, ddof=1) / np.sqrt(replicates),
                       key, replicates)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"mean": out.mean.tolist(), "stderr": out.stderr.tolist(),
                                    "replicates": replicates, "key": key}, indent=1))
    return out
