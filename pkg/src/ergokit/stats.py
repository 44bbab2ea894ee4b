"""Small statistics helpers: estimates with errors, batch means, z-scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METHODS = ("mcmc", "quadrature", "exact", "time_average", "ensemble")


@dataclass(frozen=True)
class EstimateWithError:
    mean: float
    stderr: float
    n_effective: float
    method: str

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError(f"stderr must be non-negative, got {self.stderr}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")

    def z(self, value, other_stderr=0.0):
        """Distance to ``value`` in units of the combined standard error."""
        sigma = np.hypot(self.stderr, other_stderr)
        diff = abs(self.mean - value)
        if sigma == 0.0:
            return 0.0 if diff == 0.0 else np.inf
        return diff / sigma

    def agrees_with(self, other, n_sigma=3.0):
        if isinstance(other, EstimateWithError):
            return self.z(other.mean, other.stderr) <= n_sigma
        return self.z(float(other)) <= n_sigma


def batch_means(x, n_batches=20):
    """Mean and batch-means standard error of a correlated series.

    Returns ``(mean, stderr, n_effective)``. Trailing samples that do not
    fill a whole batch are dropped from the error estimate only.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 2 * n_batches:
        n_batches = max(2, n // 2)
    size = n // n_batches
    means = x[: size * n_batches].reshape(n_batches, size, *x.shape[1:]).mean(axis=1)
    mean = x.mean(axis=0)
    stderr = means.std(axis=0, ddof=1) / np.sqrt(n_batches)
    var = x.var(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        n_eff = np.where(stderr > 0, var / stderr**2, n)
    return mean, stderr, n_eff


def ensemble_estimate(values, method="ensemble"):
    """Estimate from independent replicas (one value per replica)."""
    values = np.asarray(values, dtype=float)
    n = values.size
    return EstimateWithError(
        mean=float(values.mean()),
        stderr=float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
        n_effective=float(n),
        method=method,
    )


def series_estimate(x, method="mcmc", n_batches=20):
    mean, stderr, n_eff = batch_means(x, n_batches)
    return EstimateWithError(float(mean), float(stderr), float(n_eff), method)


def loglog_slope(x, y):
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
