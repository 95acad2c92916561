"""Sample statistics used by the harness: KS distances and bootstrap intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import kolmogorov

__all__ = ["KSResult", "BootstrapCI", "ks_two_sample", "ks_one_sample", "bootstrap_ci", "empirical_mgf"]

BOOTSTRAP_METHOD = "percentile bootstrap"


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float
    n: int
    m: int | None = None

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "n": self.n, "m": self.m,
                "method": "asymptotic Kolmogorov distribution"}


@dataclass(frozen=True)
class BootstrapCI:
    estimate: float
    low: float
    high: float
    level: float
    n_boot: int
    seed: int
    std_error: float

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "low": self.low, "high": self.high, "level": self.level,
                "std_error": self.std_error, "method": BOOTSTRAP_METHOD, "B": self.n_boot, "seed": self.seed}


def ks_two_sample(x, y) -> KSResult:
    """Two-sample KS distance with the asymptotic p-value at ``sqrt(nm/(n+m)) D``."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    n, m = x.size, y.size
    if n == 0 or m == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, pooled, side="right") / n
    cdf_y = np.searchsorted(y, pooled, side="right") / m
    d = float(np.max(np.abs(cdf_x - cdf_y)))
    return KSResult(d, float(kolmogorov(math.sqrt(n * m / (n + m)) * d)), n, m)


def ks_one_sample(cdf, x) -> KSResult:
    """KS distance between ``cdf`` and the empirical CDF of ``x``."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    d = float(max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n)))
    return KSResult(d, float(kolmogorov(math.sqrt(n) * d)), n)


def bootstrap_ci(values, statistic=np.mean, level: float = 0.99, n_boot: int = 1000, seed: int = 0) -> BootstrapCI:
    """Percentile bootstrap interval for ``statistic`` of ``values``."""
    values = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    reps = np.empty(n_boot)
    for b in range(n_boot):
        reps[b] = statistic(values[rng.integers(0, values.size, values.size)])
    alpha = 0.5 * (1.0 - level)
    low, high = np.quantile(reps, [alpha, 1.0 - alpha])
    return BootstrapCI(float(statistic(values)), float(low), float(high), level, n_boot, seed, float(reps.std(ddof=1)))


def empirical_mgf(samples, lam: float, level: float = 0.99, n_boot: int = 1000, seed: int = 0) -> BootstrapCI:
    """Bootstrap interval for ``E[exp(lam T)]`` from samples of T."""
    return bootstrap_ci(np.exp(lam * np.asarray(samples, dtype=float)), level=level, n_boot=n_boot, seed=seed)
