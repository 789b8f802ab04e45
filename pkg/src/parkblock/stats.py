"""Goodness-of-fit tests and small estimators used by the experiment suites."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special
from scipy.stats import rankdata

MIN_SAMPLES = 8


class TooFewSamples(ValueError):
    pass


class DegenerateBinning(ValueError):
    pass


@dataclass
class GofReport:
    name: str
    statistic: float
    p_value: float
    n: int
    significance: float = 0.01
    dof: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.p_value > self.significance)

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "statistic": float(self.statistic),
            "p_value": float(self.p_value),
            "n": int(self.n),
            "significance": self.significance,
            "pass": self.passed,
        }
        if self.dof is not None:
            d["dof"] = int(self.dof)
        if self.extra:
            d["extra"] = self.extra
        return d


def kolmogorov_sf(lam: float, tol: float = 1e-12) -> float:
    """``P(K > lam) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lam^2)`` for the Kolmogorov law."""
    if lam <= 0:
        return 1.0
    if lam < 0.2:
        # the alternating series needs many terms here and its value is 1 to 1e-20
        return 1.0
    total = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(max(2.0 * total, 0.0), 1.0)


def ks_statistic(samples, cdf: Callable) -> float:
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_test(samples, cdf: Callable, significance: float = 0.01, name: str = "ks") -> GofReport:
    """Two-sided one-sample KS test with the asymptotic Kolmogorov p-value."""
    x = np.asarray(samples, dtype=float)
    if x.size < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    D = ks_statistic(x, cdf)
    p = kolmogorov_sf(math.sqrt(x.size) * D)
    return GofReport(name, D, p, x.size, significance)


def pool_cells(expected: np.ndarray, min_expected: float = 5.0) -> list[list[int]]:
    """Group consecutive cells so each group has expected count ``>= min_expected``.

    Groups are grown left to right; a short last group joins its neighbour.
    """
    groups: list[list[int]] = []
    cur: list[int] = []
    acc = 0.0
    for i, e in enumerate(expected):
        cur.append(i)
        acc += e
        if acc >= min_expected:
            groups.append(cur)
            cur, acc = [], 0.0
    if cur:
        if groups:
            groups[-1].extend(cur)
        else:
            groups.append(cur)
    return groups


def chi_square_pmf_test(
    counts,
    pmf,
    n: int | None = None,
    significance: float = 0.01,
    min_expected: float = 5.0,
    name: str = "chi2",
) -> GofReport:
    """Pearson test of a histogram against cell probabilities.

    ``pmf`` is an array of cell probabilities or a callable evaluated at the
    cell indices; the cells must exhaust the support (put the tail in the
    last cell). Cells are pooled until every expected count is at least
    ``min_expected``.
    """
    counts = np.asarray(counts, dtype=float)
    n = int(counts.sum()) if n is None else int(n)
    probs = np.asarray(pmf(np.arange(counts.size)) if callable(pmf) else pmf, dtype=float)
    if probs.shape != counts.shape:
        raise ValueError("counts and cell probabilities differ in shape")
    if abs(probs.sum() - 1.0) > 1e-6:
        raise ValueError(f"cell probabilities sum to {probs.sum()}, not 1")
    if n < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {n}")
    groups = pool_cells(n * probs, min_expected)
    if len(groups) < 2:
        raise DegenerateBinning("fewer than two cells after pooling")
    obs = np.array([counts[g].sum() for g in groups])
    exp = np.array([n * probs[g].sum() for g in groups])
    if np.any(exp <= 0):
        raise DegenerateBinning("a pooled cell has zero expected count")
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = len(groups) - 1
    p = float(special.gammaincc(dof / 2.0, stat / 2.0))
    return GofReport(name, stat, p, n, significance, dof=dof)


def mean_ci(samples, level: float = 0.99) -> tuple[float, float]:
    """Sample mean and the half-width of its normal-approximation interval."""
    x = np.asarray(samples, dtype=float)
    if x.size < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    z = math.sqrt(2.0) * special.erfinv(level)
    return float(x.mean()), float(z * x.std(ddof=1) / math.sqrt(x.size))


def rank_correlation(xs, ys) -> float:
    """Spearman correlation with midranks for ties."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise ValueError("xs and ys differ in length")
    if x.size < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    rx = rankdata(x) - (x.size + 1) / 2.0
    ry = rankdata(y) - (y.size + 1) / 2.0
    den = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if den == 0:
        return 0.0
    return float(np.clip((rx @ ry) / den, -1.0, 1.0))
