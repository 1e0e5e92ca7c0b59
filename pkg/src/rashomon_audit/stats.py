"""Rank-based tests: Kruskal-Wallis, Friedman and Dunn's pairwise post-hoc.

All tests apply the usual tie corrections.  p-values come from the
chi-square and normal survival functions implemented here, so the module
only needs numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateGroups, IncompleteDesign

ADJUSTMENTS = ("none", "holm", "bonferroni")


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # keep pytest from collecting this class

    statistic: float
    df: int
    p_value: float
    method_name: str

    def describe(self) -> str:
        return f"{self.method_name}: χ²({self.df}) = {self.statistic:.4f}, p = {self.p_value:.4f}"


@dataclass(frozen=True, eq=False)
class DunnResult:
    labels: tuple[str, ...]
    z: np.ndarray
    p_raw: np.ndarray
    p_adjusted: np.ndarray
    adjustment: str

    def significant_pairs(self, alpha: float = 0.05) -> list[tuple[int, int, float]]:
        k = len(self.labels)
        return [
            (i, j, float(self.p_adjusted[i, j]))
            for i in range(k)
            for j in range(i + 1, k)
            if self.p_adjusted[i, j] < alpha
        ]


def rank_with_ties(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    a = np.asarray(values, dtype=np.float64).ravel()
    n = len(a)
    if n == 0:
        return np.empty(0)
    order = np.argsort(a, kind="mergesort")
    s = a[order]
    new_group = np.empty(n, dtype=bool)
    new_group[0] = True
    new_group[1:] = s[1:] != s[:-1]
    starts = np.flatnonzero(np.append(new_group, True))
    mean_rank = 0.5 * (starts[:-1] + starts[1:] + 1)
    ranks = np.empty(n)
    ranks[order] = mean_rank[np.cumsum(new_group) - 1]
    return ranks


def tie_sizes(values) -> np.ndarray:
    _, counts = np.unique(np.asarray(values, dtype=np.float64), return_counts=True)
    return counts.astype(np.float64)


def _gamma_series_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(100000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by modified Lentz continued fraction."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 100000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi_square_sf(x: float, df: int) -> float:
    """P(X > x) for X ~ chi-square(df), via Q(df/2, x/2)."""
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    a, h = df / 2.0, x / 2.0
    if h == 0:  # also catches subnormal x that underflows when halved
        return 1.0
    if h < a + 1.0:
        q = 1.0 - _gamma_series_lower(a, h)
    else:
        q = _gamma_cf_upper(a, h)
    return float(min(1.0, max(0.0, q)))


def normal_two_sided_p(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


def _as_groups(g) -> tuple[tuple[str, ...], list[np.ndarray]]:
    if isinstance(g, Mapping):
        labels = tuple(str(k) for k in g)
        arrays = [np.asarray(v, dtype=np.float64).ravel() for v in g.values()]
    else:
        arrays = [np.asarray(v, dtype=np.float64).ravel() for v in g]
        labels = tuple(f"g{i}" for i in range(len(arrays)))
    if len(arrays) < 2:
        raise ValueError("need at least two groups")
    if any(len(a) == 0 for a in arrays):
        raise ValueError("every group needs at least one value")
    if sum(len(a) for a in arrays) < 3:
        raise ValueError("need at least three values in total")
    return labels, arrays


def kruskal_wallis(groups: Mapping[str, Sequence[float]] | Sequence[Sequence[float]]) -> TestResult:
    _, arrays = _as_groups(groups)
    pooled = np.concatenate(arrays)
    N = len(pooled)
    ranks = rank_with_ties(pooled)
    t = tie_sizes(pooled)
    correction = 1.0 - (t**3 - t).sum() / (N**3 - N)
    if correction <= 0:
        raise DegenerateGroups("all values are identical")
    h = 0.0
    start = 0
    for a in arrays:
        r = ranks[start:start + len(a)]
        start += len(a)
        h += len(a) * (r.mean() - (N + 1) / 2.0) ** 2
    h = 12.0 * h / (N * (N + 1)) / correction
    df = len(arrays) - 1
    return TestResult(float(h), df, chi_square_sf(h, df), "Kruskal-Wallis")


def friedman(block_design) -> TestResult:
    """Friedman test; rows are blocks, columns are treatments."""
    b = np.asarray(block_design, dtype=np.float64)
    if b.ndim != 2 or b.shape[0] < 2 or b.shape[1] < 2:
        raise IncompleteDesign(f"need a blocks x treatments matrix of at least 2x2, got {b.shape}")
    if not np.isfinite(b).all():
        raise IncompleteDesign("block design has missing cells")
    n, k = b.shape
    ranks = np.vstack([rank_with_ties(row) for row in b])
    rank_sums = ranks.sum(axis=0)
    ties = sum(((t**3 - t).sum() for t in map(tie_sizes, b)), 0.0)
    correction = 1.0 - ties / (n * (k**3 - k))
    df = k - 1
    if correction <= 0:
        return TestResult(0.0, df, 1.0, "Friedman")
    stat = 12.0 * (rank_sums**2).sum() / (n * k * (k + 1)) - 3.0 * n * (k + 1)
    stat = max(0.0, stat / correction)
    return TestResult(float(stat), df, chi_square_sf(stat, df), "Friedman")


def adjust_p(p: Sequence[float], method: str = "holm") -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    m = len(p)
    if method == "none":
        return p.copy()
    if method == "bonferroni":
        return np.minimum(1.0, p * m)
    if method == "holm":
        order = np.argsort(p, kind="mergesort")
        stepped = np.minimum(1.0, (m - np.arange(m)) * p[order])
        out = np.empty(m)
        out[order] = np.maximum.accumulate(stepped)
        return out
    raise ValueError(f"adjustment must be one of {ADJUSTMENTS}, got {method!r}")


def dunn_pairwise(groups, adjustment: str = "holm") -> DunnResult:
    """Dunn's test on mean ranks of the pooled sample, with tie-corrected variance."""
    if adjustment not in ADJUSTMENTS:
        raise ValueError(f"adjustment must be one of {ADJUSTMENTS}, got {adjustment!r}")
    labels, arrays = _as_groups(groups)
    pooled = np.concatenate(arrays)
    N = len(pooled)
    ranks = rank_with_ties(pooled)
    t = tie_sizes(pooled)
    base = N * (N + 1) / 12.0 - (t**3 - t).sum() / (12.0 * (N - 1))
    if base <= 0:
        raise DegenerateGroups("all values are identical")
    sizes = np.array([len(a) for a in arrays], dtype=np.float64)
    bounds = np.cumsum(np.r_[0, sizes]).astype(int)
    mean_ranks = np.array([ranks[bounds[i]:bounds[i + 1]].mean() for i in range(len(arrays))])

    k = len(arrays)
    z = np.zeros((k, k))
    p_raw = np.ones((k, k))
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    for i, j in pairs:
        zij = (mean_ranks[i] - mean_ranks[j]) / math.sqrt(base * (1 / sizes[i] + 1 / sizes[j]))
        z[i, j], z[j, i] = zij, -zij
        p_raw[i, j] = p_raw[j, i] = normal_two_sided_p(zij)
    p_adj = np.ones((k, k))
    adjusted = adjust_p([p_raw[i, j] for i, j in pairs], adjustment)
    for (i, j), v in zip(pairs, adjusted):
        p_adj[i, j] = p_adj[j, i] = v
    return DunnResult(labels, z, p_raw, p_adj, adjustment)
