"""Balancing methods: random over/undersampling, SMOTE and NearMiss-1.

Every method takes a target imbalance ratio ``r >= 1``.  Oversamplers grow
the minority class to ``round(majority / r)`` rows; undersamplers shrink the
majority class to ``round(minority * r)`` rows.  Row order is preserved and
synthetic or duplicated rows are appended after the originals.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset, imbalance_ratio, round_half_up
from .errors import MinorityTooSmall

METHODS = ("random_oversample", "smote", "random_undersample", "near_miss")
RATIO_GRID = (1.0, 1.05, 1.10, 1.15, 1.20, 1.25)
DEFAULT_K = {"smote": 5, "near_miss": 3}

_CHUNK_ELEMENTS = 1 << 22


class AlreadyBalancedBelowTarget(UserWarning):
    """The data is already less imbalanced than the requested ratio; input returned unchanged."""


@dataclass(frozen=True)
class ResampleSpec:
    method: str = "none"
    target_ratio: float = 1.0
    k_neighbors: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("none", *METHODS):
            raise ValueError(f"unknown balancing method {self.method!r}")
        if not self.target_ratio >= 1:
            raise ValueError(f"target_ratio must be >= 1, got {self.target_ratio}")
        if self.k_neighbors is not None and self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")

    @property
    def k(self) -> int:
        return self.k_neighbors if self.k_neighbors is not None else DEFAULT_K.get(self.method, 5)


def target_minority_count(majority_count: int, target_ratio: float) -> int:
    return round_half_up(majority_count / target_ratio)


def _below_target(d: Dataset, spec: ResampleSpec) -> bool:
    ratio = imbalance_ratio(d).ratio
    if ratio < spec.target_ratio - 1e-12:
        warnings.warn(
            f"{d.name}: imbalance ratio {ratio:.4f} is already below target {spec.target_ratio}",
            AlreadyBalancedBelowTarget,
            stacklevel=3,
        )
        return True
    return False


def _sq_distances(query: np.ndarray, ref: np.ndarray):
    """Yield (start, block) of exact squared Euclidean distances, chunked over query rows."""
    step = max(1, _CHUNK_ELEMENTS // max(1, ref.shape[0] * ref.shape[1]))
    for start in range(0, query.shape[0], step):
        diff = query[start:start + step, None, :] - ref[None, :, :]
        yield start, np.einsum("ijk,ijk->ij", diff, diff)


def nearest_neighbors(query: np.ndarray, ref: np.ndarray, k: int, exclude_self: bool = False):
    """Indices and distances of the ``k`` nearest ``ref`` rows for each query row.

    Ties are broken by ascending ``ref`` index.  With ``exclude_self`` the
    query is assumed to be ``ref`` and each row skips itself (by index, so
    exact duplicates still count as neighbours).
    """
    n = query.shape[0]
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k))
    for start, sq in _sq_distances(query, ref):
        if exclude_self:
            rows = np.arange(start, start + sq.shape[0])
            sq[np.arange(sq.shape[0]), rows] = np.inf
        order = np.argsort(sq, axis=1, kind="stable")[:, :k]
        idx[start:start + sq.shape[0]] = order
        dist[start:start + sq.shape[0]] = np.sqrt(np.take_along_axis(sq, order, axis=1))
    return idx, dist


def random_oversample(d: Dataset, spec: ResampleSpec) -> Dataset:
    if _below_target(d, spec):
        return d
    summary = imbalance_ratio(d)
    need = target_minority_count(summary.majority_count, spec.target_ratio) - summary.minority_count
    if need <= 0:
        return d
    minority = np.flatnonzero(d.labels == 1)
    rng = np.random.default_rng(spec.seed)
    picks = minority[rng.integers(0, len(minority), size=need)]
    return d.with_rows(
        np.vstack([d.features, d.features[picks]]),
        np.concatenate([d.labels, np.ones(need, dtype=np.int8)]),
    )


def smote(d: Dataset, spec: ResampleSpec) -> Dataset:
    """SMOTE with cyclic seed points.

    Synthetic row ``t`` interpolates between minority row ``t mod m`` and a
    uniformly drawn member of its k nearest minority neighbours.
    """
    Xmin = d.features[d.labels == 1]
    m = Xmin.shape[0]
    if m < 2:
        raise MinorityTooSmall(f"{d.name}: SMOTE needs at least 2 minority rows, found {m}")
    if _below_target(d, spec):
        return d
    summary = imbalance_ratio(d)
    need = target_minority_count(summary.majority_count, spec.target_ratio) - m
    if need <= 0:
        return d
    k = min(spec.k, m - 1)
    neighbors, _ = nearest_neighbors(Xmin, Xmin, k, exclude_self=True)

    rng = np.random.default_rng(spec.seed)
    base = np.arange(need) % m
    partner = neighbors[base, rng.integers(0, k, size=need)]
    lam = rng.random(need)[:, None]
    a, b = Xmin[base], Xmin[partner]
    # clip guards against the interpolation rounding one ulp past an endpoint
    synthetic = np.clip(a + lam * (b - a), np.minimum(a, b), np.maximum(a, b))
    return d.with_rows(
        np.vstack([d.features, synthetic]),
        np.concatenate([d.labels, np.ones(need, dtype=np.int8)]),
    )


def random_undersample(d: Dataset, spec: ResampleSpec) -> Dataset:
    if _below_target(d, spec):
        return d
    summary = imbalance_ratio(d)
    keep = min(summary.majority_count, round_half_up(summary.minority_count * spec.target_ratio))
    majority = np.flatnonzero(d.labels == 0)
    rng = np.random.default_rng(spec.seed)
    kept = rng.choice(majority, size=keep, replace=False)
    rows = np.sort(np.concatenate([kept, np.flatnonzero(d.labels == 1)]))
    return d.subset(rows)


def near_miss(d: Dataset, spec: ResampleSpec) -> Dataset:
    """NearMiss-1: keep the majority rows closest on average to their k nearest minority rows."""
    minority = np.flatnonzero(d.labels == 1)
    k = spec.k
    if len(minority) < k:
        raise MinorityTooSmall(
            f"{d.name}: NearMiss with k={k} needs at least {k} minority rows, found {len(minority)}"
        )
    if _below_target(d, spec):
        return d
    majority = np.flatnonzero(d.labels == 0)
    keep = min(len(majority), round_half_up(len(minority) * spec.target_ratio))
    _, dist = nearest_neighbors(d.features[majority], d.features[minority], k)
    order = np.argsort(dist.mean(axis=1), kind="stable")
    rows = np.sort(np.concatenate([majority[order[:keep]], minority]))
    return d.subset(rows)


_DISPATCH = {
    "random_oversample": random_oversample,
    "smote": smote,
    "random_undersample": random_undersample,
    "near_miss": near_miss,
}


def resample(d: Dataset, spec: ResampleSpec) -> Dataset:
    if spec.method == "none":
        return d
    return _DISPATCH[spec.method](d, spec)
