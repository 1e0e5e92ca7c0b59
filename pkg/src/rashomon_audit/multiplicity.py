"""Ambiguity, discrepancy and variable-importance-order discrepancy (VIOD).

All three compare each competing member of a Rashomon set against its
reference model.  A prediction matrix has one row per member with the
reference in row 0 and one column per evaluation sample.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset
from .errors import AllTied, LengthMismatch
from .learner import TrainedModel, loss, predict_class, predict_proba, auc
from .rashomon import ModelPool, RashomonSet

AGGREGATIONS = ("min", "max")


@dataclass(frozen=True)
class MultiplicityReport:
    ambiguity: float
    discrepancy: float
    viod: float
    set_size: int
    dataset: str = ""
    method: str = "none"
    ratio: float | None = None
    seed: int = 0
    auc_reference: float = float("nan")
    viod_aggregation: str = "min"

    def to_dict(self) -> dict:
        return asdict(self)


def prediction_matrix(rs: RashomonSet, pool: ModelPool, X, threshold: float = 0.5) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-D matrix")
    ids = (rs.reference_id, *rs.competitors)
    return np.vstack([predict_class(pool.get(i), X, threshold) for i in ids])


def _conflicts(pm) -> np.ndarray:
    pm = np.asarray(pm)
    if pm.ndim != 2 or pm.shape[0] < 1:
        raise ValueError("prediction matrix needs at least one row")
    return pm[1:] != pm[0]


def ambiguity(pm) -> float:
    """Share of samples on which at least one competitor disagrees with the reference."""
    c = _conflicts(pm)
    if c.shape[0] == 0:
        return 0.0
    return np.count_nonzero(c.any(axis=0)) / c.shape[1]


def discrepancy(pm) -> float:
    """Largest share of samples on which a single competitor disagrees with the reference."""
    c = _conflicts(pm)
    if c.shape[0] == 0:
        return 0.0
    return int(np.count_nonzero(c, axis=1).max()) / c.shape[1]


def permutation_importance(m: TrainedModel, d: Dataset, repeats: int = 5, seed: int = 0) -> np.ndarray:
    """Mean loss increase when a single column is shuffled.

    The shuffle for (column j, repeat r) depends only on ``(seed, j, r)``, so
    every model in a set is probed with the same permutations.  Columns the
    model never splits on cannot change its predictions and score exactly 0.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    X = np.array(d.features, dtype=np.float64)
    base = loss(m, d)
    n, p = X.shape
    used = m.used_features()
    out = np.zeros(p)
    for j in range(p):
        if j not in used:
            continue
        original = X[:, j].copy()
        total = 0.0
        for r in range(repeats):
            perm = np.random.default_rng([seed, j, r]).permutation(n)
            X[:, j] = original[perm]
            total += (1.0 - auc(predict_proba(m, X), d.labels)) - base
        X[:, j] = original
        out[j] = total / repeats
    return out


def kendall_tau(a, b) -> float:
    """Kendall's tau-b, (C - D) / sqrt((n0 - n1)(n0 - n2))."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if len(a) != len(b):
        raise LengthMismatch(f"vectors differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise LengthMismatch("kendall_tau needs at least two observations")
    iu = np.triu_indices(n, 1)
    sa = np.sign(a[:, None] - a[None, :])[iu]
    sb = np.sign(b[:, None] - b[None, :])[iu]
    n0 = n * (n - 1) // 2
    n1 = int(np.count_nonzero(sa == 0))
    n2 = int(np.count_nonzero(sb == 0))
    denom = math.sqrt((n0 - n1) * (n0 - n2))
    if denom == 0:
        raise AllTied("tau-b is undefined when either vector is entirely tied")
    return float((sa * sb).sum() / denom)


def viod(
    rs: RashomonSet,
    pool: ModelPool,
    d: Dataset,
    repeats: int = 5,
    seed: int = 0,
    aggregation: str = "min",
) -> float:
    """Extremal tau-b between reference and competitor importance vectors.

    ``"min"`` reports the most dissimilar competitor; ``"max"`` the most
    similar one.  A set without competitors scores 1.
    """
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"aggregation must be one of {AGGREGATIONS}, got {aggregation!r}")
    if d.n_features < 2:
        raise ValueError("VIOD needs at least two features")
    if not rs.competitors:
        return 1.0
    ref = permutation_importance(pool.get(rs.reference_id), d, repeats, seed)
    taus = [
        kendall_tau(ref, permutation_importance(pool.get(i), d, repeats, seed))
        for i in rs.competitors
    ]
    return min(taus) if aggregation == "min" else max(taus)


def multiplicity_report(
    rs: RashomonSet,
    pool: ModelPool,
    d: Dataset,
    threshold: float = 0.5,
    repeats: int = 5,
    importance_seed: int = 0,
    aggregation: str = "min",
    **key,
) -> MultiplicityReport:
    """All metrics for one Rashomon set, evaluated on ``d``.

    ``key`` fills the identifying fields (dataset, method, ratio, seed).
    """
    pm = prediction_matrix(rs, pool, d.features, threshold)
    ref_auc = auc(predict_proba(pool.get(rs.reference_id), d.features), d.labels)
    return MultiplicityReport(
        ambiguity=ambiguity(pm),
        discrepancy=discrepancy(pm),
        viod=viod(rs, pool, d, repeats, importance_seed, aggregation),
        set_size=len(rs.member_ids),
        auc_reference=float(ref_auc),
        viod_aggregation=aggregation,
        **key,
    )
