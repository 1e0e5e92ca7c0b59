"""CART decision trees and random forests, plus the AUC-based loss.

Model quality throughout the toolkit is ``loss = 1 - AUC`` on an evaluation
partition, so a lower loss is a better ranking of the positive class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .data import Dataset
from .errors import DataError, DimensionMismatch, SingleClass
from .stats import rank_with_ties

FAMILIES = ("tree", "forest")


@dataclass(frozen=True)
class Hyperparameters:
    family: str = "tree"
    max_depth: int = 5
    min_samples_leaf: int = 1
    n_trees: int = 1
    feature_fraction: float = 1.0
    bootstrap_seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.max_depth < 1 or self.min_samples_leaf < 1 or self.n_trees < 1:
            raise ValueError("max_depth, min_samples_leaf and n_trees must all be >= 1")
        if not 0 < self.feature_fraction <= 1:
            raise ValueError(f"feature_fraction must lie in (0, 1], got {self.feature_fraction}")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "n_trees": self.n_trees,
            "feature_fraction": self.feature_fraction,
            "bootstrap_seed": self.bootstrap_seed,
            "bootstrap": self.bootstrap,
        }


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat binary tree; ``feature < 0`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f >= 0}

    def to_dict(self, node: int = 0) -> dict:
        f = int(self.feature[node])
        out = {"leaf_fraction": float(self.value[node])}
        if f >= 0:
            out["feature"] = f
            out["threshold"] = float(self.threshold[node])
            out["left"] = self.to_dict(int(self.left[node]))
            out["right"] = self.to_dict(int(self.right[node]))
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        feature, threshold, left, right, value = [], [], [], [], []

        def visit(n):
            i = len(feature)
            feature.append(n.get("feature", -1))
            threshold.append(n.get("threshold", 0.0))
            left.append(-1)
            right.append(-1)
            value.append(n["leaf_fraction"])
            if feature[i] >= 0:
                left[i] = visit(n["left"])
                right[i] = visit(n["right"])
            return i

        visit(doc)
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value, dtype=np.float64),
        )


def _pack(trees) -> tuple[np.ndarray, ...]:
    offsets = np.cumsum([0] + [t.n_nodes for t in trees])
    feature = np.concatenate([t.feature for t in trees])
    threshold = np.concatenate([t.threshold for t in trees])
    left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(trees, offsets)])
    right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(trees, offsets)])
    value = np.concatenate([t.value for t in trees])
    return feature, threshold, left, right, value, offsets[:-1].astype(np.int64)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    id: int
    hp: Hyperparameters
    trees: tuple[Tree, ...]
    n_features: int
    holdout_loss: float | None = None
    degenerate: bool = False
    _packed: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_packed", _pack(self.trees))

    def used_features(self) -> set[int]:
        return set().union(*(t.used_features() for t in self.trees))

    def with_loss(self, loss: float) -> "TrainedModel":
        return replace(self, holdout_loss=float(loss))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "hyperparameters": self.hp.to_dict(),
            "n_features": self.n_features,
            "holdout_loss": self.holdout_loss,
            "degenerate": self.degenerate,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainedModel":
        return cls(
            id=int(doc["id"]),
            hp=Hyperparameters(**doc["hyperparameters"]),
            trees=tuple(Tree.from_dict(t) for t in doc["trees"]),
            n_features=int(doc["n_features"]),
            holdout_loss=doc.get("holdout_loss"),
            degenerate=bool(doc.get("degenerate", False)),
        )


def _grow(X, y, weights, order, hp: Hyperparameters, n_sub: int, seed: int) -> Tree:
    mask = weights[order[0]] > 0
    sub = np.ascontiguousarray(order[:, mask]) if not mask.all() else order.copy()
    arrays = _kernels.build_tree(X, y, weights, sub, hp.max_depth, hp.min_samples_leaf, n_sub, seed)
    return Tree(*(np.array(a) for a in arrays))


def fit(train: Dataset, hp: Hyperparameters, model_id: int = 0) -> TrainedModel:
    """Fit a tree (all rows, all features) or a bagged forest.

    Forest trees see a bootstrap sample (duplicates carried as weights) and
    draw ``ceil(feature_fraction * p)`` candidate features at every split.
    """
    X = np.ascontiguousarray(train.features, dtype=np.float64)
    y = train.labels.astype(np.float64)
    n, p = X.shape
    if n == 0:
        raise DataError("cannot fit on an empty dataset")
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)

    trees = []
    if hp.family == "tree":
        trees.append(_grow(X, y, np.ones(n), order, hp, p, 0))
    else:
        n_sub = min(p, max(1, math.ceil(hp.feature_fraction * p - 1e-12)))
        for t in range(hp.n_trees):
            rng = np.random.default_rng([hp.bootstrap_seed, t])
            if hp.bootstrap:
                weights = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
            else:
                weights = np.ones(n)
            seed = int(rng.integers(0, 2**63 - 1))
            trees.append(_grow(X, y, weights, order, hp, n_sub, seed))

    root_only = all(t.n_nodes == 1 for t in trees)
    degenerate = root_only and 0 < y.sum() < n
    return TrainedModel(id=model_id, hp=hp, trees=tuple(trees), n_features=p, degenerate=degenerate)


def predict_proba(m: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.n_features:
        raise DimensionMismatch(f"model expects {m.n_features} columns, got shape {X.shape}")
    return _kernels.predict_forest(np.ascontiguousarray(X), *m._packed)


def predict_class(m: TrainedModel, X, threshold: float = 0.5) -> np.ndarray:
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return (predict_proba(m, X) >= threshold).astype(np.int8)


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) with ties counted as one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise DimensionMismatch("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes present")
    ranks = rank_with_ties(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def loss(m: TrainedModel, d: Dataset) -> float:
    return 1.0 - auc(predict_proba(m, d.features), d.labels)
