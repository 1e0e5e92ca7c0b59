"""Model pools from seeded random hyperparameter search, and their Rashomon sets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import DimensionMismatch, EmptyPool, EmptySpace
from .learner import FAMILIES, Hyperparameters, TrainedModel, fit, loss
from .seeds import derive_seed

DEFAULT_BUDGET = 15  # 5 optimisation rounds + 10 trained models
DEFAULT_EPSILON = 0.05


@dataclass(frozen=True)
class HyperparameterSpace:
    family_weights: dict = field(default_factory=lambda: {"tree": 0.5, "forest": 0.5})
    max_depth: tuple[int, int] = (2, 12)
    min_samples_leaf: tuple[int, int] = (1, 20)
    n_trees: tuple[int, int] = (20, 100)
    feature_fraction: tuple[float, float] = (0.4, 1.0)

    def __post_init__(self):
        weights = self.family_weights
        if not weights or set(weights) - set(FAMILIES):
            raise EmptySpace(f"family_weights must be a non-empty mapping over {FAMILIES}")
        if any(w < 0 for w in weights.values()) or abs(sum(weights.values()) - 1) > 1e-9:
            raise EmptySpace(f"family weights must be non-negative and sum to 1, got {weights}")
        for name, lo_min in (("max_depth", 1), ("min_samples_leaf", 1), ("n_trees", 1)):
            lo, hi = getattr(self, name)
            if not lo_min <= lo <= hi:
                raise EmptySpace(f"{name} range {lo}..{hi} is empty or below {lo_min}")
        lo, hi = self.feature_fraction
        if not 0 < lo <= hi <= 1:
            raise EmptySpace(f"feature_fraction range {lo}..{hi} must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "family_weights": dict(self.family_weights),
            "max_depth": list(self.max_depth),
            "min_samples_leaf": list(self.min_samples_leaf),
            "n_trees": list(self.n_trees),
            "feature_fraction": list(self.feature_fraction),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HyperparameterSpace":
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()}
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class ModelPool:
    models: tuple[TrainedModel, ...]
    eval_partition: Dataset | None
    budget: int

    @property
    def losses(self) -> np.ndarray:
        return np.array([m.holdout_loss for m in self.models], dtype=np.float64)

    def get(self, model_id: int) -> TrainedModel:
        for m in self.models:
            if m.id == model_id:
                return m
        raise KeyError(model_id)


@dataclass(frozen=True)
class RashomonSet:
    reference_id: int
    member_ids: tuple[int, ...]
    epsilon: float
    member_losses: tuple[float, ...]

    @property
    def competitors(self) -> tuple[int, ...]:
        return tuple(i for i in self.member_ids if i != self.reference_id)


def sample_space(space: HyperparameterSpace, n: int, seed: int) -> list[Hyperparameters]:
    """Draw ``n`` configurations uniformly from ``space``.

    Every coordinate is drawn for every configuration, so the random stream
    does not depend on which family was picked.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    families = [f for f in FAMILIES if f in space.family_weights]
    cum = np.cumsum([space.family_weights[f] for f in families])
    out = []
    for i in range(n):
        u = rng.random()
        family = families[min(int(np.searchsorted(cum, u, side="right")), len(families) - 1)]
        depth = int(rng.integers(space.max_depth[0], space.max_depth[1] + 1))
        leaf = int(rng.integers(space.min_samples_leaf[0], space.min_samples_leaf[1] + 1))
        n_trees = int(rng.integers(space.n_trees[0], space.n_trees[1] + 1))
        frac = float(rng.uniform(*space.feature_fraction))
        if family == "tree":
            n_trees, frac = 1, 1.0
        out.append(
            Hyperparameters(
                family=family,
                max_depth=depth,
                min_samples_leaf=leaf,
                n_trees=n_trees,
                feature_fraction=frac,
                bootstrap_seed=derive_seed(seed, i),
            )
        )
    return out


def build_pool(
    train: Dataset,
    eval: Dataset,
    space: HyperparameterSpace | None = None,
    n: int = DEFAULT_BUDGET,
    seed: int = 0,
) -> ModelPool:
    """Fit ``n`` sampled models on ``train`` and score each by loss on ``eval``."""
    if train.n_features != eval.n_features:
        raise DimensionMismatch(
            f"train has {train.n_features} features but eval has {eval.n_features}"
        )
    configs = sample_space(space or HyperparameterSpace(), n, seed)
    models = []
    for i, hp in enumerate(configs):
        m = fit(train, hp, model_id=i)
        models.append(m.with_loss(loss(m, eval)))
    return ModelPool(tuple(models), eval, n)


def reference_model(pool: ModelPool) -> int:
    """Id of the lowest-loss model; ties go to the smallest id."""
    if not pool.models:
        raise EmptyPool("pool has no models")
    return min(pool.models, key=lambda m: (m.holdout_loss, m.id)).id


def rashomon_set(pool: ModelPool, epsilon: float = DEFAULT_EPSILON) -> RashomonSet:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    ref = reference_model(pool)
    bound = pool.get(ref).holdout_loss + epsilon
    members = sorted((m for m in pool.models if m.holdout_loss <= bound), key=lambda m: m.id)
    return RashomonSet(
        reference_id=ref,
        member_ids=tuple(m.id for m in members),
        epsilon=float(epsilon),
        member_losses=tuple(float(m.holdout_loss) for m in members),
    )


def set_size(rs: RashomonSet) -> int:
    return len(rs.member_ids)


def save_pool(pool: ModelPool, path) -> None:
    Path(path).write_text(json.dumps([m.to_dict() for m in pool.models]))


def load_pool(path, eval_partition: Dataset | None = None) -> ModelPool:
    docs = json.loads(Path(path).read_text())
    models = tuple(TrainedModel.from_dict(d) for d in docs)
    return ModelPool(models, eval_partition, len(models))


def sidecar_dict(pool: ModelPool, rs: RashomonSet, extra: dict | None = None) -> dict:
    return {
        "losses": [float(v) for v in pool.losses],
        "reference_id": rs.reference_id,
        "epsilon": rs.epsilon,
        "member_ids": list(rs.member_ids),
        **(extra or {}),
    }
