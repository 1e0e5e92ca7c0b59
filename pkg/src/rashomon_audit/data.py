"""Loading, validating and splitting binary classification datasets."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    ClassTooSmall,
    DataError,
    EmptyAfterCleaning,
    MalformedCsv,
    NameMismatch,
    NotBinaryTarget,
)

log = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "?", "NA", "N/A", "NaN", "nan", "null", "NULL", "None"})
RATIO_TOLERANCE = 0.01
BUNDLED_DATASETS = ("phoneme", "abalone", "abalone_19", "yeast_me2")
BUNDLED_TARGET = "class"


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Numeric feature matrix with 0/1 labels, where 1 marks the minority class.

    Arrays are copied and made read-only on construction.
    """

    name: str
    features: np.ndarray
    labels: np.ndarray
    column_names: tuple[str, ...]
    n_dropped: int = 0

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        n, p = X.shape
        if n < 2 or p < 1:
            raise DataError(f"dataset {self.name!r} needs n >= 2 and p >= 1, got {X.shape}")
        if y.shape != (n,):
            raise DataError("labels must be a vector with one entry per row")
        if not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0/1")
        y = y.astype(np.int8)
        n_pos = int(y.sum())
        if n_pos == 0 or n_pos == n:
            raise DataError(f"dataset {self.name!r} must contain both classes")
        if n_pos > n - n_pos:
            raise DataError(f"dataset {self.name!r}: label 1 must be the minority class")
        if not np.isfinite(X).all():
            raise DataError("features must be finite")
        if len(self.column_names) != p:
            raise DataError("column_names length does not match feature count")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows, name: str | None = None) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(name or self.name, self.features[rows], self.labels[rows], self.column_names)

    def with_rows(self, features, labels, name: str | None = None) -> "Dataset":
        return Dataset(name or self.name, features, labels, self.column_names)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.column_names == other.column_names
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


@dataclass(frozen=True)
class ImbalanceSummary:
    majority_count: int
    minority_count: int
    ratio: float


@dataclass(frozen=True, eq=False)
class SplitPair:
    train: Dataset
    test: Dataset
    fraction: float
    seed: int
    train_rows: np.ndarray = field(repr=False)
    test_rows: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ManifestEntry:
    dataset_name: str
    expected_ratio: float
    expected_samples: int
    expected_variables: int

    def __post_init__(self):
        if self.expected_ratio <= 0 or self.expected_samples <= 0 or self.expected_variables <= 0:
            raise DataError(f"manifest entry {self.dataset_name!r} must have positive values")


@dataclass(frozen=True)
class FieldCheck:
    field: str
    expected: float
    observed: float
    passed: bool


@dataclass(frozen=True)
class ManifestCheck:
    dataset_name: str
    fields: tuple[FieldCheck, ...]

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.fields)

    def field(self, name: str) -> FieldCheck:
        for f in self.fields:
            if f.field == name:
                return f
        raise KeyError(name)


def _is_missing(s: str) -> bool:
    return s.strip() in MISSING_TOKENS


def _parse_float(s: str):
    try:
        return float(s)
    except ValueError:
        return None


def load_csv(path, target_column: str, name: str | None = None) -> Dataset:
    """Read a headed CSV into a :class:`Dataset`.

    Rows with a missing or non-finite value in any column are dropped.
    Non-numeric feature columns are integer-encoded by first appearance.
    The less frequent target value becomes label 1; on an exact tie the
    value that appears later in the file does.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MalformedCsv(f"{path}: empty file, header row required") from None
        if target_column not in header:
            raise DataError(f"{path}: target column {target_column!r} not in header {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedCsv(
                    f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}"
                )
            rows.append([c.strip() for c in row])

    n_read = len(rows)
    rows = [r for r in rows if not any(_is_missing(c) for c in r)]
    t = header.index(target_column)
    feature_idx = [j for j in range(len(header)) if j != t]

    # a column is numeric when every surviving cell parses as a float
    numeric = {}
    for j in feature_idx:
        parsed = [_parse_float(r[j]) for r in rows]
        if all(v is not None for v in parsed):
            numeric[j] = parsed
    keep = [
        i for i in range(len(rows))
        if all(math.isfinite(numeric[j][i]) for j in numeric)
    ]
    rows = [rows[i] for i in keep]
    numeric = {j: [v[i] for i in keep] for j, v in numeric.items()}
    n_dropped = n_read - len(rows)
    if not rows:
        raise EmptyAfterCleaning(f"{path}: no complete rows left after dropping {n_dropped}")

    target = [r[t] for r in rows]
    values = list(dict.fromkeys(target))
    if len(values) != 2:
        raise NotBinaryTarget(
            f"{path}: target {target_column!r} has {len(values)} distinct values, expected 2"
        )
    counts = {v: target.count(v) for v in values}
    minority = values[1] if counts[values[1]] <= counts[values[0]] else values[0]
    labels = np.array([1 if v == minority else 0 for v in target], dtype=np.int8)

    columns = []
    for j in feature_idx:
        if j in numeric:
            columns.append(np.array(numeric[j], dtype=np.float64))
        else:
            codes = {}
            columns.append(np.array([codes.setdefault(r[j], len(codes)) for r in rows], dtype=np.float64))
    if not columns:
        raise DataError(f"{path}: no feature columns besides the target")
    if n_dropped:
        log.info("%s: dropped %d rows with missing or non-finite values", path, n_dropped)

    return Dataset(
        name=name or path.stem,
        features=np.column_stack(columns),
        labels=labels,
        column_names=tuple(header[j] for j in feature_idx),
        n_dropped=n_dropped,
    )


def write_csv(d: Dataset, path, target_column: str = BUNDLED_TARGET) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*d.column_names, target_column])
        for x, y in zip(d.features, d.labels):
            w.writerow([*(repr(float(v)) for v in x), int(y)])


def imbalance_ratio(d: Dataset) -> ImbalanceSummary:
    minority = int(d.labels.sum())
    majority = d.n_samples - minority
    return ImbalanceSummary(majority, minority, majority / minority)


def stratified_split(d: Dataset, fraction: float = 0.7, seed: int = 0) -> SplitPair:
    """Per-class shuffled split; each class puts round(fraction * count) rows in train."""
    if not 0.5 < fraction < 0.95:
        raise ValueError(f"split fraction must lie in (0.5, 0.95), got {fraction}")
    rng = np.random.default_rng(seed)
    train_rows = []
    for cls in (0, 1):
        idx = np.flatnonzero(d.labels == cls)
        n_train = round_half_up(fraction * len(idx))
        if n_train < 1 or n_train >= len(idx):
            raise ClassTooSmall(
                f"class {cls} has {len(idx)} rows; a {fraction} split leaves one partition without it"
            )
        train_rows.append(rng.permutation(idx)[:n_train])
    train_rows = np.sort(np.concatenate(train_rows))
    test_rows = np.setdiff1d(np.arange(d.n_samples), train_rows)
    return SplitPair(
        train=d.subset(train_rows, f"{d.name}:train"),
        test=d.subset(test_rows, f"{d.name}:test"),
        fraction=fraction,
        seed=seed,
        train_rows=_frozen(train_rows),
        test_rows=_frozen(test_rows),
    )


def load_manifest(path=None) -> dict[str, ManifestEntry]:
    """Parse a manifest JSON array; ``None`` reads the bundled benchmark manifest."""
    if path is None:
        text = resources.files(__package__).joinpath("datasets/manifest.json").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest is not valid JSON: {exc}") from None
    if not isinstance(doc, list):
        raise DataError("manifest must be a JSON array")
    out = {}
    for i, item in enumerate(doc):
        try:
            entry = ManifestEntry(
                str(item["name"]),
                float(item["imbalance_ratio"]),
                int(item["n_samples"]),
                int(item["n_variables"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"manifest entry {i} is malformed: {exc!r}") from None
        out[entry.dataset_name] = entry
    return out


def check_manifest(d: Dataset, m: ManifestEntry) -> ManifestCheck:
    if d.name != m.dataset_name:
        raise NameMismatch(f"dataset {d.name!r} checked against manifest entry {m.dataset_name!r}")
    ratio = imbalance_ratio(d).ratio
    return ManifestCheck(
        d.name,
        (
            FieldCheck("n_samples", m.expected_samples, d.n_samples, d.n_samples == m.expected_samples),
            FieldCheck(
                "n_variables", m.expected_variables, d.n_features, d.n_features == m.expected_variables
            ),
            FieldCheck(
                "imbalance_ratio",
                m.expected_ratio,
                ratio,
                abs(ratio - m.expected_ratio) <= RATIO_TOLERANCE + 1e-12,
            ),
        ),
    )


def bundled_path(name: str) -> Path:
    if name not in BUNDLED_DATASETS:
        raise KeyError(f"{name!r} is not bundled; choose from {BUNDLED_DATASETS}")
    return Path(str(resources.files(__package__).joinpath(f"datasets/{name}.csv")))


def load_bundled(name: str) -> Dataset:
    return load_csv(bundled_path(name), BUNDLED_TARGET, name=name)
