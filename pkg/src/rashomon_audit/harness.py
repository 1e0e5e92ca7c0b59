"""Experiment orchestration: dataset x method x ratio grid, statistics and outputs.

Each cell is an independent job keyed by ``(dataset, method, ratio, repeat)``.
Its randomness is derived from the master seed and that key alone, so the
order in which cells run (or how many worker processes run them) never
changes a result.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .data import BUNDLED_TARGET, Dataset, bundled_path, load_csv, stratified_split
from .errors import DataError, RashomonAuditError, SchemaViolation
from .multiplicity import multiplicity_report
from .rashomon import HyperparameterSpace, build_pool, rashomon_set
from .report import (
    PLOT_METRICS,
    ResultsTable,
    distribution_plot,
    performance_gain_plot,
    write_results_csv,
    zone_plot,
)
from .resample import RATIO_GRID, ResampleSpec, resample
from .seeds import derive_seed
from .stats import dunn_pairwise, friedman, kruskal_wallis

log = logging.getLogger(__name__)

WORKERS_ENV = "RASHOMON_AUDIT_WORKERS"
STATS_HEADER = ("metric", "test", "group_a", "group_b", "statistic", "df", "p_value", "p_adjusted")


def config_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("config_schema.json").read_text())


@dataclass(frozen=True)
class DatasetRef:
    name: str
    path: str
    target: str = BUNDLED_TARGET

    def load(self) -> Dataset:
        return load_csv(self.path, self.target, name=self.name)


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[DatasetRef, ...]
    seed: int
    methods: tuple[str, ...] = ("random_oversample", "smote", "random_undersample", "near_miss")
    ratios: tuple[float, ...] = RATIO_GRID
    epsilon: float = 0.05
    budget: int = 15
    split_fraction: float = 0.7
    threshold: float = 0.5
    smote_k: int = 5
    nearmiss_k: int = 3
    importance_repeats: int = 5
    viod_aggregation: str = "min"
    repeats: int = 5
    adjustment: str = "holm"
    output_dir: str = "results"
    space: HyperparameterSpace = field(default_factory=HyperparameterSpace)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["datasets"] = [asdict(d) for d in self.datasets]
        out["methods"] = list(self.methods)
        out["ratios"] = list(self.ratios)
        out["space"] = self.space.to_dict()
        return out

    def k_for(self, method: str) -> int | None:
        return {"smote": self.smote_k, "near_miss": self.nearmiss_k}.get(method)


def _path_str(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "$"


def _fill_defaults(doc: dict, schema: dict) -> dict:
    for key, sub in schema.get("properties", {}).items():
        if key not in doc and "default" in sub:
            doc[key] = copy.deepcopy(sub["default"])
    return doc


def validate_config(document, base_dir=None) -> ExperimentConfig:
    """Check a config document, apply defaults and build an ExperimentConfig.

    Every violation is collected before raising, each prefixed by its field
    path (``ratios[2]``, ``datasets[0].target``).  Relative dataset paths are
    resolved against ``base_dir`` when given.
    """
    schema = config_schema()
    validator = jsonschema.Draft202012Validator(schema)
    problems = [
        f"{_path_str(e.absolute_path)}: {e.message}"
        for e in sorted(validator.iter_errors(document), key=lambda e: list(map(str, e.absolute_path)))
    ]
    if isinstance(document, dict):
        for i, ds in enumerate(document.get("datasets") or []):
            if isinstance(ds, dict) and ("path" in ds) == ("bundled" in ds):
                problems.append(f"datasets[{i}]: give exactly one of 'path' or 'bundled'")
        space = document.get("space")
        if isinstance(space, dict) and not problems:
            try:
                HyperparameterSpace.from_dict(space)
            except (RashomonAuditError, TypeError) as exc:
                problems.append(f"space: {exc}")
    if problems:
        raise SchemaViolation(problems)

    doc = _fill_defaults(copy.deepcopy(document), schema)
    refs = []
    for ds in doc["datasets"]:
        if "bundled" in ds:
            path = str(bundled_path(ds["bundled"]))
            name = ds.get("name", ds["bundled"])
        else:
            p = Path(ds["path"])
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            path, name = str(p), ds.get("name", p.stem)
        refs.append(DatasetRef(name=name, path=path, target=ds.get("target", BUNDLED_TARGET)))
    names = [r.name for r in refs]
    if len(set(names)) != len(names):
        raise SchemaViolation([f"datasets: names must be unique, got {names}"])

    return ExperimentConfig(
        datasets=tuple(refs),
        seed=doc["seed"],
        methods=tuple(doc["methods"]),
        ratios=tuple(float(r) for r in doc["ratios"]),
        epsilon=float(doc["epsilon"]),
        budget=doc["budget"],
        split_fraction=float(doc["split_fraction"]),
        threshold=float(doc["threshold"]),
        smote_k=doc["smote_k"],
        nearmiss_k=doc["nearmiss_k"],
        importance_repeats=doc["importance_repeats"],
        viod_aggregation=doc["viod_aggregation"],
        repeats=doc["repeats"],
        adjustment=doc["adjustment"],
        output_dir=doc["output_dir"],
        space=HyperparameterSpace.from_dict(doc["space"]) if "space" in doc else HyperparameterSpace(),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None
    return validate_config(doc, base_dir=path.parent)


# ---------------------------------------------------------------------------
# cells


@dataclass(frozen=True)
class CellKey:
    dataset: str
    method: str
    ratio: float | None
    repeat: int

    def sort_key(self):
        return (self.dataset, self.method != "none", self.method,
                -1.0 if self.ratio is None else self.ratio, self.repeat)


@dataclass
class CellOutcome:
    key: CellKey
    report: object | None
    seconds: float
    error: str | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def skipped(self) -> bool:
        return self.report is None

    def to_dict(self) -> dict:
        return {
            **asdict(self.key),
            "report": None if self.report is None else self.report.to_dict(),
            "seconds": self.seconds,
            "skipped": self.skipped,
            "error": self.error,
            "notes": self.notes,
        }


def cell_keys(cfg: ExperimentConfig) -> list[CellKey]:
    keys = []
    for ds in cfg.datasets:
        for r in range(cfg.repeats):
            keys.append(CellKey(ds.name, "none", None, r))
            keys.extend(CellKey(ds.name, m, float(q), r) for m in cfg.methods for q in cfg.ratios)
    return sorted(keys, key=CellKey.sort_key)


def run_cell(cfg: ExperimentConfig, data: Dataset, key: CellKey) -> CellOutcome:
    """Balance the training partition, build a pool and measure multiplicity on the test partition."""
    start = time.perf_counter()
    ratio_tag = "none" if key.ratio is None else repr(key.ratio)
    cell_seed = derive_seed(cfg.seed, key.dataset, key.method, ratio_tag, key.repeat)
    # shared by every cell of one (dataset, repeat): same split, same sampled configurations
    split_seed = derive_seed(cfg.seed, key.dataset, "split", key.repeat)
    space_seed = derive_seed(cfg.seed, key.dataset, "space", key.repeat)
    notes = []
    try:
        split = stratified_split(data, cfg.split_fraction, split_seed)
        train = split.train
        if key.method != "none":
            spec = ResampleSpec(key.method, key.ratio, cfg.k_for(key.method), cell_seed)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                train = resample(train, spec)
            notes.extend(str(w.message) for w in caught)
        pool = build_pool(train, split.test, cfg.space, cfg.budget, seed=space_seed)
        rs = rashomon_set(pool, cfg.epsilon)
        report = multiplicity_report(
            rs, pool, split.test,
            threshold=cfg.threshold,
            repeats=cfg.importance_repeats,
            importance_seed=derive_seed(cfg.seed, key.dataset, "importance", key.repeat),
            aggregation=cfg.viod_aggregation,
            dataset=key.dataset, method=key.method, ratio=key.ratio, seed=key.repeat,
        )
    except (RashomonAuditError, ValueError) as exc:
        log.warning("skipping cell %s: %s: %s", key, type(exc).__name__, exc)
        return CellOutcome(key, None, time.perf_counter() - start, f"{type(exc).__name__}: {exc}", notes)
    for n in notes:
        log.info("cell %s: %s", key, n)
    return CellOutcome(key, report, time.perf_counter() - start, None, notes)


def _cell_job(args):
    cfg, data, key = args
    return run_cell(cfg, data, key)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be >= 1, got {raw!r}")
    return n


# ---------------------------------------------------------------------------
# statistics


@dataclass
class StatsRow:
    metric: str
    test: str
    group_a: str = ""
    group_b: str = ""
    statistic: float = math.nan
    df: int | None = None
    p_value: float = math.nan
    p_adjusted: float = math.nan
    note: str = ""


@dataclass
class Analysis:
    rows: list[StatsRow]
    kw: dict
    dunn: dict


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def friedman_design(table: ResultsTable, metric: str) -> tuple[list[tuple], list[float], np.ndarray]:
    """Blocks are (dataset, method, repeat); treatments are the ratios.

    Only blocks observed at every ratio enter the design.
    """
    cells = {}
    ratios = set()
    for r in table.metric_rows(metric):
        if r.ratio is None:
            continue
        cells[(r.dataset, r.method, r.seed, r.ratio)] = r.value
        ratios.add(r.ratio)
    ratios = sorted(ratios)
    blocks = sorted({k[:3] for k in cells})
    complete = [b for b in blocks if all((*b, q) in cells for q in ratios)]
    design = np.array([[cells[(*b, q)] for q in ratios] for b in complete], dtype=np.float64)
    return complete, ratios, design.reshape(len(complete), len(ratios))


def analyse(table: ResultsTable, adjustment: str = "holm") -> Analysis:
    """Kruskal-Wallis and Dunn across methods, Friedman across ratios, per metric."""
    rows, kws, dunns = [], {}, {}
    for metric in PLOT_METRICS:
        groups = table.values_by_method(metric)
        if len(groups) >= 2:
            try:
                kw = kruskal_wallis(groups)
                kws[metric] = kw
                rows.append(StatsRow(metric, "kruskal_wallis", statistic=kw.statistic, df=kw.df,
                                     p_value=kw.p_value))
                dunn = dunn_pairwise(groups, adjustment)
                dunns[metric] = dunn
                k = len(dunn.labels)
                for i in range(k):
                    for j in range(i + 1, k):
                        rows.append(StatsRow(metric, f"dunn_{adjustment}", dunn.labels[i], dunn.labels[j],
                                             float(dunn.z[i, j]), None, float(dunn.p_raw[i, j]),
                                             float(dunn.p_adjusted[i, j])))
            except (RashomonAuditError, ValueError) as exc:
                rows.append(StatsRow(metric, "kruskal_wallis", note=f"not computed: {exc}"))
        blocks, ratios, design = friedman_design(table, metric)
        try:
            fr = friedman(design)
            rows.append(StatsRow(metric, "friedman", statistic=fr.statistic, df=fr.df, p_value=fr.p_value,
                                 note=f"{len(blocks)} blocks x {len(ratios)} ratios"))
        except (RashomonAuditError, ValueError) as exc:
            rows.append(StatsRow(metric, "friedman", note=f"not computed: {exc}"))
    return Analysis(rows, kws, dunns)


def write_stats_csv(analysis: Analysis, out) -> None:
    with Path(out).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((*STATS_HEADER, "note"))
        for r in analysis.rows:
            w.writerow([r.metric, r.test, r.group_a, r.group_b, _fmt(r.statistic), _fmt(r.df),
                        _fmt(r.p_value), _fmt(r.p_adjusted), r.note])


def emit_plots(table: ResultsTable, analysis: Analysis, out_dir) -> list[Path]:
    """Write every figure for ``table`` into ``out_dir``; returns the paths written."""
    out_dir = Path(out_dir)
    written = []

    def attempt(path, fn, *args):
        try:
            fn(*args, path)
            written.append(path)
        except RashomonAuditError as exc:
            log.warning("plot %s not written: %s", path.name, exc)

    attempt(out_dir / "zone.svg", zone_plot, table)
    for ds in sorted({r.dataset for r in table}):
        sub = ResultsTable(r for r in table if r.dataset == ds)
        attempt(out_dir / f"zone_{ds}.svg", lambda t, p, ds=ds: zone_plot(t, p, f"Rashomon zones: {ds}"), sub)
    for metric in PLOT_METRICS:
        attempt(
            out_dir / f"distribution_{metric}.svg",
            lambda g, p, metric=metric: distribution_plot(
                g, analysis.kw.get(metric), analysis.dunn.get(metric), p, metric
            ),
            table.values_by_method(metric),
        )
        attempt(out_dir / f"performance_gain_{metric}.svg", performance_gain_plot, table, metric)
    return written


# ---------------------------------------------------------------------------
# driver


@dataclass
class RunRecord:
    config: dict
    cells: list[CellOutcome]
    version: str
    started: str
    finished: str
    outputs: list[str]

    @property
    def skipped(self) -> list[CellOutcome]:
        return [c for c in self.cells if c.skipped]

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "config": self.config,
            "n_cells": len(self.cells),
            "n_skipped": len(self.skipped),
            "cells": [c.to_dict() for c in self.cells],
            "outputs": self.outputs,
        }


def build_table(outcomes: list[CellOutcome]) -> ResultsTable:
    """Results rows with AUC gain against the baseline cell of the same dataset and repeat."""
    baseline = {
        (c.key.dataset, c.key.repeat): c.report.auc_reference
        for c in outcomes
        if c.key.method == "none" and not c.skipped
    }
    table = ResultsTable()
    for c in outcomes:
        if c.skipped:
            continue
        if c.key.method == "none":
            gain = 0.0
        else:
            base = baseline.get((c.key.dataset, c.key.repeat))
            gain = math.nan if base is None else c.report.auc_reference - base
        table.add_report(c.report, gain)
    return table


def run_experiment(
    cfg: ExperimentConfig,
    output_dir=None,
    workers: int | None = None,
    write: bool = True,
) -> tuple[ResultsTable, RunRecord]:
    started = datetime.now(timezone.utc).isoformat()
    datasets = {ref.name: ref.load() for ref in cfg.datasets}
    keys = cell_keys(cfg)
    workers = worker_count() if workers is None else workers
    jobs = [(cfg, datasets[k.dataset], k) for k in keys]
    log.info("running %d cells on %d worker(s)", len(keys), workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outcomes = list(ex.map(_cell_job, jobs))
    else:
        outcomes = [_cell_job(j) for j in jobs]
    outcomes.sort(key=lambda c: c.key.sort_key())

    table = build_table(outcomes)
    analysis = analyse(table, cfg.adjustment)
    outputs = []
    if write:
        out = Path(output_dir if output_dir is not None else cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results_csv(table, out / "results.csv")
        write_stats_csv(analysis, out / "stats.csv")
        outputs = [out / "results.csv", out / "stats.csv", *emit_plots(table, analysis, out)]
    record = RunRecord(
        config=cfg.to_dict(),
        cells=outcomes,
        version=__version__,
        started=started,
        finished=datetime.now(timezone.utc).isoformat(),
        outputs=[p.name for p in outputs],
    )
    if write:
        (out / "run_record.json").write_text(json.dumps(record.to_dict(), indent=2), encoding="utf-8")
    return table, record
