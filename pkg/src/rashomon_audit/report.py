"""Results table, CSV round-tripping and the standalone SVG plots.

Plots are hand-written SVG 1.1 on a fixed 800x600 canvas.  Each document
carries a ``<metadata>`` block with its axis ranges and the plotted groups
as JSON, so the figures can be checked without rasterising them.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .errors import EmptyTable, UnknownMetric
from .stats import DunnResult, TestResult

METRICS = ("ambiguity", "discrepancy", "viod", "set_size")
PLOT_METRICS = ("ambiguity", "discrepancy", "viod")
CSV_HEADER = ("dataset", "method", "ratio", "seed", "metric", "value", "auc_reference", "auc_gain")
METHOD_ORDER = ("none", "random_oversample", "smote", "random_undersample", "near_miss")
METHOD_LABELS = {
    "none": "original",
    "random_oversample": "oversampling",
    "smote": "SMOTE",
    "random_undersample": "undersampling",
    "near_miss": "near miss",
}
PALETTE = ("#4d4d4d", "#e69f00", "#56b4e9", "#009e73", "#cc79a7", "#0072b2", "#d55e00", "#f0e442")
WIDTH, HEIGHT = 800, 600


def metric_range(metric: str) -> tuple[float, float]:
    if metric in ("ambiguity", "discrepancy"):
        return (0.0, 1.0)
    if metric == "viod":
        return (-1.0, 1.0)
    raise UnknownMetric(f"no fixed axis range for metric {metric!r}")


# ---------------------------------------------------------------------------
# results table


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    method: str
    ratio: float | None
    seed: int
    metric: str
    value: float
    auc_reference: float
    auc_gain: float

    def __post_init__(self):
        if self.metric not in METRICS:
            raise UnknownMetric(f"unknown metric {self.metric!r}")
        v = self.value
        ok = {
            "ambiguity": 0 <= v <= 1,
            "discrepancy": 0 <= v <= 1,
            "viod": -1 <= v <= 1,
            "set_size": v >= 1,
        }[self.metric]
        if not ok:
            raise ValueError(f"{self.metric} value {v} outside its legal range")

    def sort_key(self):
        ratio = (0, 0.0) if self.ratio is None else (1, self.ratio)
        return (self.dataset, self.method, ratio, self.seed, self.metric)

    @property
    def cell(self) -> tuple:
        return (self.dataset, self.method, self.ratio, self.seed)


class ResultsTable:
    """Long-format experiment results: one row per (cell, metric)."""

    def __init__(self, rows: Iterable[ResultRow] = ()):
        self.rows: list[ResultRow] = list(rows)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __eq__(self, other):
        if not isinstance(other, ResultsTable):
            return NotImplemented
        return self.sorted().rows == other.sorted().rows

    def sorted(self) -> "ResultsTable":
        return ResultsTable(sorted(self.rows, key=ResultRow.sort_key))

    def add_report(self, report, auc_gain: float) -> None:
        for metric in METRICS:
            self.rows.append(
                ResultRow(
                    dataset=report.dataset,
                    method=report.method,
                    ratio=report.ratio,
                    seed=report.seed,
                    metric=metric,
                    value=float(getattr(report, metric)),
                    auc_reference=float(report.auc_reference),
                    auc_gain=float(auc_gain),
                )
            )

    def metric_rows(self, metric: str) -> list[ResultRow]:
        return [r for r in self.rows if r.metric == metric]

    def methods(self) -> list[str]:
        return _ordered_methods({r.method for r in self.rows})

    def values_by_method(self, metric: str) -> dict[str, np.ndarray]:
        groups = defaultdict(list)
        for r in sorted(self.metric_rows(metric), key=ResultRow.sort_key):
            groups[r.method].append(r.value)
        return {m: np.array(groups[m]) for m in _ordered_methods(groups)}

    def paired(self, x_metric: str, y_metric: str) -> dict[str, list[tuple[float, float]]]:
        """Per method, (x, y) pairs for cells that report both metrics."""
        cells = defaultdict(dict)
        for r in self.rows:
            cells[r.cell][r.metric] = r.value
        groups = defaultdict(list)
        for key in sorted(cells, key=lambda c: (c[0], c[1], (c[2] is not None, c[2] or 0.0), c[3])):
            vals = cells[key]
            if x_metric in vals and y_metric in vals:
                groups[key[1]].append((vals[x_metric], vals[y_metric]))
        return {m: groups[m] for m in _ordered_methods(groups)}

    def gain_pairs(self, metric: str) -> dict[str, list[tuple[float, float]]]:
        groups = defaultdict(list)
        for r in sorted(self.metric_rows(metric), key=ResultRow.sort_key):
            groups[r.method].append((r.auc_gain, r.value))
        return {m: groups[m] for m in _ordered_methods(groups)}


def _ordered_methods(methods) -> list[str]:
    known = [m for m in METHOD_ORDER if m in methods]
    return known + sorted(set(methods) - set(METHOD_ORDER))


def _fmt(v: float) -> str:
    # repr is the shortest string that parses back to the same double
    return repr(float(v))


def write_results_csv(table: ResultsTable, out) -> None:
    with Path(out).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in table.sorted():
            w.writerow([
                r.dataset,
                r.method,
                "" if r.ratio is None else _fmt(r.ratio),
                r.seed,
                r.metric,
                _fmt(r.value),
                _fmt(r.auc_reference),
                _fmt(r.auc_gain),
            ])


def read_results_csv(path) -> ResultsTable:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return ResultsTable(
            ResultRow(
                dataset=row["dataset"],
                method=row["method"],
                ratio=None if row["ratio"] == "" else float(row["ratio"]),
                seed=int(row["seed"]),
                metric=row["metric"],
                value=float(row["value"]),
                auc_reference=float(row["auc_reference"]),
                auc_gain=float(row["auc_gain"]),
            )
            for row in reader
        )


# ---------------------------------------------------------------------------
# geometry


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Iterable[Sequence[float]]) -> list[tuple[float, float]]:
    """Counter-clockwise hull vertices (monotone chain), collinear points dropped.

    Fewer than three distinct, non-collinear points give a degenerate hull of
    one or two vertices.
    """
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) <= 2:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _nice_ticks(lo: float, hi: float, max_ticks: int = 8) -> list[float]:
    span = hi - lo
    raw = span / (max_ticks - 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw)
    first = math.ceil(lo / step - 1e-9)
    last = math.floor(hi / step + 1e-9)
    return [round(i * step, 10) for i in range(first, last + 1)]


# ---------------------------------------------------------------------------
# SVG canvas


class _Canvas:
    def __init__(self, title, xlabel, ylabel, xrange, yrange, top=60, right=190, bottom=70, left=80):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.x0, self.x1 = xrange
        self.y0, self.y1 = yrange
        self.top, self.left = top, left
        self.pw = WIDTH - left - right
        self.ph = HEIGHT - top - bottom
        self.body: list[str] = []
        self.meta: dict = {"x_range": list(xrange), "y_range": list(yrange), "groups": {}}

    def px(self, x: float) -> float:
        return self.left + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y: float) -> float:
        return self.top + self.ph - (y - self.y0) / (self.y1 - self.y0) * self.ph

    def add(self, element: str) -> None:
        self.body.append(element)

    def text(self, x, y, s, anchor="start", cls="label", size=13, extra=""):
        self.add(
            f'<text x="{x:.3f}" y="{y:.3f}" class="{cls}" font-size="{size}" '
            f'text-anchor="{anchor}"{extra}>{escape(s)}</text>'
        )

    def axes(self, xticks=None, yticks=None):
        x_left, x_right = self.px(self.x0), self.px(self.x1)
        y_bottom, y_top = self.py(self.y0), self.py(self.y1)
        for t in xticks or _nice_ticks(self.x0, self.x1):
            x = self.px(t)
            self.add(f'<line x1="{x:.3f}" y1="{y_top:.3f}" x2="{x:.3f}" y2="{y_bottom:.3f}" class="grid"/>')
            self.text(x, y_bottom + 18, f"{t:g}", "middle", "tick", 11)
        for t in yticks or _nice_ticks(self.y0, self.y1):
            y = self.py(t)
            self.add(f'<line x1="{x_left:.3f}" y1="{y:.3f}" x2="{x_right:.3f}" y2="{y:.3f}" class="grid"/>')
            self.text(x_left - 8, y + 4, f"{t:g}", "end", "tick", 11)
        self.add(
            f'<rect x="{x_left:.3f}" y="{y_top:.3f}" width="{self.pw:.3f}" height="{self.ph:.3f}" class="frame"/>'
        )
        self.text(self.left + self.pw / 2, HEIGHT - 22, self.xlabel, "middle", "axis-label", 14)
        cx, cy = 22, self.top + self.ph / 2
        self.text(cx, cy, self.ylabel, "middle", "axis-label", 14, f' transform="rotate(-90 {cx} {cy:.3f})"')
        self.text(self.left, 32, self.title, "start", "title", 16)

    def legend(self, entries: Sequence[tuple[str, str]]):
        x = self.left + self.pw + 20
        for i, (label, color) in enumerate(entries):
            y = self.top + 10 + 22 * i
            self.add(
                f'<rect x="{x}" y="{y}" width="14" height="14" fill="{color}" fill-opacity="0.4" '
                f'stroke="{color}" class="legend-swatch"/>'
            )
            self.text(x + 22, y + 12, label, cls="legend-label", size=12)

    def render(self) -> str:
        meta = escape(json.dumps(self.meta, sort_keys=True))
        return "\n".join([
            '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f"<metadata>{meta}</metadata>",
            "<style>"
            ".grid{stroke:#dddddd;stroke-width:1}"
            ".frame{fill:none;stroke:#333333;stroke-width:1}"
            "text{font-family:Helvetica,Arial,sans-serif;fill:#222222}"
            ".title{font-weight:bold}"
            ".zero-line{stroke:#000000;stroke-width:1.5;stroke-dasharray:4 3}"
            "</style>",
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
            *self.body,
            "</svg>",
            "",
        ])


def _write(out, text: str) -> str:
    Path(out).write_text(text, encoding="utf-8")
    return text


def _label(method: str) -> str:
    return METHOD_LABELS.get(method, method)


def _draw_zone(c: _Canvas, group: str, points, color: str) -> None:
    """Hull polygon (or degenerate segment/marker) plus the raw points of one group."""
    hull = convex_hull(points)
    pix = " ".join(f"{c.px(x):.3f},{c.py(y):.3f}" for x, y in hull)
    g = quoteattr(group)
    if len(hull) >= 3:
        c.add(
            f'<polygon points="{pix}" class="zone" data-group={g} fill="{color}" '
            f'fill-opacity="0.4" stroke="{color}" stroke-width="1.5"/>'
        )
    elif len(hull) == 2:
        c.add(
            f'<polyline points="{pix}" class="zone zone-segment" data-group={g} fill="none" '
            f'stroke="{color}" stroke-opacity="0.7" stroke-width="6"/>'
        )
    else:
        x, y = hull[0]
        c.add(
            f'<circle cx="{c.px(x):.3f}" cy="{c.py(y):.3f}" r="7" class="zone zone-marker" '
            f'data-group={g} fill="{color}" fill-opacity="0.4" stroke="{color}"/>'
        )
    for x, y in points:
        c.add(
            f'<circle cx="{c.px(x):.3f}" cy="{c.py(y):.3f}" r="2.5" class="point" '
            f'data-group={g} fill="{color}"/>'
        )
    c.meta["groups"][group] = {"points": [list(p) for p in points], "hull": [list(h) for h in hull]}


# ---------------------------------------------------------------------------
# plots


def zone_plot(table: ResultsTable, out, title: str = "Rashomon zones") -> str:
    """Convex-hull zone per balancing method in the (discrepancy, ambiguity) plane."""
    groups = table.paired("discrepancy", "ambiguity")
    if not groups:
        raise EmptyTable("zone plot needs rows with both ambiguity and discrepancy")
    c = _Canvas(title, "discrepancy", "ambiguity", (0.0, 1.0), (0.0, 1.0))
    c.axes()
    colors = {}
    for i, (method, pts) in enumerate(groups.items()):
        colors[method] = PALETTE[i % len(PALETTE)]
        _draw_zone(c, method, pts, colors[method])
    c.legend([(_label(m), colors[m]) for m in groups])
    return _write(out, c.render())


def _quartiles(v: np.ndarray):
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    return q1, med, q3, float(inside.min()), float(inside.max())


def distribution_plot(
    groups: Mapping[str, Sequence[float]],
    kw: TestResult | None,
    dunn: DunnResult | None,
    out,
    metric_name: str = "value",
    alpha: float = 0.05,
) -> str:
    """Box-with-points column per group, omnibus annotation and significance bars."""
    groups = {k: np.asarray(v, dtype=np.float64) for k, v in groups.items() if len(v)}
    if len(groups) < 2:
        raise EmptyTable("distribution plot needs at least two non-empty groups")
    try:
        y0, y1 = metric_range(metric_name)
    except UnknownMetric:
        allv = np.concatenate(list(groups.values()))
        pad = max(1e-9, 0.05 * (allv.max() - allv.min()))
        y0, y1 = float(allv.min() - pad), float(allv.max() + pad)
    labels = list(groups)
    pairs = dunn.significant_pairs(alpha) if dunn is not None else []
    top = 80 + 22 * len(pairs)
    c = _Canvas(f"Distribution of {metric_name}", "balancing method", metric_name,
                (0.0, float(len(labels))), (y0, y1), top=top, right=40)
    c.axes(xticks=[])
    rng = np.random.default_rng(0)
    slot = c.pw / len(labels)
    box_w = min(60.0, slot * 0.5)
    for i, label in enumerate(labels):
        v = groups[label]
        color = PALETTE[i % len(PALETTE)]
        cx = c.px(i + 0.5)
        q1, med, q3, wlo, whi = _quartiles(v)
        g = quoteattr(label)
        c.add(f'<line x1="{cx:.3f}" y1="{c.py(whi):.3f}" x2="{cx:.3f}" y2="{c.py(wlo):.3f}" '
              f'stroke="{color}" class="whisker" data-group={g}/>')
        c.add(f'<rect x="{cx - box_w / 2:.3f}" y="{c.py(q3):.3f}" width="{box_w:.3f}" '
              f'height="{max(0.5, c.py(q1) - c.py(q3)):.3f}" fill="{color}" fill-opacity="0.4" '
              f'stroke="{color}" class="box" data-group={g}/>')
        c.add(f'<line x1="{cx - box_w / 2:.3f}" y1="{c.py(med):.3f}" x2="{cx + box_w / 2:.3f}" '
              f'y2="{c.py(med):.3f}" stroke="#000000" stroke-width="2" class="median"/>')
        for val, j in zip(v, rng.uniform(-0.35, 0.35, size=len(v))):
            c.add(f'<circle cx="{cx + j * box_w:.3f}" cy="{c.py(val):.3f}" r="2" fill="{color}" '
                  f'fill-opacity="0.7" class="point" data-group={g}/>')
        c.text(cx, c.py(y0) + 18, _label(label), "middle", "tick", 12)
        c.meta["groups"][label] = {"n": int(len(v)), "median": float(med)}

    for level, (i, j, p) in enumerate(pairs):
        y = top - 14 - 22 * level
        xa, xb = c.px(i + 0.5), c.px(j + 0.5)
        c.add(f'<path d="M{xa:.3f},{y + 6:.3f} L{xa:.3f},{y:.3f} L{xb:.3f},{y:.3f} L{xb:.3f},{y + 6:.3f}" '
              f'fill="none" stroke="#333333" class="sig-bar" data-pair={quoteattr(f"{labels[i]}|{labels[j]}")}/>')
        c.text((xa + xb) / 2, y - 3, f"p.adj = {p:.3g}", "middle", "sig-label", 10)
    c.meta["significant_pairs"] = [[labels[i], labels[j], p] for i, j, p in pairs]
    if kw is not None:
        c.text(WIDTH - 40, 32, kw.describe(), "end", "test-annotation", 12)
        c.meta["omnibus"] = {"method": kw.method_name, "statistic": kw.statistic,
                             "df": kw.df, "p_value": kw.p_value}
    return _write(out, c.render())


def performance_gain_plot(table: ResultsTable, metric_name: str, out) -> str:
    """Metric against AUC gain over the unbalanced baseline, one hull zone per method."""
    if metric_name not in PLOT_METRICS:
        raise UnknownMetric(f"performance-gain plot supports {PLOT_METRICS}, got {metric_name!r}")
    groups = table.gain_pairs(metric_name)
    if not groups:
        raise EmptyTable(f"no rows for metric {metric_name!r}")
    gains = [g for pts in groups.values() for g, _ in pts]
    span = max(0.05, 1.1 * max(abs(g) for g in gains))
    c = _Canvas(f"Performance gain vs {metric_name}", "AUC gain", metric_name,
                (-span, span), metric_range(metric_name))
    c.axes()
    x0 = c.px(0.0)
    c.add(f'<line x1="{x0:.3f}" y1="{c.py(c.y1):.3f}" x2="{x0:.3f}" y2="{c.py(c.y0):.3f}" class="zero-line"/>')
    colors = {}
    for i, (method, pts) in enumerate(groups.items()):
        colors[method] = PALETTE[i % len(PALETTE)]
        _draw_zone(c, method, pts, colors[method])
    c.legend([(_label(m), colors[m]) for m in groups])
    return _write(out, c.render())
