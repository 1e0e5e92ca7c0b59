"""Command-line entry point: ``rashomon-audit <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import __version__
from .data import (
    BUNDLED_DATASETS,
    BUNDLED_TARGET,
    bundled_path,
    check_manifest,
    imbalance_ratio,
    load_csv,
    load_manifest,
    stratified_split,
    write_csv,
)
from .errors import RashomonAuditError, SchemaViolation
from .harness import analyse, emit_plots, load_config, run_experiment, write_stats_csv
from .multiplicity import multiplicity_report
from .rashomon import (
    DEFAULT_BUDGET,
    DEFAULT_EPSILON,
    build_pool,
    load_pool,
    rashomon_set,
    save_pool,
    sidecar_dict,
)
from .report import read_results_csv
from .resample import METHODS, ResampleSpec, resample
from .seeds import derive_seed

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; this CLI reserves 2 for data errors
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _resolve_csv(arg: str) -> tuple[Path, str]:
    """A path, or the name of a bundled dataset when no such file exists."""
    p = Path(arg)
    if not p.exists() and arg in BUNDLED_DATASETS:
        return bundled_path(arg), arg
    return p, p.stem


def _load(args):
    path, default_name = _resolve_csv(args.csv)
    return load_csv(path, args.target, name=args.name or default_name)


def _sidecar_path(pool_path: Path) -> Path:
    return pool_path.with_suffix(".sidecar.json")


def cmd_inspect(args) -> int:
    d = _load(args)
    s = imbalance_ratio(d)
    print(f"dataset: {d.name}")
    print(f"n={d.n_samples} p={d.n_features} ratio {s.ratio:.2f}")
    print(f"majority={s.majority_count} minority={s.minority_count} dropped_rows={d.n_dropped}")
    manifest = load_manifest(args.manifest)
    entry = manifest.get(d.name)
    if entry is None:
        print(f"manifest: no entry named {d.name!r}")
        return EXIT_OK
    check = check_manifest(d, entry)
    for f in check.fields:
        print(f"manifest {f.field}: expected {f.expected:g} observed {f.observed:.6g} "
              f"{'ok' if f.passed else 'MISMATCH'}")
    print(f"manifest check: {'PASS' if check.passed else 'FAIL'}")
    return EXIT_OK if check.passed or not args.strict else EXIT_DATA


def cmd_balance(args) -> int:
    d = _load(args)
    spec = ResampleSpec(args.method, args.ratio, args.k, args.seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = resample(d, spec)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_csv(out, args.out, target_column=args.target)
    s = imbalance_ratio(out)
    print(f"wrote {args.out}: {out.n_samples} rows, ratio {s.ratio:.4f}")
    return EXIT_OK


def cmd_pool(args) -> int:
    d = _load(args)
    split = stratified_split(d, args.split_fraction, args.seed)
    pool = build_pool(split.train, split.test, n=args.budget, seed=derive_seed(args.seed, "pool"))
    rs = rashomon_set(pool, args.epsilon)
    out = Path(args.out)
    save_pool(pool, out)
    extra = {
        "data": str(_resolve_csv(args.csv)[0].resolve()),
        "target": args.target,
        "name": d.name,
        "split_fraction": args.split_fraction,
        "seed": args.seed,
    }
    _sidecar_path(out).write_text(json.dumps(sidecar_dict(pool, rs, extra), indent=2))
    print(f"wrote {out} ({len(pool.models)} models) and {_sidecar_path(out)}")
    print(f"reference model {rs.reference_id}, Rashomon set size {len(rs.member_ids)} at epsilon {rs.epsilon}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    pool_path = Path(args.pool)
    side_path = _sidecar_path(pool_path)
    side = json.loads(side_path.read_text()) if side_path.exists() else {}
    csv_arg = args.csv or side.get("data")
    if csv_arg is None:
        raise UsageError("metrics: no --csv given and the pool has no sidecar naming its data")
    path, default_name = _resolve_csv(csv_arg)
    target = args.target or side.get("target", BUNDLED_TARGET)
    d = load_csv(path, target, name=side.get("name", default_name))
    fraction = args.split_fraction or side.get("split_fraction", 0.7)
    seed = args.seed if args.seed is not None else side.get("seed", 0)
    test = stratified_split(d, fraction, seed).test
    pool = load_pool(pool_path, test)
    rs = rashomon_set(pool, args.epsilon)
    report = multiplicity_report(
        rs, pool, test,
        threshold=args.threshold,
        repeats=args.importance_repeats,
        importance_seed=derive_seed(seed, "importance"),
        aggregation=args.viod_aggregation,
        dataset=d.name,
        seed=seed,
    )
    doc = report.to_dict()
    doc.update(reference_id=rs.reference_id, member_ids=list(rs.member_ids), epsilon=rs.epsilon)
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    overrides = {k: v for k, v in (("seed", args.seed), ("repeats", args.repeats),
                                   ("budget", args.budget)) if v is not None}
    if overrides:
        cfg = replace(cfg, **overrides)
    out_dir = args.output_dir or cfg.output_dir
    if not Path(out_dir).is_absolute() and args.output_dir is None:
        out_dir = Path(args.config).parent / out_dir
    table, record = run_experiment(cfg, output_dir=out_dir, workers=args.workers)
    n = len(record.cells)
    print(f"{n} cells, {len(record.skipped)} skipped; outputs in {out_dir}")
    for c in record.skipped:
        print(f"skipped {c.key}: {c.error}", file=sys.stderr)
    return EXIT_OK


def cmd_plot(args) -> int:
    table = read_results_csv(args.results)
    out_dir = Path(args.out_dir or Path(args.results).parent)
    out_dir.mkdir(parents=True, exist_ok=True)
    analysis = analyse(table, args.adjustment)
    if args.stats:
        write_stats_csv(analysis, out_dir / "stats.csv")
    for p in emit_plots(table, analysis, out_dir):
        print(f"wrote {p}")
    return EXIT_OK


def _add_data_args(p):
    p.add_argument("csv", help="CSV file, or the name of a bundled dataset")
    p.add_argument("--target", default=BUNDLED_TARGET, help="label column (default: %(default)s)")
    p.add_argument("--name", help="dataset name (default: file stem)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rashomon-audit", description="Audit predictive multiplicity of balancing methods.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("inspect", help="imbalance summary and manifest check")
    _add_data_args(p)
    p.add_argument("--manifest", help="manifest JSON (default: bundled benchmark manifest)")
    p.add_argument("--strict", action="store_true", help="exit 2 when the manifest check fails")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("balance", help="resample one dataset and write the result as CSV")
    _add_data_args(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--ratio", type=float, default=1.0, help="target imbalance ratio (default: %(default)s)")
    p.add_argument("--k", type=int, help="neighbours for smote / near_miss")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("pool", help="train a model pool and serialize it with a sidecar")
    _add_data_args(p)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--split-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="pool JSON path; the sidecar goes next to it")
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("metrics", help="multiplicity report for a saved pool")
    p.add_argument("pool", help="pool JSON written by the pool command")
    p.add_argument("--csv", help="data the pool was trained on (default: from the sidecar)")
    p.add_argument("--target")
    p.add_argument("--split-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--importance-repeats", type=int, default=5)
    p.add_argument("--viod-aggregation", choices=("min", "max"), default="min")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("experiment", help="run the full benchmark grid from a config JSON")
    p.add_argument("config")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--repeats", type=int, help="override the repeat count")
    p.add_argument("--budget", type=int, help="override the pool budget")
    p.add_argument("--output-dir", help="override the output directory")
    p.add_argument("--workers", type=int, help="worker processes (default: $RASHOMON_AUDIT_WORKERS or CPU count)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("plot", help="regenerate figures from a results CSV")
    p.add_argument("results")
    p.add_argument("--out-dir", help="default: next to the results file")
    p.add_argument("--adjustment", choices=("holm", "bonferroni", "none"), default="holm")
    p.add_argument("--stats", action="store_true", help="also rewrite stats.csv")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("rashomon-audit: error: a command is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SchemaViolation as exc:
        print("invalid configuration:", file=sys.stderr)
        for e in exc.errors:
            print(f"  {e}", file=sys.stderr)
        return EXIT_DATA
    except (RashomonAuditError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
