"""Command-line interface: ``cluster``, ``bench``, ``silhouette``, ``reproduce``.

Exit codes: 0 success, 1 configuration error, 2 data/schema error,
3 metric domain error (zero-norm or constant rows).
"""
from __future__ import annotations

import argparse
import logging
import os
import statistics
import sys
from pathlib import Path

from . import ingest
from .core import ConfigError, DataError, DistanceKind, DomainError, InitStrategy, KMeansConfig
from .engine import kmeans
from .evaluation import silhouette
from .metrics import prepare
from .report import (
    emit_benchmark_table,
    emit_scatter_svg,
    emit_silhouette_svg,
    export_result,
    format_sum,
    format_trace,
)

log = logging.getLogger("distkmeans")

METRICS = [m.value for m in DistanceKind]

# best total sums reported for the original experiments (k=3; iris on a x10 scale)
REFERENCE_SUMS = {
    ("iris", "cityblock"): 1649.0,
    ("iris", "sqeuclidean"): 7897.88,
    ("iris", "cosine"): 0.161835,
    ("iris", "correlation"): 0.370903,
    ("wine", "cityblock"): 23214.8,
    ("wine", "sqeuclidean"): 67196.0,
    ("wine", "cosine"): 0.273201,
    ("wine", "correlation"): 3.19287,
}
WINE_NOTE = "reference trace anomalous (num starts at 13)"

EXIT_CONFIG, EXIT_DATA, EXIT_DOMAIN = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def load_dataset(spec: str, csv_label: str = "none", csv_delimiter: str = ","):
    """``iris``, ``wine``, ``iris:PATH``, ``wine:PATH`` or ``csv:PATH``."""
    name, _, path = spec.partition(":")
    if name == "iris":
        return ingest.load_iris(path or None)
    if name == "wine":
        return ingest.load_wine(path or None)
    if name == "csv" and path:
        schema = ingest.infer_schema(path, csv_label, csv_delimiter)
        return ingest.load_csv(path, schema)
    raise ConfigError(f"unknown dataset {spec!r} (use iris, wine or csv:PATH)")


def _dataset_name(spec: str) -> str:
    name, _, path = spec.partition(":")
    return Path(path).stem if name == "csv" else name


def _metrics(arg: str) -> list[DistanceKind]:
    if arg == "all":
        return list(DistanceKind)
    return [DistanceKind.parse(arg)]


def _dims(text, d: int) -> tuple[int, int]:
    if text is None:
        return (0, 1) if d >= 2 else (0, 0)
    try:
        a, b = (int(t) for t in text.split(","))
    except ValueError:
        raise ConfigError(f"--dims expects two comma-separated column indices, got {text!r}") from None
    if not (0 <= a < d and 0 <= b < d):
        raise ConfigError(f"--dims {text} out of range for {d} columns")
    return a, b


def _config(args, metric: DistanceKind) -> KMeansConfig:
    return KMeansConfig(
        k=args.k,
        metric=metric,
        init=InitStrategy.parse(args.init),
        replicates=args.replicates,
        seed=args.seed,
        max_iters=args.max_iters,
    )


def _load(args, scale=None):
    data = load_dataset(args.dataset, args.csv_label, args.csv_delimiter)
    factor = scale if scale is not None else (1.0 if args.scale is None else args.scale)
    if factor <= 0:
        raise ConfigError(f"--scale must be positive, got {factor}")
    return ingest.scale(data, factor) if factor != 1 else data


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_cluster(args) -> int:
    metrics = _metrics(args.metric)
    if len(metrics) != 1:
        raise ConfigError("cluster runs one metric; use bench or reproduce for all")
    data = _load(args)
    cfg = _config(args, metrics[0])
    dims = _dims(args.dims, data.d)
    result = kmeans(data, cfg)
    text = format_trace(result)
    sys.stdout.write(text)
    out = _out_dir(args)
    sil = None
    if cfg.k >= 2:
        sil = silhouette(prepare(data, cfg.metric), result.assignment)
        (out / "silhouette.svg").write_text(emit_silhouette_svg(sil))
    (out / "trace.txt").write_text(text)
    (out / "result.json").write_text(export_result(result, sil))
    (out / "scatter.svg").write_text(emit_scatter_svg(data, result.assignment, dims,
                                                      title=f"{cfg.metric} clusters"))
    if not result.converged:
        log.warning("run did not converge within max_iters=%d", cfg.max_iters)
    return 0


def cmd_silhouette(args) -> int:
    if args.k < 2:
        raise ConfigError("silhouette analysis needs k >= 2")
    data = _load(args)
    out = _out_dir(args)
    metrics = _metrics(args.metric)
    for metric in metrics:
        cfg = _config(args, metric)
        result = kmeans(data, cfg)
        rep = silhouette(prepare(data, metric), result.assignment)
        print(f"metric\t{metric}")
        print(f"overall mean = {format_sum(rep.overall_mean)}")
        for c, m in enumerate(rep.per_cluster_mean):
            print(f"cluster {c + 1} mean = {format_sum(m)}")
        name = "silhouette.svg" if len(metrics) == 1 else f"silhouette_{metric}.svg"
        (out / name).write_text(emit_silhouette_svg(rep))
    return 0


def _bench_rows(dataset: str, data, args, metrics):
    rows = []
    for metric in metrics:
        cfg = _config(args, metric)
        runs = [kmeans(data, cfg) for _ in range(max(1, args.repeats))]
        rows.append((dataset, metric.value, statistics.median(r.elapsed for r in runs),
                     runs[0].total_sum))
    return rows


def _ranking(rows) -> str:
    ordered = sorted(rows, key=lambda r: (r[2], r[1]))
    return "fastest to slowest: " + " < ".join(f"{r[1]} ({r[2]:.3f}s)" for r in ordered)


def cmd_bench(args) -> int:
    data = _load(args)
    rows = _bench_rows(_dataset_name(args.dataset), data, args, _metrics(args.metric))
    table = emit_benchmark_table(rows)
    sys.stdout.write(table)
    print(_ranking(rows))
    (_out_dir(args) / "bench.csv").write_text(table)
    return 0


def cmd_reproduce(args) -> int:
    iris_scale = 10.0 if args.scale is None else args.scale
    if iris_scale <= 0:
        raise ConfigError(f"--scale must be positive, got {iris_scale}")
    suite = [
        ("iris", ingest.scale(ingest.load_iris(), iris_scale) if iris_scale != 1 else ingest.load_iris()),
        ("wine", ingest.load_wine()),
    ]
    bench, comparison = [], []
    out = _out_dir(args)
    for name, data in suite:
        label = f"{name} (scale {format_sum(iris_scale)})" if name == "iris" else name
        print(f"== {label} ==")
        for metric in DistanceKind:
            cfg = KMeansConfig(k=3, metric=metric, replicates=args.replicates, seed=args.seed,
                               max_iters=args.max_iters)
            result = kmeans(data, cfg)
            print(f"({metric})")
            text = format_trace(result)
            sys.stdout.write(text)
            print()
            (out / f"trace_{name}_{metric}.txt").write_text(text)
            bench.append((name, metric.value, result.elapsed, result.total_sum))
            ref = REFERENCE_SUMS[(name, metric.value)]
            note = WINE_NOTE if name == "wine" else ""
            if name == "iris" and metric in (DistanceKind.CITYBLOCK, DistanceKind.SQEUCLIDEAN) \
                    and iris_scale != 10:
                note = "reference assumes scale 10"
            comparison.append((name, metric.value, result.total_sum, ref, note))
    table = emit_benchmark_table(bench)
    print("== benchmark ==")
    sys.stdout.write(table)
    (out / "bench.csv").write_text(table)
    print()
    print("== comparison ==")
    print("dataset\tmetric\tachieved\treported\trel_dev\tnote")
    for name, metric, got, ref, note in comparison:
        dev = (got - ref) / ref
        print(f"{name}\t{metric}\t{format_sum(got)}\t{format_sum(ref)}\t{dev:+.4%}\t{note}".rstrip("\t"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="distkmeans", description="K-means with pluggable distance measures.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subparsers = {
        "cluster": sub.add_parser("cluster", help="cluster one dataset with one metric"),
        "silhouette": sub.add_parser("silhouette", help="silhouette summary and plot"),
        "bench": sub.add_parser("bench", help="time all metrics on one dataset"),
        "reproduce": sub.add_parser(
            "reproduce", help="iris (x10) and wine, all metrics, k=3, with reference comparison"),
    }
    for common in subparsers.values():
        _add_common(common)
    subparsers["cluster"].set_defaults(func=cmd_cluster)
    subparsers["silhouette"].set_defaults(func=cmd_silhouette)
    bench = subparsers["bench"]
    bench.add_argument("--repeats", type=int, default=3,
                       help="timed runs per metric; the median is reported (default: %(default)s)")
    bench.set_defaults(func=cmd_bench, metric="all")
    subparsers["reproduce"].set_defaults(func=cmd_reproduce)
    return parser


def _add_common(common: argparse.ArgumentParser) -> None:
    default_out = os.environ.get("KMEANS_OUT_DIR", "kmeans_out")
    common.add_argument("--dataset", default="iris",
                        help="iris, wine, iris:PATH, wine:PATH or csv:PATH (default: %(default)s)")
    common.add_argument("--metric", default="sqeuclidean", choices=METRICS + ["all"],
                        help="distance measure (default: %(default)s)")
    common.add_argument("--k", type=int, default=3, help="number of clusters (default: %(default)s)")
    common.add_argument("--replicates", type=int, default=20,
                        help="independent random starts; best is kept (default: %(default)s)")
    common.add_argument("--seed", type=int, default=1, help="64-bit random seed (default: %(default)s)")
    common.add_argument("--max-iters", type=int, default=100,
                        help="iteration cap per phase (default: %(default)s)")
    common.add_argument("--init", default="sample",
                        help="sample, spread or rows:i,j,... (default: %(default)s)")
    common.add_argument("--scale", type=float, default=None,
                        help="multiply every value by this factor (default: 1; reproduce: 10 for iris)")
    common.add_argument("--dims", default=None,
                        help="column pair for the scatter plot, e.g. 2,3 (default: 0,1)")
    common.add_argument("--out-dir", default=default_out,
                        help="directory for file outputs; env KMEANS_OUT_DIR (default: %(default)s)")
    common.add_argument("--csv-label", default="none", choices=["none", "first", "last"],
                        help="label column position for csv:PATH datasets (default: %(default)s)")
    common.add_argument("--csv-delimiter", default=",",
                        help="field delimiter for csv:PATH datasets (default: %(default)r)")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"distkmeans: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (DataError, OSError) as exc:
        print(f"distkmeans: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigError as exc:
        print(f"distkmeans: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
