"""Text, JSON, CSV and SVG renderings of clustering runs."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import ClusteringResult, DataMatrix, DistanceKind, InitStrategy, IterationRecord, KMeansConfig
from .evaluation import SilhouetteReport

# matplotlib's "tab10" colours, first eight
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
)

TRACE_HEADER = "iter\tphase\tnum\tsum"
BEST_PREFIX = "Best total sum of distances = "


def format_sum(value: float) -> str:
    """Six significant digits, no trailing zeros (``1649``, ``0.161835``)."""
    text = "%.6g" % value
    return "0" if text == "-0" else text


def format_trace(result: ClusteringResult) -> str:
    lines = [TRACE_HEADER]
    for rec in result.trace:
        lines.append(f"{rec.iter}\t{rec.phase}\t{rec.num}\t{format_sum(rec.sum)}")
    lines.append(BEST_PREFIX + format_sum(result.total_sum))
    return "\n".join(lines) + "\n"


def parse_trace(text: str):
    """Inverse of :func:`format_trace`: ``(records, best_total)``."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split() != TRACE_HEADER.split():
        raise ValueError("missing trace header")
    records = []
    best = None
    for ln in lines[1:]:
        if ln.startswith(BEST_PREFIX):
            best = float(ln[len(BEST_PREFIX):])
            continue
        it, phase, num, total = ln.split("\t")
        records.append(IterationRecord(int(it), int(phase), int(num), float(total)))
    return records, best


def _config_dict(cfg: Optional[KMeansConfig]):
    if cfg is None:
        return None
    init = {"kind": cfg.init.kind}
    if cfg.init.rows is not None:
        init["rows"] = list(cfg.init.rows)
    if cfg.init.centroids is not None:
        init["centroids"] = [list(c) for c in cfg.init.centroids]
    return {
        "k": cfg.k,
        "metric": cfg.metric.value,
        "init": init,
        "replicates": cfg.replicates,
        "seed": cfg.seed,
        "max_iters": cfg.max_iters,
    }


def export_result(result: ClusteringResult, silhouettes: Optional[SilhouetteReport] = None) -> str:
    """JSON document with sorted keys; equal inputs give identical bytes."""
    doc = {
        "assignment": [int(a) for a in result.assignment],
        "centroids": [[float(v) for v in row] for row in result.centroids],
        "cluster_sums": [float(v) for v in result.cluster_sums],
        "total_sum": float(result.total_sum),
        "total_sum_display": format_sum(result.total_sum),
        "trace": [
            {"iter": r.iter, "phase": r.phase, "num": r.num, "sum": float(r.sum)}
            for r in result.trace
        ],
        "replicate_index": result.replicate_index,
        "elapsed_seconds": float(result.elapsed),
        "converged": bool(result.converged),
        "metric": result.metric.value,
        "config": _config_dict(result.config),
    }
    if silhouettes is not None:
        doc["silhouette"] = {
            "per_point": [float(v) for v in silhouettes.per_point],
            "per_cluster_mean": [float(v) for v in silhouettes.per_cluster_mean],
            "overall_mean": float(silhouettes.overall_mean),
            "overall_mean_display": format_sum(silhouettes.overall_mean),
            "singleton_rule": "points in singleton clusters have silhouette 0",
        }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def load_result(text: str) -> ClusteringResult:
    doc = json.loads(text)
    cfg = None
    if doc.get("config"):
        c = doc["config"]
        init = c["init"]
        if init["kind"] != "explicit":
            strategy = InitStrategy(init["kind"])
        elif "rows" in init:
            strategy = InitStrategy.from_rows(init["rows"])
        else:
            strategy = InitStrategy.from_centroids(init["centroids"])
        cfg = KMeansConfig(c["k"], DistanceKind(c["metric"]), strategy,
                           c["replicates"], c["seed"], c["max_iters"])
    return ClusteringResult(
        assignment=np.array(doc["assignment"], dtype=np.intp),
        centroids=np.array(doc["centroids"], dtype=np.float64),
        cluster_sums=np.array(doc["cluster_sums"], dtype=np.float64),
        total_sum=doc["total_sum"],
        trace=tuple(IterationRecord(**r) for r in doc["trace"]),
        replicate_index=doc["replicate_index"],
        elapsed=doc["elapsed_seconds"],
        metric=DistanceKind(doc["metric"]),
        converged=doc["converged"],
        config=cfg,
    )


def emit_benchmark_table(rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "metric", "seconds", "total_sum"])
    for dataset, metric, seconds, total in rows:
        writer.writerow([dataset, str(metric), f"{seconds:.3f}", format_sum(total)])
    return buf.getvalue()


# ---------------------------------------------------------------- SVG


def nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(count, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _tick_label(v: float) -> str:
    return "%.6g" % (0.0 if abs(v) < 1e-12 else v)


@dataclass
class _Canvas:
    width: int
    height: int
    parts: list = field(default_factory=list)

    def add(self, text: str) -> None:
        self.parts.append(text)

    def render(self) -> str:
        head = (
            '<?xml version="1.0" standalone="no"?>\n'
            '<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" '
            '"http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">\n'
            f'<svg version="1.1" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}" xmlns="http://www.w3.org/2000/svg">\n'
            '<style>text { font-family: sans-serif; font-size: 11px; }</style>\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"


def emit_scatter_svg(data: DataMatrix, assignment, dims=(0, 1), title: str = "") -> str:
    """Scatter of two feature columns, one circle per row coloured by cluster."""
    dx, dy = dims
    if not (0 <= dx < data.d and 0 <= dy < data.d):
        raise ValueError(f"dims {dims} out of range for {data.d} columns")
    assignment = np.asarray(assignment)
    if assignment.shape != (data.n,):
        raise ValueError("assignment length does not match the data")
    xs, ys = data.values[:, dx], data.values[:, dy]
    width, height = 520, 420
    left, right, top, bottom = 60, 130, 30, 50
    xt = nice_ticks(xs.min(), xs.max())
    yt = nice_ticks(ys.min(), ys.max())
    x0, x1 = min(xt[0], xs.min()), max(xt[-1], xs.max())
    y0, y1 = min(yt[0], ys.min()), max(yt[-1], ys.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0
    pw, ph = width - left - right, height - top - bottom

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    c = _Canvas(width, height)
    if title:
        c.add(f'<text x="{left}" y="18">{title}</text>')
    c.add(f'<g class="axes" stroke="#333" fill="none">'
          f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}"/>'
          f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}"/></g>')
    for t in xt:
        c.add(f'<text x="{sx(t):.2f}" y="{top + ph + 16}" text-anchor="middle">{_tick_label(t)}</text>')
    for t in yt:
        c.add(f'<text x="{left - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{_tick_label(t)}</text>')
    c.add(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">column {dx}</text>')
    c.add(f'<text x="14" y="{top + ph / 2:.1f}" transform="rotate(-90 14 {top + ph / 2:.1f})" '
          f'text-anchor="middle">column {dy}</text>')
    for i in range(data.n):
        cl = int(assignment[i])
        c.add(f'<circle cx="{sx(xs[i]):.2f}" cy="{sy(ys[i]):.2f}" r="3" '
              f'fill="{PALETTE[cl % len(PALETTE)]}" class="point cluster-{cl}"/>')
    for j, cl in enumerate(sorted(set(int(a) for a in assignment))):
        ly = top + 10 + 18 * j
        c.add(f'<rect x="{left + pw + 20}" y="{ly - 8}" width="10" height="10" '
              f'fill="{PALETTE[cl % len(PALETTE)]}" class="legend"/>')
        c.add(f'<text x="{left + pw + 36}" y="{ly + 1}">cluster {cl + 1}</text>')
    return c.render()


def emit_silhouette_svg(report: SilhouetteReport, title: str = "") -> str:
    """Horizontal silhouette bars, grouped by cluster and sorted descending."""
    s = np.asarray(report.per_point)
    assignment = np.asarray(report.assignment)
    k = len(report.per_cluster_mean)
    bar, gap = 3, 10
    width = 520
    left, right, top, bottom = 90, 30, 40, 50
    pw = width - left - right
    height = top + bottom + len(s) * bar + gap * (k - 1)

    def sx(v):
        return left + (v + 1.0) / 2.0 * pw

    c = _Canvas(width, height)
    c.add(f'<text x="{left}" y="16">{title or "silhouette"} ({report.metric})</text>')
    y = top
    for cl in range(k):
        idx = np.flatnonzero(assignment == cl)
        vals = np.sort(s[idx])[::-1]
        y_start = y
        for v in vals:
            x_lo, x_hi = sorted((sx(0.0), sx(v)))
            c.add(f'<rect class="bar" x="{x_lo:.2f}" y="{y}" width="{x_hi - x_lo:.2f}" '
                  f'height="{bar}" fill="{PALETTE[cl % len(PALETTE)]}"/>')
            y += bar
        mid = (y_start + y) / 2
        c.add(f'<text x="{left - 6}" y="{mid + 4:.1f}" text-anchor="end" class="cluster-mean">'
              f'cluster {cl + 1} mean = {format_sum(report.per_cluster_mean[cl])}</text>')
        y += gap
    plot_bottom = y - gap
    c.add(f'<line x1="{sx(0):.2f}" y1="{top}" x2="{sx(0):.2f}" y2="{plot_bottom}" stroke="#333"/>')
    mx = sx(report.overall_mean)
    c.add(f'<line x1="{mx:.2f}" y1="{top}" x2="{mx:.2f}" y2="{plot_bottom}" '
          f'stroke="#d62728" stroke-dasharray="4 3"/>')
    c.add(f'<text x="{left + pw}" y="{top - 8}" text-anchor="end" class="overall-mean">'
          f'overall mean = {format_sum(report.overall_mean)}</text>')
    c.add(f'<line x1="{left}" y1="{plot_bottom + 4}" x2="{left + pw}" y2="{plot_bottom + 4}" stroke="#333"/>')
    for t in (-1.0, -0.5, 0.0, 0.5, 1.0):
        c.add(f'<text x="{sx(t):.2f}" y="{plot_bottom + 20}" text-anchor="middle">{_tick_label(t)}</text>')
    c.add(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">silhouette value</text>')
    return c.render()


@dataclass(frozen=True)
class RunArtifacts:
    trace_text: str
    result_json: str
    plots: tuple  # (name, svg text) pairs


def build_artifacts(data: DataMatrix, result: ClusteringResult,
                    silhouettes: Optional[SilhouetteReport] = None, dims=(0, 1)) -> RunArtifacts:
    plots = [("scatter.svg", emit_scatter_svg(data, result.assignment, dims,
                                              title=f"{result.metric} clusters"))]
    if silhouettes is not None:
        plots.append(("silhouette.svg", emit_silhouette_svg(silhouettes)))
    return RunArtifacts(format_trace(result), export_result(result, silhouettes), tuple(plots))
