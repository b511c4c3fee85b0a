"""Aggregate per-run summaries into CSV tables and learning-curve plots."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .. import instances
from .experiment import ExperimentError, ExperimentSpec, load_summaries, reeval_path, run_paths
from .metrics import AggregateCurve, aggregate, approximation_ratio

METRICS = ("r", "cost", "exact_r", "exact_cost")


def run_curves(spec: ExperimentSpec, label: str, metric: str = "r") -> list[list[tuple[float, float]]]:
    """One (shots, metric) curve per run of a cell."""
    if metric not in METRICS:
        raise ExperimentError(f"unknown metric {metric!r}; choose from {METRICS}")
    manifest = spec.load_manifest()
    extrema = {}
    curves = []
    for summary in load_summaries(spec, label):
        iid = summary["instance_id"]
        if metric.startswith("exact"):
            _, summary_path = run_paths(spec.output_dir, label, iid, summary["repeat"])
            path = reeval_path(summary_path)
            if not path.exists():
                raise ExperimentError(f"{path} missing; run `reeval` first")
            points = json.loads(path.read_text())["curve"]
        else:
            points = summary["learning_curve"]
        if summary["config"]["shots"] == 0:
            # exact-mode runs spend no shots; use the evaluation count as x
            points = [(k + 1, v) for k, (_, v) in enumerate(points)]
        if metric.endswith("r"):
            if iid not in extrema:
                extrema[iid] = instances.brute_force_extrema(manifest.instance(iid))
            points = [(s, approximation_ratio(v, extrema[iid])) for s, v in points]
        curves.append([(float(s), float(v)) for s, v in points])
    return curves


def aggregate_cell(spec: ExperimentSpec, label: str, metric: str = "r", grid=None) -> AggregateCurve:
    grid = grid if grid is not None else spec.aggregation.get("grid")
    return aggregate(run_curves(spec, label, metric), grid)


def csv_header(metric: str) -> list[str]:
    return ["shots", f"mean_{metric}", "half_width"]


def write_csv(path: Path, curve: AggregateCurve, metric: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_header(metric))
        for s, m, h in curve.rows():
            writer.writerow([repr(s), repr(m), repr(h)])


def read_csv(path: Path) -> list[tuple[float, float, float]]:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    return [tuple(float(v) for v in row) for row in rows[1:]]


def report(spec: ExperimentSpec, metrics=None, out_dir=None, plot: bool = True) -> list[Path]:
    """Write <out>/<label>.<metric>.csv per cell and one PNG per metric."""
    metrics = metrics or [spec.aggregation.get("metric", "r")]
    out_dir = Path(out_dir) if out_dir is not None else spec.output_dir / "report"
    written = []
    for metric in metrics:
        curves = {}
        for cell in spec.cells:
            curve = aggregate_cell(spec, cell.label, metric)
            path = out_dir / f"{cell.label}.{metric}.csv"
            write_csv(path, curve, metric)
            written.append(path)
            curves[cell.label] = curve
        if plot:
            written.append(plot_curves(spec, curves, metric, out_dir / f"{metric}.png"))
    return written


def plot_curves(spec: ExperimentSpec, curves: dict[str, AggregateCurve], metric: str, path: Path) -> Path:
    """One panel per shots-per-evaluation value, one line per cell."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_shots: dict[int, list[str]] = {}
    for cell in spec.cells:
        by_shots.setdefault(cell.shots, []).append(cell.label)
    fig, axes = plt.subplots(1, len(by_shots), figsize=(5 * len(by_shots), 4), squeeze=False)
    for ax, (shots, labels) in zip(axes[0], sorted(by_shots.items())):
        for label in labels:
            c = curves[label]
            ax.errorbar(c.grid, c.mean, yerr=c.half_width, label=label, capsize=2, marker=".", ms=3)
        ax.set_xscale("log")
        ax.set_xlabel("run shot cost")
        ax.set_ylabel(metric)
        ax.set_title(f"{shots} shots per evaluation" if shots else "exact evaluation")
        ax.legend(fontsize="small")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def value_at(curve: AggregateCurve, shots: float) -> tuple[float, float]:
    """Aggregate mean and half-width at the last grid point <= ``shots``."""
    k = int(np.searchsorted(curve.grid, shots, side="right")) - 1
    if k < 0:
        raise ValueError(f"no aggregated data at or before {shots} shots")
    return float(curve.mean[k]), float(curve.half_width[k])
