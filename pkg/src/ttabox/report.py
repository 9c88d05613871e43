"""Human tables, machine-readable report documents, CSV output, and figures.

Everything written here is deterministic for a fixed configuration: no
timestamps or runtimes go into files, so repeated runs produce byte-identical
artifacts (runtimes are printed to stdout only).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .coco_io import SCHEMA_VERSION, write_json
from .evaluation import EvalReport

_BUCKET_ORDER = ("small", "medium", "large")


@dataclass
class StrategyResult:
    """One row of the strategy comparison: name, views, APs, counts, runtime."""

    name: str
    n_views: int
    ap50: float
    ap50_conf_none: float
    ap_small: float | None
    tp: int
    fp: int
    fn: int
    runtime_s: float = 0.0


def _fmt_ap(value: float | None) -> str:
    return "--" if value is None else f"{value:.4f} ({value * 100:.2f}%)"


def format_eval_table(report: EvalReport, iou_thr: float) -> str:
    lines = [f"AP@{iou_thr:.2f}: {_fmt_ap(report.ap50)}"]
    for bucket in _BUCKET_ORDER:
        lines.append(f"  {bucket:<6} {_fmt_ap(report.per_bucket.get(bucket))}")
    c = report.counts
    lines.append(f"counts: TP={c.tp} FP={c.fp} FN={c.fn}")
    return "\n".join(lines)


def eval_report_doc(report: EvalReport, iou_thr: float) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "type": "eval_report",
        "iou_thr": iou_thr,
        "ap50": report.ap50,
        "ap50_percent": report.ap50 * 100.0,
        "per_bucket": {k: report.per_bucket.get(k) for k in _BUCKET_ORDER},
        "counts": {"tp": report.counts.tp, "fp": report.counts.fp, "fn": report.counts.fn},
        "recall_points": list(report.recall_points),
        "precision_curve": list(report.precision_curve),
    }


def write_eval_report(report: EvalReport, iou_thr: float, path: str | Path) -> None:
    write_json(eval_report_doc(report, iou_thr), Path(path))


def plot_pr_curves(
    curves: Sequence[tuple[str, EvalReport]], path: str | Path, iou_thr: float = 0.5
) -> None:
    """Interpolated precision-recall curves, one line per labeled report."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for label, report in curves:
        ax.plot(report.recall_points, report.precision_curve, label=label, linewidth=1.5)
    ax.set_xlabel("recall")
    ax.set_ylabel("interpolated precision")
    ax.set_title(f"Precision-recall at IoU {iou_thr:.2f}")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    if curves:
        ax.legend(loc="lower left", fontsize=8)
    _save_fig(fig, path)


def plot_strategy_ap(rows: Sequence[StrategyResult], path: str | Path) -> None:
    """Bar chart of AP by strategy, both confidence modes side by side."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    x = range(len(rows))
    width = 0.38
    ax.bar(
        [i - width / 2 for i in x],
        [r.ap50 for r in rows],
        width=width,
        label="conf scaled by views",
    )
    ax.bar(
        [i + width / 2 for i in x],
        [r.ap50_conf_none for r in rows],
        width=width,
        label="plain mean conf",
    )
    ax.set_xticks(list(x))
    ax.set_xticklabels([r.name for r in rows], rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("AP@0.50")
    ax.set_ylim(0.0, 1.0)
    ax.set_title("Strategy comparison")
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend(fontsize=8)
    _save_fig(fig, path)


def _save_fig(fig, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_strategy_csv(rows: Sequence[StrategyResult], path: str | Path) -> None:
    """Delimited companion to the figures; runtime is deliberately omitted."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["strategy", "n_views", "ap50", "ap50_conf_none", "ap_small", "tp", "fp", "fn"]
        )
        for r in rows:
            writer.writerow(
                [
                    r.name,
                    r.n_views,
                    f"{r.ap50:.6f}",
                    f"{r.ap50_conf_none:.6f}",
                    "" if r.ap_small is None else f"{r.ap_small:.6f}",
                    r.tp,
                    r.fp,
                    r.fn,
                ]
            )


def format_strategy_table(rows: Sequence[StrategyResult]) -> str:
    name_w = max([len(r.name) for r in rows] + [len("strategy")])
    header = (
        f"{'strategy':<{name_w}}  views  {'AP@0.50':>8}  {'AP(conf=none)':>13}  "
        f"{'AP small':>8}  {'runtime':>8}"
    )
    lines = [header, "-" * len(header)]
    for r in rows:
        small = "--" if r.ap_small is None else f"{r.ap_small:.4f}"
        lines.append(
            f"{r.name:<{name_w}}  {r.n_views:>5}  {r.ap50:>8.4f}  "
            f"{r.ap50_conf_none:>13.4f}  {small:>8}  {r.runtime_s:>7.2f}s"
        )
    return "\n".join(lines)
