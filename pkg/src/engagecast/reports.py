"""CSV emitters for benchmark, trend, importance, and ablation outputs."""

from __future__ import annotations

import csv
from typing import IO, Mapping, Sequence

from .benchmark import table2_rows, table4_rows


def write_table2_csv(report: dict, stream: IO[str]) -> None:
    rows = table2_rows(report)
    writer = csv.writer(stream)
    writer.writerow(
        ["target", "baseline_mae", "top_model", "top_model_mae",
         "delta_pct", "error_reduction_pct"]
    )
    for r in rows:
        writer.writerow(
            [r["target"], f"{r['baseline_mae']:.4f}", r["top_model"],
             f"{r['top_model_mae']:.4f}", f"{r['delta_pct']:.1f}",
             f"{r['error_reduction_pct']:.1f}"]
        )


def write_table4_csv(report: dict, stream: IO[str]) -> None:
    rows = table4_rows(report)
    if not rows:
        return
    columns = list(rows[0].keys())
    writer = csv.writer(stream)
    writer.writerow(columns)
    for r in rows:
        writer.writerow(
            [
                f"{r[c]:.4f}" if isinstance(r[c], float) else ("" if r[c] is None else r[c])
                for c in columns
            ]
        )


def write_trends_csv(report: dict, stream: IO[str]) -> None:
    """Combined long-format series with a leading target column."""
    writer = csv.writer(stream)
    writer.writerow(["target", "week", "truth_mean", "truth_std", "model", "pred_mean"])
    for target, rows in sorted(report["trends"].items()):
        for rec in rows:
            for model, pred in sorted(rec["pred_mean"].items()):
                writer.writerow(
                    [target, rec["week"], repr(rec["truth_mean"]),
                     repr(rec["truth_std"]), model, repr(pred)]
                )


def write_target_trend_csv(report: dict, target: str, stream: IO[str]) -> None:
    """One target's series in the exact wire format:
    week,truth_mean,truth_std,model,pred_mean."""
    writer = csv.writer(stream)
    writer.writerow(["week", "truth_mean", "truth_std", "model", "pred_mean"])
    for rec in report["trends"][target]:
        for model, pred in sorted(rec["pred_mean"].items()):
            writer.writerow(
                [rec["week"], repr(rec["truth_mean"]), repr(rec["truth_std"]),
                 model, repr(pred)]
            )


def write_importance_csv(importance_report: dict, stream: IO[str]) -> None:
    writer = csv.writer(stream)
    writer.writerow(["target", "model", "feature", "importance"])
    for target, block in sorted(importance_report["targets"].items()):
        for model, table in sorted(block["models"].items()):
            for feature, value in sorted(
                table["per_feature"].items(), key=lambda kv: -kv[1]
            ):
                writer.writerow([target, model, feature, repr(value)])


def write_group_weights_csv(importance_report: dict, stream: IO[str]) -> None:
    writer = csv.writer(stream)
    writer.writerow(["target", "model", "group", "weight"])
    for target, block in sorted(importance_report["targets"].items()):
        for model, table in sorted(block["models"].items()):
            for group, weight in sorted(table["group_weights"].items()):
                writer.writerow([target, model, group, repr(weight)])


def write_ablation_csv(
    results_by_target: Mapping[str, Sequence[dict]], stream: IO[str]
) -> None:
    writer = csv.writer(stream)
    writer.writerow(
        ["target", "condition", "mae", "delta_pct_vs_full",
         "ci_lower", "ci_upper", "significant"]
    )
    for target, results in sorted(results_by_target.items()):
        for r in results:
            writer.writerow(
                [target, r["condition"], f"{r['mae']:.6f}",
                 f"{r['delta_pct_vs_full']:.4f}", f"{r['ci_lower']:.6f}",
                 f"{r['ci_upper']:.6f}", int(r["significant"])]
            )
