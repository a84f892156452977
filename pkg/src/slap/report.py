"""Summary artifacts: aggregate CSV tables plus matplotlib figures rendered to
files next to them."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from slap.pipeline import EvalRecord, read_records  # noqa: E402


def collect_result_files(in_dir: str | Path) -> list[EvalRecord]:
    records: list[EvalRecord] = []
    for path in sorted(Path(in_dir).rglob("results*.csv")):
        records.extend(read_records(path))
    return records


def summarize(records: Sequence[EvalRecord]) -> list[dict]:
    """Per-method success rate and plan length (mean +/- unbiased std over
    seeds), with relative path length aggregated both per-task-first and
    pooled."""
    methods = sorted({r.method for r in records})
    rows = []
    for method in methods:
        recs = [r for r in records if r.method == method]
        seeds = sorted({r.seed for r in recs})
        per_seed_means = [
            float(np.mean([r.plan_length for r in recs if r.seed == s]))
            for s in seeds
        ]
        std = float(np.std(per_seed_means, ddof=1)) \
            if len(seeds) > 1 else 0.0
        rows.append({
            "method": method,
            "n_seeds": len(seeds),
            "n_records": len(recs),
            "success_rate": sum(r.success for r in recs) / len(recs),
            "plan_length_mean": float(np.mean([r.plan_length
                                               for r in recs])),
            "plan_length_std_over_seeds": std,
            "relative_path_length_per_task": float(
                np.mean([r.relative_path_length for r in recs])),
            "relative_path_length_pooled": float(
                np.sum([r.plan_length for r in recs])
                / max(1, _paired_pure_total(records, recs))),
        })
    return rows


def _paired_pure_total(all_records: Sequence[EvalRecord],
                       recs: Sequence[EvalRecord]) -> int:
    """Total pure-planning plan length over the same (seed, task) pairs,
    within the same protocol (standard, _objgen, or _goalgen)."""
    method = recs[0].method
    suffix = ""
    for tag in ("_objgen", "_goalgen"):
        if method.endswith(tag):
            suffix = tag
    pure_rows = {(r.seed, r.task_id): r.plan_length
                 for r in all_records if r.method == "pure" + suffix}
    total = 0
    for r in recs:
        total += pure_rows.get((r.seed, r.task_id), r.plan_length)
    return total


def write_summary(rows: list[dict], out_dir: Path) -> None:
    cols = list(rows[0]) if rows else ["method"]
    lines = ["# relative_path_length_per_task averages per-task ratios; "
             "relative_path_length_pooled divides summed lengths",
             ",".join(cols)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in cols))
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n",
                                         encoding="utf-8")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_dynamics(rows: list[dict], out_dir: Path) -> list[str]:
    """Training-dynamics table; returns soft-check warnings (reported, not
    fatal)."""
    warnings = []
    cols = ["episodes", "shortcuts_validated", "mean_plan_length",
            "std_plan_length", "success_rate"]
    lines = [",".join(cols)]
    for row in sorted(rows, key=lambda r: r["episodes"]):
        lines.append(",".join(_fmt(row[c]) for c in cols))
    (out_dir / "dynamics.csv").write_text("\n".join(lines) + "\n",
                                          encoding="utf-8")
    ordered = sorted(rows, key=lambda r: r["episodes"])
    for a, b in zip(ordered, ordered[1:]):
        slack = a.get("std_plan_length", 0.0)
        if b["mean_plan_length"] > a["mean_plan_length"] + slack:
            warnings.append(
                f"plan length rose from {a['mean_plan_length']:.1f} to "
                f"{b['mean_plan_length']:.1f} between episodes "
                f"{a['episodes']} and {b['episodes']} (beyond one std)")
    return warnings


def write_ablation(rows: list[dict], out_dir: Path) -> None:
    cols = ["ratio", "k", "n", "surviving", "success_rate",
            "mean_plan_length"]
    lines = [",".join(cols)]
    for row in sorted(rows, key=lambda r: r["ratio"]):
        lines.append(",".join(_fmt(row[c]) for c in cols))
    (out_dir / "ablation.csv").write_text("\n".join(lines) + "\n",
                                          encoding="utf-8")


# ----------------------------------------------------------------------
# Figures.

def plot_summary(rows: list[dict], out_dir: Path) -> None:
    if not rows:
        return
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    methods = [r["method"] for r in rows]
    lengths = [r["plan_length_mean"] for r in rows]
    errs = [r["plan_length_std_over_seeds"] for r in rows]
    succ = [100 * r["success_rate"] for r in rows]
    axes[0].bar(methods, lengths, yerr=errs, color="#4878cf")
    axes[0].set_ylabel("plan length (steps)")
    axes[0].tick_params(axis="x", rotation=30)
    axes[1].bar(methods, succ, color="#6acc65")
    axes[1].set_ylabel("success rate (%)")
    axes[1].set_ylim(0, 105)
    axes[1].tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(out_dir / "summary.png", dpi=150)
    plt.close(fig)


def plot_dynamics(rows: list[dict], out_dir: Path) -> None:
    if not rows:
        return
    ordered = sorted(rows, key=lambda r: r["episodes"])
    eps = [r["episodes"] for r in ordered]
    fig, ax1 = plt.subplots(figsize=(6, 3.5))
    ax1.plot(eps, [r["shortcuts_validated"] for r in ordered], "o-",
             color="#4878cf", label="validated shortcut edges")
    ax1.set_xlabel("training episodes")
    ax1.set_ylabel("validated shortcut edges", color="#4878cf")
    ax2 = ax1.twinx()
    means = np.array([r["mean_plan_length"] for r in ordered])
    stds = np.array([r["std_plan_length"] for r in ordered])
    ax2.plot(eps, means, "s-", color="#d65f5f", label="plan length")
    ax2.fill_between(eps, means - stds, means + stds, color="#d65f5f",
                     alpha=0.2)
    ax2.set_ylabel("mean plan length", color="#d65f5f")
    fig.tight_layout()
    fig.savefig(out_dir / "dynamics.png", dpi=150)
    plt.close(fig)


def plot_ablation(rows: list[dict], out_dir: Path) -> None:
    if not rows:
        return
    ordered = sorted(rows, key=lambda r: r["ratio"])
    ratios = [r["ratio"] for r in ordered]
    fig, ax1 = plt.subplots(figsize=(6, 3.5))
    ax1.plot(ratios, [r["surviving"] for r in ordered], "o-",
             color="#4878cf")
    ax1.set_xlabel("keep threshold K/N (%)")
    ax1.set_ylabel("surviving candidates", color="#4878cf")
    ax2 = ax1.twinx()
    ax2.plot(ratios, [r["mean_plan_length"] for r in ordered], "s-",
             color="#d65f5f")
    ax2.set_ylabel("mean plan length", color="#d65f5f")
    fig.tight_layout()
    fig.savefig(out_dir / "ablation.png", dpi=150)
    plt.close(fig)


def make_report(in_dir: str | Path, out_dir: str | Path) -> list[str]:
    """Aggregate every result file under ``in_dir`` into summary tables and
    figures; returns soft-check warnings."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    warnings: list[str] = []
    records = collect_result_files(in_dir)
    if records:
        rows = summarize(records)
        write_summary(rows, out)
        plot_summary(rows, out)
    dyn_path = Path(in_dir) / "dynamics_raw.csv"
    if dyn_path.exists():
        rows = _read_csv_dicts(dyn_path)
        warnings.extend(write_dynamics(rows, out))
        plot_dynamics(rows, out)
    abl_path = Path(in_dir) / "ablation_raw.csv"
    if abl_path.exists():
        rows = _read_csv_dicts(abl_path)
        write_ablation(rows, out)
        plot_ablation(rows, out)
    for w in warnings:
        print(f"warning: {w}")
    return warnings


def write_raw_dicts(rows: list[dict], path: str | Path) -> None:
    if not rows:
        Path(path).write_text("", encoding="utf-8")
        return
    cols = list(rows[0])
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_csv_dicts(path: Path) -> list[dict]:
    lines = path.read_text(encoding="utf-8").strip().split("\n")
    cols = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        row = {}
        for c, v in zip(cols, line.split(",")):
            try:
                row[c] = int(v)
            except ValueError:
                try:
                    row[c] = float(v)
                except ValueError:
                    row[c] = v
        rows.append(row)
    return rows
