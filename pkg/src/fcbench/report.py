"""Leaderboard rendering: markdown, CSV and JSON."""

from __future__ import annotations

import csv
import io

from fcbench._io import format_float, to_json
from fcbench.aggregate import AggregateReport, model_order

LEADERBOARD_COLUMNS = (
    "model",
    "avg_win_rate_pct",
    "skill_score_pct",
    "median_runtime_s",
    "leakage_pct",
    "num_failures",
    "average_rank",
    "bt_score",
)


def _num(x) -> str:
    return "" if x is None else format_float(x)


def leaderboard_markdown(report: AggregateReport) -> str:
    title = f"metric: {report.metric or 'per-task eval_metric'}, baseline: {report.baseline}, tasks: {len(report.task_names)}"
    lines = [
        f"<!-- {title} -->",
        "| Model | Avg. win rate (%) | Skill score (%) | Median runtime (s) | Leakage (%) | # failures |",
        "|:--|--:|--:|--:|--:|--:|",
    ]
    for r in report.rows:
        runtime = "-" if r.median_runtime_s is None else f"{r.median_runtime_s:.1f}"
        lines.append(
            f"| {r.model} | {100 * r.win_rate:.1f} | {100 * r.skill_score:.1f} | {runtime} "
            f"| {r.leakage_pct:.0f} | {r.failures} |"
        )
    return "\n".join(lines) + "\n"


def leaderboard_csv(report: AggregateReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEADERBOARD_COLUMNS)
    for r in report.rows:
        w.writerow(
            [
                r.model,
                _num(100 * r.win_rate),
                _num(100 * r.skill_score),
                _num(r.median_runtime_s),
                _num(r.leakage_pct),
                r.failures,
                _num(r.average_rank),
                _num(r.bt_score),
            ]
        )
    return buf.getvalue()


def pairwise_csv(report: AggregateReport) -> str:
    """Long format: one row per ordered model pair, with both statistics and their bounds."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "opponent", "win_rate", "win_rate_lower", "win_rate_upper", "skill", "skill_lower", "skill_upper"])
    order = model_order(report)
    W, S = report.pairwise_win_rate, report.pairwise_skill
    wi, si = report.win_rate_interval, report.skill_interval
    for j in order:
        for k in order:
            if j == k:
                continue
            w.writerow(
                [
                    report.model_names[j],
                    report.model_names[k],
                    _num(W[j, k]),
                    _num(wi.lower[j, k]),
                    _num(wi.upper[j, k]),
                    _num(S[j, k]),
                    _num(si.lower[j, k]),
                    _num(si.upper[j, k]),
                ]
            )
    return buf.getvalue()


def pairwise_markdown(report: AggregateReport, which: str = "win_rate") -> str:
    order = model_order(report)
    names = [report.model_names[i] for i in order]
    if which == "win_rate":
        mat, ci = report.pairwise_win_rate, report.win_rate_interval
    else:
        mat, ci = report.pairwise_skill, report.skill_interval
    lines = ["| | " + " | ".join(names) + " |", "|:--|" + "--:|" * len(names)]
    for j in order:
        cells = []
        for k in order:
            if j == k:
                cells.append("-")
            else:
                cells.append(f"{100 * mat[j, k]:.1f} [{100 * ci.lower[j, k]:.1f}, {100 * ci.upper[j, k]:.1f}]")
        lines.append(f"| {report.model_names[j]} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def report_json(report: AggregateReport) -> str:
    return to_json(report.to_dict()) + "\n"


def render(report: AggregateReport, fmt: str) -> dict[str, str]:
    """File name -> content for one output format."""
    if fmt == "md":
        body = (
            leaderboard_markdown(report)
            + "\n## Pairwise win rate (%) with confidence bounds\n\n"
            + pairwise_markdown(report, "win_rate")
            + "\n## Pairwise skill score (%) with confidence bounds\n\n"
            + pairwise_markdown(report, "skill")
        )
        return {"leaderboard.md": body}
    if fmt == "csv":
        return {"leaderboard.csv": leaderboard_csv(report), "pairwise.csv": pairwise_csv(report)}
    if fmt == "json":
        return {"report.json": report_json(report)}
    raise ValueError(f"unknown format {fmt!r}")

