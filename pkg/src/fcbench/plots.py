"""Leaderboard figures.

Figures are drawn on standalone ``Figure`` objects with the Agg canvas, so no
global pyplot state is touched and several reports can render concurrently.
PNG metadata is stripped of the matplotlib version so reruns are byte-identical.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from fcbench.aggregate import AggregateReport, model_order

_STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
}


def _new_figure(width: float, height: float) -> Figure:
    fig = Figure(figsize=(width, height), dpi=100)
    FigureCanvasAgg(fig)
    return fig


def _save(fig: Figure, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    fig.savefig(tmp, format="png", metadata={"Software": None})
    os.replace(tmp, path)
    return path


def plot_marginal(report: AggregateReport, path: str | os.PathLike) -> Path:
    """Horizontal bars of average win rate and skill score, leaderboard order."""
    import matplotlib as mpl

    names = [r.model for r in report.rows][::-1]
    win = np.array([r.win_rate for r in report.rows][::-1]) * 100
    skill = np.array([r.skill_score for r in report.rows][::-1]) * 100
    with mpl.rc_context(_STYLE):
        fig = _new_figure(9, 0.35 * len(names) + 1.2)
        ax1, ax2 = fig.subplots(1, 2, sharey=True)
        y = np.arange(len(names))
        ax1.barh(y, win, color="#4C72B0")
        ax1.set_yticks(y, names)
        ax1.set_xlabel("Avg. win rate (%)")
        ax1.set_xlim(0, 100)
        ax2.barh(y, skill, color=np.where(skill >= 0, "#55A868", "#C44E52"))
        ax2.axvline(0, color="black", lw=0.8)
        ax2.set_xlabel(f"Skill score vs {report.baseline} (%)")
        fig.suptitle(f"Leaderboard ({report.metric or 'eval_metric'}, {len(report.task_names)} tasks)")
        fig.tight_layout()
        return _save(fig, path)


def plot_pairwise(report: AggregateReport, which: str, path: str | os.PathLike, top_k: int = 3) -> Path:
    """Point estimates and confidence bounds of the top-k models against every other model."""
    import matplotlib as mpl

    if which == "win_rate":
        mat, ci, ref, label = report.pairwise_win_rate, report.win_rate_interval, 0.5, "Pairwise win rate (%)"
    elif which == "skill":
        mat, ci, ref, label = report.pairwise_skill, report.skill_interval, 0.0, "Pairwise skill score (%)"
    else:
        raise ValueError("which must be 'win_rate' or 'skill'")
    order = model_order(report)
    top = order[: max(1, min(top_k, len(order)))]
    with mpl.rc_context(_STYLE):
        fig = _new_figure(3.2 * len(top) + 0.8, 0.32 * len(order) + 1.4)
        axes = np.atleast_1d(fig.subplots(1, len(top), sharey=True, squeeze=False)[0])
        for ax, j in zip(axes, top):
            others = [k for k in order if k != j][::-1]
            y = np.arange(len(others))
            est = mat[j, others] * 100
            lo = ci.lower[j, others] * 100
            hi = ci.upper[j, others] * 100
            ax.errorbar(est, y, xerr=[est - lo, hi - est], fmt="o", ms=4, capsize=2, color="#4C72B0")
            ax.axvline(ref * 100, color="grey", lw=0.8, ls="--")
            ax.set_yticks(y, [report.model_names[k] for k in others])
            ax.set_title(report.model_names[j])
            ax.set_xlabel(label)
        fig.tight_layout()
        return _save(fig, path)


def plot_pairwise_matrix(report: AggregateReport, which: str, path: str | os.PathLike) -> Path:
    """Annotated heatmap of a pairwise statistic (row model vs column model)."""
    import matplotlib as mpl

    order = model_order(report)
    mat = report.pairwise_win_rate if which == "win_rate" else report.pairwise_skill
    sub = mat[np.ix_(order, order)] * 100
    names = [report.model_names[i] for i in order]
    n = len(names)
    with mpl.rc_context(_STYLE):
        fig = _new_figure(0.55 * n + 2.5, 0.5 * n + 1.5)
        ax = fig.subplots()
        if which == "win_rate":
            im = ax.imshow(sub, cmap="RdBu", vmin=0, vmax=100)
        else:
            lim = max(1.0, float(np.nanmax(np.abs(sub))))
            im = ax.imshow(sub, cmap="RdBu", vmin=-lim, vmax=lim)
        ax.set_xticks(range(n), names, rotation=45, ha="right")
        ax.set_yticks(range(n), names)
        if n <= 16:
            for a in range(n):
                for b in range(n):
                    if a != b:
                        ax.text(b, a, f"{sub[a, b]:.0f}", ha="center", va="center", fontsize=7)
        fig.colorbar(im, ax=ax, label="win rate (%)" if which == "win_rate" else "skill score (%)")
        fig.tight_layout()
        return _save(fig, path)


def render_figures(report: AggregateReport, out_dir: str | os.PathLike) -> list[Path]:
    out = Path(out_dir)
    return [
        plot_marginal(report, out / "marginal.png"),
        plot_pairwise(report, "win_rate", out / "pairwise_win_rate.png"),
        plot_pairwise(report, "skill", out / "pairwise_skill.png"),
        plot_pairwise_matrix(report, "win_rate", out / "pairwise_win_rate_matrix.png"),
        plot_pairwise_matrix(report, "skill", out / "pairwise_skill_matrix.png"),
    ]
