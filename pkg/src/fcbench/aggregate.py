"""Cross-task aggregation: win rates, skill scores, bootstrap intervals.

Everything here works on an ``R x M`` error matrix ``E`` (tasks by models,
lower is better).  Win rates count half a win for ties.  Skill scores are one
minus the geometric mean of clipped error ratios against a reference column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from fcbench.errors import (
    BaselineIncompleteError,
    MissingTaskScoreError,
    NonConvergenceError,
    ZeroBaselineError,
    ZeroReferenceError,
)
from fcbench.task import EvaluationSummary

CLIP_LOWER = 1e-2
CLIP_UPPER = 100.0
ELO_SCALE = math.log(10.0) / 400.0

STATISTICS = ("pairwise_win_rate", "pairwise_skill", "win_rate", "skill_score")


# ---------------------------------------------------------------------------
# error matrix


@dataclass(frozen=True)
class Imputation:
    task_name: str
    model_name: str
    reason: str  # "failure" or "leakage"
    source_model: str


@dataclass(frozen=True)
class ErrorMatrix:
    values: np.ndarray
    task_names: tuple[str, ...]
    model_names: tuple[str, ...]
    baseline_index: int
    failure_mask: np.ndarray
    leakage_mask: np.ndarray
    imputation_log: tuple[Imputation, ...] = ()
    runtime_s: np.ndarray | None = None  # R x M, NaN where unknown
    metric: str | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def baseline_name(self) -> str:
        return self.model_names[self.baseline_index]

    def index_of(self, model: str) -> int:
        return self.model_names.index(model)


def build_error_matrix(
    summaries: Iterable[EvaluationSummary],
    metric_name: str | None = None,
    baseline_name: str = "seasonal_naive",
    reference_model_name: str | None = None,
) -> ErrorMatrix:
    """Assemble ``E`` from evaluation summaries and apply the imputation policy.

    * failed run  -> the baseline's score on that task
    * leaked task -> the reference model's (final) score on that task; the
      reference defaults to the baseline, and a leaking reference itself falls
      back to the baseline

    ``metric_name=None`` uses each task's configured ``eval_metric``.
    """
    summaries = list(summaries)
    reference = reference_model_name or baseline_name
    tasks: dict[str, None] = {}
    models: dict[str, None] = {}
    cells: dict[tuple[str, str], EvaluationSummary] = {}
    for s in summaries:
        tasks.setdefault(s.task_name, None)
        models.setdefault(s.model_name, None)
        key = (s.task_name, s.model_name)
        if key in cells:
            raise ValueError(f"duplicate summary for task {s.task_name!r}, model {s.model_name!r}")
        cells[key] = s
    task_names, model_names = tuple(tasks), tuple(models)
    if baseline_name not in models:
        raise BaselineIncompleteError(f"baseline {baseline_name!r} has no summaries")
    if reference not in models:
        raise BaselineIncompleteError(f"leakage reference {reference!r} has no summaries")

    R, M = len(task_names), len(model_names)
    raw = np.full((R, M), np.nan)
    failed = np.zeros((R, M), dtype=bool)
    leaked = np.zeros((R, M), dtype=bool)
    runtime = np.full((R, M), np.nan)
    for r, t in enumerate(task_names):
        for j, mname in enumerate(model_names):
            s = cells.get((t, mname))
            if s is None:
                if mname == baseline_name:
                    raise BaselineIncompleteError(f"baseline {baseline_name!r} has no summary for task {t!r}")
                raise MissingTaskScoreError(f"model {mname!r} has no summary for task {t!r}")
            failed[r, j] = s.failed
            leaked[r, j] = s.trained_on_this_dataset
            if s.runtime_s is not None and not s.failed:
                runtime[r, j] = s.runtime_s
            if s.failed:
                continue
            name = metric_name or s.task.get("eval_metric", "mase")
            value = s.metrics.get(name)
            if value is None or not math.isfinite(value):
                if mname == baseline_name:
                    raise BaselineIncompleteError(f"baseline has no finite {name!r} on task {t!r}")
                raise MissingTaskScoreError(f"model {mname!r} has no finite {name!r} on task {t!r}")
            if value < 0:
                raise ValueError(f"negative error {value} for model {mname!r} on task {t!r}")
            raw[r, j] = value

    b = model_names.index(baseline_name)
    ref = model_names.index(reference)
    bad = failed[:, b] | leaked[:, b]
    if bad.any():
        t = task_names[int(np.argmax(bad))]
        raise BaselineIncompleteError(f"baseline {baseline_name!r} failed or leaked on task {t!r}")

    values = raw.copy()
    log = []
    for r in range(R):
        for j in range(M):
            if j == b:
                continue
            if leaked[r, j]:
                src = ref if j != ref else b
                if src != b and (failed[r, src] or leaked[r, src]):
                    src = b
                values[r, j] = raw[r, src]
                log.append(Imputation(task_names[r], model_names[j], "leakage", model_names[src]))
            elif failed[r, j]:
                values[r, j] = raw[r, b]
                log.append(Imputation(task_names[r], model_names[j], "failure", model_names[b]))
    return ErrorMatrix(
        values=values,
        task_names=task_names,
        model_names=model_names,
        baseline_index=b,
        failure_mask=failed,
        leakage_mask=leaked,
        imputation_log=tuple(log),
        runtime_s=runtime,
        metric=metric_name,
    )


def _values(E) -> np.ndarray:
    a = np.asarray(E.values if isinstance(E, ErrorMatrix) else E, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"error matrix must be 2-D, got shape {a.shape}")
    if np.isnan(a).any():
        raise ValueError("error matrix contains NaN")
    return a


# ---------------------------------------------------------------------------
# win rates and ranks


def _win_credit(E: np.ndarray) -> np.ndarray:
    """Per-task doubled win credit ``C[r, j, k] = 2*[E_rj < E_rk] + [E_rj == E_rk]``, zero diagonal."""
    less = E[:, :, None] < E[:, None, :]
    eq = E[:, :, None] == E[:, None, :]
    C = 2 * less.astype(np.int64) + eq
    idx = np.arange(E.shape[1])
    C[:, idx, idx] = 0
    return C


def pairwise_win_rate(E) -> np.ndarray:
    """``W[j, k]``: fraction of tasks where ``j`` has lower error than ``k``; diagonal 0.5."""
    E = _values(E)
    R, M = E.shape
    if M < 2:
        raise ValueError("need at least two models")
    W = _win_credit(E).sum(axis=0) / (2.0 * R)
    np.fill_diagonal(W, 0.5)
    return W


def average_win_rate(E) -> np.ndarray:
    """Probability of beating a random other model on a random task."""
    E = _values(E)
    R, M = E.shape
    if M < 2:
        raise ValueError("need at least two models")
    return _win_credit(E).sum(axis=(0, 2)) / (2.0 * R * (M - 1))


def average_rank(E) -> np.ndarray:
    """Mean midrank per model (1 = best, ties share the average position)."""
    E = _values(E)
    R, M = E.shape
    if M < 2:
        raise ValueError("need at least two models")
    lower = (E[:, None, :] < E[:, :, None]).sum(axis=2)
    tied = (E[:, None, :] == E[:, :, None]).sum(axis=2) - 1
    return 1.0 + (lower.sum(axis=0) + 0.5 * tied.sum(axis=0)) / R


# ---------------------------------------------------------------------------
# skill scores


def _log_ratio(num: np.ndarray, den: np.ndarray, lower: float, upper: float, err) -> np.ndarray:
    both_zero = (num == 0) & (den == 0)
    if np.any((den == 0) & ~both_zero):
        raise err("reference error is zero on a task where the compared model's error is positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(both_zero, 1.0, num / den)
    return np.log(np.clip(ratio, lower, upper))


def skill_scores(E, baseline_index: int | None = None, lower: float = CLIP_LOWER, upper: float = CLIP_UPPER) -> np.ndarray:
    """``S_j = 1 - geomean_r clip(E_rj / E_rb)``; positive means better than the baseline."""
    if baseline_index is None:
        if not isinstance(E, ErrorMatrix):
            raise TypeError("baseline_index is required for a plain array")
        baseline_index = E.baseline_index
    E = _values(E)
    logs = _log_ratio(E, E[:, [baseline_index]], lower, upper, ZeroBaselineError)
    return 1.0 - np.exp(logs.mean(axis=0))


def _pairwise_log_ratio(E: np.ndarray, lower: float, upper: float) -> np.ndarray:
    return _log_ratio(E[:, :, None], E[:, None, :], lower, upper, ZeroReferenceError)


def pairwise_skill(E, lower: float = CLIP_LOWER, upper: float = CLIP_UPPER) -> np.ndarray:
    """``S[j, k]``: skill of ``j`` measured against ``k``.  Not symmetric."""
    E = _values(E)
    S = 1.0 - np.exp(_pairwise_log_ratio(E, lower, upper).mean(axis=0))
    np.fill_diagonal(S, 0.0)
    return S


# ---------------------------------------------------------------------------
# bootstrap


@dataclass(frozen=True)
class BootstrapConfig:
    num_samples: int = 1000
    alpha: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")


@dataclass(frozen=True)
class Interval:
    lower: np.ndarray
    upper: np.ndarray


def resample_counts(R: int, cfg: BootstrapConfig) -> np.ndarray:
    """How often each task appears in each replicate, shape ``(B, R)``.

    Replicate ``b`` draws its ``R`` row indices from
    ``PCG64(SeedSequence(seed, spawn_key=(b,)))`` so any subset of replicates
    can be regenerated independently.
    """
    counts = np.empty((cfg.num_samples, R), dtype=np.int64)
    for b in range(cfg.num_samples):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(b,))))
        counts[b] = np.bincount(rng.integers(0, R, size=R), minlength=R)
    return counts


def bootstrap_replicates(
    E,
    statistic: str,
    cfg: BootstrapConfig,
    baseline_index: int | None = None,
    lower: float = CLIP_LOWER,
    upper: float = CLIP_UPPER,
) -> np.ndarray:
    """Statistic evaluated on each paired resample of the task rows.

    Returns ``(B, M, M)`` for pairwise statistics and ``(B, M)`` for marginal ones.
    """
    if statistic not in STATISTICS:
        raise ValueError(f"unknown statistic {statistic!r}; choose from {STATISTICS}")
    if baseline_index is None and isinstance(E, ErrorMatrix):
        baseline_index = E.baseline_index
    E = _values(E)
    R, M = E.shape
    if R < 1:
        raise ValueError("need at least one task")
    counts = resample_counts(R, cfg)
    if statistic in ("pairwise_win_rate", "win_rate"):
        credit = np.einsum("br,rjk->bjk", counts, _win_credit(E))  # exact integer sums
        if statistic == "win_rate":
            return credit.sum(axis=2) / (2.0 * R * (M - 1))
        out = credit / (2.0 * R)
        idx = np.arange(M)
        out[:, idx, idx] = 0.5
        return out
    if statistic == "skill_score":
        if baseline_index is None:
            raise TypeError("baseline_index is required for skill_score")
        logs = _log_ratio(E, E[:, [baseline_index]], lower, upper, ZeroBaselineError)
        return 1.0 - np.exp(np.einsum("br,rj->bj", counts.astype(float), logs) / R)
    logs = _pairwise_log_ratio(E, lower, upper)
    out = 1.0 - np.exp(np.einsum("br,rjk->bjk", counts.astype(float), logs) / R)
    idx = np.arange(M)
    out[:, idx, idx] = 0.0
    return out


def bootstrap_intervals(
    E,
    statistic: str,
    cfg: BootstrapConfig = BootstrapConfig(),
    baseline_index: int | None = None,
    lower: float = CLIP_LOWER,
    upper: float = CLIP_UPPER,
) -> Interval:
    """Percentile confidence bounds ``[Q_{alpha/2}, Q_{1-alpha/2}]`` over paired task resamples."""
    reps = bootstrap_replicates(E, statistic, cfg, baseline_index, lower, upper)
    lo, hi = np.quantile(reps, [cfg.alpha / 2.0, 1.0 - cfg.alpha / 2.0], axis=0)
    return Interval(lo, hi)


# ---------------------------------------------------------------------------
# Bradley-Terry


def _strongly_connected(W: np.ndarray) -> bool:
    M = W.shape[0]
    adj = (W > 0) & ~np.eye(M, dtype=bool)
    reach = adj | np.eye(M, dtype=bool)
    for k in range(M):
        reach |= reach[:, [k]] & reach[[k], :]
    return bool(reach.all())


def _bt_loglik(phi: np.ndarray, W: np.ndarray) -> float:
    diff = phi[:, None] - phi[None, :]
    off = ~np.eye(len(phi), dtype=bool)
    # log sigma(x) = -log1p(exp(-x)), summed over ordered pairs j != k covers both terms of each j<k pair
    return float(-(W * np.logaddexp(0.0, -diff))[off].sum())


def bradley_terry(
    pairwise_W,
    scale: float = ELO_SCALE,
    anchor_index: int = 0,
    anchor_value: float = 1000.0,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> np.ndarray:
    """Maximum-likelihood Bradley-Terry skills from a complete pairwise win-rate matrix.

    ``P(j beats k) = sigmoid(scale * (theta_j - theta_k))``; the solution is
    pinned by ``theta[anchor_index] = anchor_value``.  Solved by damped Newton
    iterations until the score-equation residual is at most ``tol``.
    """
    W = np.asarray(pairwise_W, dtype=float)
    M = W.shape[0]
    if W.shape != (M, M) or M < 2:
        raise ValueError("pairwise win rates must be a square matrix with M >= 2")
    if scale <= 0:
        raise ValueError("scale must be positive")
    off = ~np.eye(M, dtype=bool)
    if not np.allclose((W + W.T)[off], 1.0, atol=1e-12):
        raise ValueError("pairwise win rates must satisfy W[j, k] + W[k, j] = 1")
    if not _strongly_connected(W):
        raise NonConvergenceError("maximum-likelihood estimate does not exist (a group of models never loses)", math.inf)

    free = np.arange(M) != anchor_index
    phi = np.zeros(M)  # phi = scale * (theta - theta_anchor)
    ll = _bt_loglik(phi, W)
    residual = math.inf
    for _ in range(max_iter):
        p = 1.0 / (1.0 + np.exp(-(phi[:, None] - phi[None, :])))
        grad = np.where(off, W - p, 0.0).sum(axis=1)
        residual = float(np.linalg.norm(grad[free])) * max(1.0, scale)
        if residual <= tol:
            return anchor_value + phi / scale
        v = np.where(off, p * (1.0 - p), 0.0)
        info = np.diag(v.sum(axis=1)) - v  # negative Hessian
        step = np.zeros(M)
        step[free] = np.linalg.solve(info[np.ix_(free, free)], grad[free])
        t = 1.0
        while True:
            cand = phi + t * step
            cand_ll = _bt_loglik(cand, W)
            if cand_ll >= ll - 1e-12 * abs(ll) or t < 1e-8:
                break
            t *= 0.5
        phi, ll = cand, cand_ll
    raise NonConvergenceError(f"Bradley-Terry did not converge in {max_iter} iterations", residual)


# ---------------------------------------------------------------------------
# report


@dataclass
class ModelRow:
    model: str
    win_rate: float
    skill_score: float
    median_runtime_s: float | None
    leakage_pct: float
    failures: int
    average_rank: float
    bt_score: float | None


@dataclass
class AggregateReport:
    metric: str | None
    baseline: str
    model_names: tuple[str, ...]
    task_names: tuple[str, ...]
    rows: list[ModelRow]  # sorted by win rate, best first
    pairwise_win_rate: np.ndarray
    pairwise_skill: np.ndarray
    win_rate_interval: Interval
    skill_interval: Interval
    config: BootstrapConfig
    clip: tuple[float, float]
    imputation_log: tuple[Imputation, ...] = ()
    marginal_intervals: dict[str, Interval] | None = None
    checks: dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        names = list(self.model_names)
        out = {
            "metric": self.metric,
            "baseline": self.baseline,
            "num_tasks": len(self.task_names),
            "num_models": len(names),
            "bootstrap": {"num_samples": self.config.num_samples, "alpha": self.config.alpha, "seed": self.config.seed},
            "clip": list(self.clip),
            "leaderboard": [r.__dict__ for r in self.rows],
            "models": names,
            "tasks": list(self.task_names),
            "pairwise": {
                "win_rate": self.pairwise_win_rate,
                "win_rate_lower": self.win_rate_interval.lower,
                "win_rate_upper": self.win_rate_interval.upper,
                "skill": self.pairwise_skill,
                "skill_lower": self.skill_interval.lower,
                "skill_upper": self.skill_interval.upper,
            },
            "imputations": [i.__dict__ for i in self.imputation_log],
            "checks": self.checks,
        }
        if self.marginal_intervals:
            out["marginal_intervals"] = {
                k: {"lower": v.lower, "upper": v.upper} for k, v in self.marginal_intervals.items()
            }
        return out


def build_report(
    em: ErrorMatrix,
    cfg: BootstrapConfig = BootstrapConfig(),
    lower: float = CLIP_LOWER,
    upper: float = CLIP_UPPER,
    marginal_ci: bool = False,
) -> AggregateReport:
    E = em.values
    R, M = E.shape
    if M < 2:
        raise ValueError("a leaderboard needs at least two models")
    b = em.baseline_index
    wr = average_win_rate(E)
    ss = skill_scores(E, b, lower, upper)
    ranks = average_rank(E)
    Wp = pairwise_win_rate(E)
    Sp = pairwise_skill(E, lower, upper)
    wr_ci = bootstrap_intervals(E, "pairwise_win_rate", cfg)
    sk_ci = bootstrap_intervals(E, "pairwise_skill", cfg, lower=lower, upper=upper)
    marginal = None
    if marginal_ci:
        marginal = {
            "win_rate": bootstrap_intervals(E, "win_rate", cfg),
            "skill_score": bootstrap_intervals(E, "skill_score", cfg, baseline_index=b, lower=lower, upper=upper),
        }

    checks: dict[str, object] = {
        "win_rate_sum": float(wr.sum()),
        "win_rate_sum_expected": M / 2.0,
        "rank_identity_max_abs_error": float(np.max(np.abs(wr - (1.0 - (ranks - 1.0) / (M - 1))))),
    }
    try:
        theta = bradley_terry(Wp, anchor_index=b)
        dw = np.sign(np.round(wr[:, None] - wr[None, :], 12))
        dt = np.sign(np.where(np.abs(theta[:, None] - theta[None, :]) < 1e-6, 0.0, theta[:, None] - theta[None, :]))
        checks["bt_ordering_matches_win_rate"] = bool(np.all(dw == dt))
    except NonConvergenceError as exc:
        theta = None
        checks["bt_ordering_matches_win_rate"] = None
        checks["bt_note"] = str(exc)

    rows = []
    for j, name in enumerate(em.model_names):
        rt = em.runtime_s[:, j] if em.runtime_s is not None else np.array([np.nan])
        rt = rt[~np.isnan(rt)]
        rows.append(
            ModelRow(
                model=name,
                win_rate=float(wr[j]),
                skill_score=float(ss[j]),
                median_runtime_s=float(np.median(rt)) if rt.size else None,
                leakage_pct=float(100.0 * em.leakage_mask[:, j].mean()),
                failures=int(em.failure_mask[:, j].sum()),
                average_rank=float(ranks[j]),
                bt_score=None if theta is None else float(theta[j]),
            )
        )
    rows.sort(key=lambda r: (-r.win_rate, -r.skill_score, r.model))
    return AggregateReport(
        metric=em.metric,
        baseline=em.baseline_name,
        model_names=em.model_names,
        task_names=em.task_names,
        rows=rows,
        pairwise_win_rate=Wp,
        pairwise_skill=Sp,
        win_rate_interval=wr_ci,
        skill_interval=sk_ci,
        config=cfg,
        clip=(lower, upper),
        imputation_log=em.imputation_log,
        marginal_intervals=marginal,
        checks=checks,
    )


def model_order(report: AggregateReport) -> list[int]:
    """Column indices of ``report.model_names`` in leaderboard order."""
    pos = {n: i for i, n in enumerate(report.model_names)}
    return [pos[r.model] for r in report.rows]

