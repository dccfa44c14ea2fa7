"""Point and probabilistic forecast metrics.

All array functions take the forecast horizon on the last axis: actuals and
point forecasts are shaped ``(..., H)`` (usually ``(N, D, H)``), quantile
forecasts ``(..., H, K)`` for ``K`` quantile levels, and scales ``(...)``.
NaN actuals mark missing cells; they are left out of every sum and the
divisor counts only the cells that were scored.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from fcbench.errors import (
    HarnessError,
    HistoryTooShortError,
    MissingQuantileError,
    ShapeMismatchError,
    ZeroDenominatorError,
    ZeroScaleError,
    ZeroScaleWarning,
)

if TYPE_CHECKING:
    from fcbench.dataset import WindowSlice
    from fcbench.task import Task

_Q_TOL = 1e-9


def seasonal_error(history: Sequence[float], m: int) -> float:
    """Mean absolute difference between observations ``m`` steps apart.

    Pairs involving a missing value are skipped and the mean is taken over the
    remaining pairs.  A zero result is returned with a :class:`ZeroScaleWarning`.
    """
    y = np.asarray(history, dtype=float)
    if y.ndim != 1:
        raise ValueError("history must be one-dimensional")
    a = seasonal_error_matrix(y, m)
    if a == 0:
        warnings.warn(f"seasonal error is zero (m={m})", ZeroScaleWarning, stacklevel=2)
    return float(a)


def seasonal_error_matrix(history: np.ndarray, m: int) -> np.ndarray:
    """Vectorized seasonal error over the last axis of ``history``; returns shape ``history.shape[:-1]``."""
    y = np.asarray(history, dtype=float)
    T = y.shape[-1]
    if m < 1:
        raise ValueError("seasonal period must be >= 1")
    if T <= m:
        raise HistoryTooShortError(f"history of length {T} is too short for seasonal period {m}")
    diff = np.abs(y[..., m:] - y[..., :-m])
    valid = ~np.isnan(diff)
    count = valid.sum(axis=-1)
    if np.any(count == 0):
        raise HistoryTooShortError(f"no pair of observations {m} steps apart is available")
    return np.where(valid, diff, 0.0).sum(axis=-1) / count


@dataclass(frozen=True)
class ScaleVector:
    a: np.ndarray  # (N, D)
    m: int

    @property
    def zero(self) -> np.ndarray:
        return self.a == 0


def compute_scales(window: "WindowSlice", m: int) -> ScaleVector:
    """Seasonal errors per (series, target) from the window's own past only."""
    return ScaleVector(np.stack([seasonal_error_matrix(p.target, m) for p in window.past]), m)


def quantile_loss(y, yhat_q, q):
    """Pinball loss scaled by 2, so the 0.5 level equals the absolute error."""
    y = np.asarray(y, dtype=float)
    yhat_q = np.asarray(yhat_q, dtype=float)
    return np.where(y < yhat_q, 2.0 * (1.0 - q) * (yhat_q - y), 2.0 * q * (y - yhat_q))


def _prepare_scales(actuals: np.ndarray, scales, skip_zero_scale: bool) -> tuple[np.ndarray, np.ndarray]:
    scales = np.broadcast_to(np.asarray(scales, dtype=float), actuals.shape[:-1])
    scored = ~np.isnan(actuals)
    contributing = scored.any(axis=-1)
    zero = (scales == 0) & contributing
    if np.any(zero):
        if not skip_zero_scale:
            where = tuple(int(i) for i in np.argwhere(zero)[0])
            raise ZeroScaleError(f"seasonal error is zero for series/target index {where}")
        scored = scored & ~zero[..., None]
    return scales, scored


def _check_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{what}: expected shape {a.shape}, got {b.shape}")


def mase(actuals, points, scales, skip_zero_scale: bool = False) -> float:
    """Mean absolute error of ``points`` divided per series by ``scales``."""
    y = np.asarray(actuals, dtype=float)
    f = np.asarray(points, dtype=float)
    _check_shape(y, f, "point forecast")
    a, scored = _prepare_scales(y, scales, skip_zero_scale)
    n = scored.sum()
    if n == 0:
        return float("nan")
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.abs(y - f) / a[..., None]
    return float(np.where(scored, err, 0.0).sum() / n)


def _quantile_array(quantiles, levels: Sequence[float], actuals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    qf = np.asarray(quantiles, dtype=float)
    qs = np.asarray(levels, dtype=float)
    if qf.shape != actuals.shape + (len(qs),):
        raise ShapeMismatchError(
            f"quantile forecast: expected shape {actuals.shape + (len(qs),)}, got {qf.shape}"
        )
    return qf, qs


def sql(actuals, quantile_forecasts, scales, quantile_levels: Sequence[float], skip_zero_scale: bool = False) -> float:
    """Scaled quantile loss: losses are summed over levels and averaged over cells."""
    y = np.asarray(actuals, dtype=float)
    qf, qs = _quantile_array(quantile_forecasts, quantile_levels, y)
    a, scored = _prepare_scales(y, scales, skip_zero_scale)
    n = scored.sum()
    if n == 0:
        return float("nan")
    loss = quantile_loss(y[..., None], qf, qs).sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        loss = loss / a[..., None]
    return float(np.where(scored, loss, 0.0).sum() / n)


def wape(actuals, points) -> float:
    """Total absolute error divided by total absolute actuals."""
    y = np.asarray(actuals, dtype=float)
    f = np.asarray(points, dtype=float)
    _check_shape(y, f, "point forecast")
    scored = ~np.isnan(y)
    denom = np.abs(np.where(scored, y, 0.0)).sum()
    if denom == 0:
        raise ZeroDenominatorError("sum of absolute actuals is zero")
    return float(np.where(scored, np.abs(y - f), 0.0).sum() / denom)


def wql(actuals, quantile_forecasts, quantile_levels: Sequence[float]) -> float:
    """Total quantile loss (averaged over levels) divided by total absolute actuals."""
    y = np.asarray(actuals, dtype=float)
    qf, qs = _quantile_array(quantile_forecasts, quantile_levels, y)
    scored = ~np.isnan(y)
    denom = np.abs(np.where(scored, y, 0.0)).sum()
    if denom == 0:
        raise ZeroDenominatorError("sum of absolute actuals is zero")
    loss = quantile_loss(y[..., None], qf, qs).mean(axis=-1)
    return float(np.where(scored, loss, 0.0).sum() / denom)


@dataclass(frozen=True)
class ForecastSet:
    """Forecasts of one model for one window.

    ``point`` is ``(N, D, H)`` or ``None`` (then the 0.5 quantile is used);
    ``quantiles`` is ``(N, D, H, K)`` aligned with ``quantile_levels``.
    """

    model_name: str
    quantile_levels: tuple[float, ...]
    quantiles: np.ndarray
    point: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "quantile_levels", tuple(float(q) for q in self.quantile_levels))
        q = np.asarray(self.quantiles, dtype=float)
        if q.ndim < 1 or q.shape[-1] != len(self.quantile_levels):
            raise ShapeMismatchError(
                f"quantile array has {q.shape[-1] if q.ndim else 0} levels, expected {len(self.quantile_levels)}"
            )
        if not np.all(np.isfinite(q)):
            raise ValueError(f"{self.model_name}: quantile forecasts contain non-finite values")
        object.__setattr__(self, "quantiles", q)
        if self.point is not None:
            p = np.asarray(self.point, dtype=float)
            if p.shape != q.shape[:-1]:
                raise ShapeMismatchError(f"point forecast shape {p.shape} does not match quantiles {q.shape[:-1]}")
            if not np.all(np.isfinite(p)):
                raise ValueError(f"{self.model_name}: point forecasts contain non-finite values")
            object.__setattr__(self, "point", p)

    def select(self, levels: Sequence[float]) -> np.ndarray:
        """Quantile forecasts for ``levels`` after sorting across levels to undo crossing."""
        repaired = np.sort(self.quantiles, axis=-1)
        have = np.asarray(self.quantile_levels)
        cols = []
        for q in levels:
            hit = np.flatnonzero(np.abs(have - q) <= _Q_TOL)
            if hit.size == 0:
                raise MissingQuantileError(f"{self.model_name}: no forecast for quantile level {q}")
            cols.append(int(hit[0]))
        return repaired[..., cols]

    def point_forecast(self) -> np.ndarray:
        if self.point is not None:
            return self.point
        try:
            return self.select([0.5])[..., 0]
        except MissingQuantileError:
            raise MissingQuantileError(
                f"{self.model_name}: no point forecast and no 0.5 quantile to fall back on"
            ) from None


def score_window(
    window: "WindowSlice",
    forecast: ForecastSet,
    task: "Task",
    skip_zero_scale: bool = False,
) -> dict[str, float]:
    """All task metrics for one window, with scales computed from that window's past."""
    where = f"task {task.task_name!r}, window {window.window_index}"
    y = window.actuals_array()
    try:
        point = forecast.point_forecast()
        _check_shape(y, point, "point forecast")
        qf = forecast.select(task.quantile_levels)
        try:
            scales = compute_scales(window, task.seasonality)
        except HistoryTooShortError as exc:
            raise HistoryTooShortError(f"{exc} (seasonal scale)") from None
        try:
            out = {
                "mase": mase(y, point, scales.a, skip_zero_scale),
                "sql": sql(y, qf, scales.a, task.quantile_levels, skip_zero_scale),
            }
        except ZeroScaleError:
            n, d = (int(i) for i in np.argwhere(scales.zero)[0])
            item = window.past[n].item_id
            target = task.dataset.target_columns[d]
            raise ZeroScaleError(f"seasonal error is zero for series {item!r}, target {target!r}") from None
        out["wql"] = wql(y, qf, task.quantile_levels)
        out["wape"] = wape(y, point)
    except HarnessError as exc:
        raise type(exc)(f"{where}: {exc}") from None
    return out
