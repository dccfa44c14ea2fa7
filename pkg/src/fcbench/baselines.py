"""Seasonal naive, naive and drift reference forecasters.

Each forecaster maps a one-dimensional history to a point path and Gaussian
quantile bands ``point + z_q * sigma * sqrt(v_h)`` with the usual textbook
variance growth ``v_h`` for that method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from fcbench.errors import HistoryTooShortError
from fcbench.metrics import ForecastSet

if TYPE_CHECKING:
    from fcbench.dataset import PredictionInput
    from fcbench.task import Task

BASELINE_KINDS: tuple[str, ...] = ("seasonal_naive", "naive", "drift")

# Abramowitz & Stegun 26.2.23, |error| < 4.5e-4
_C = (2.515517, 0.802853, 0.010328)
_D = (1.432788, 0.189269, 0.001308)


def _tail_approx(tail: float) -> float:
    t = math.sqrt(-2.0 * math.log(tail))
    return t - (_C[0] + _C[1] * t + _C[2] * t * t) / (1.0 + _D[0] * t + _D[1] * t * t + _D[2] * t**3)


# the raw approximation is about -1e-7 at p = 0.5; removing it makes the curve
# pass through 0 there and keeps it monotone across the midpoint
_OFFSET = _tail_approx(0.5)


def norm_ppf(p: float) -> float:
    """Inverse standard normal CDF by a rational approximation (abs. error below 4.5e-4).

    Exactly antisymmetric around 0.5, exactly 0 at 0.5 and monotone.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must be in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    x = _tail_approx(min(p, 1.0 - p)) - _OFFSET
    return x if p > 0.5 else -x


def _z(levels: Sequence[float]) -> np.ndarray:
    return np.array([norm_ppf(q) for q in levels])


def _fill_gaps(history) -> np.ndarray:
    """Forward-fill missing values, then back-fill any leading ones."""
    y = np.array(history, dtype=float)
    if y.ndim != 1:
        raise ValueError("history must be one-dimensional")
    ok = ~np.isnan(y)
    if not ok.any():
        raise HistoryTooShortError("history contains no observed values")
    if ok.all():
        return y
    idx = np.where(ok, np.arange(y.size), 0)
    np.maximum.accumulate(idx, out=idx)
    y = y[idx]
    first = int(np.argmax(ok))
    y[:first] = y[first]
    return y


def _rms(residuals: np.ndarray) -> float:
    return float(np.sqrt(np.mean(residuals**2))) if residuals.size else 0.0


def _bands(point: np.ndarray, sigma: float, spread: np.ndarray, levels: Sequence[float]) -> np.ndarray:
    z = _z(levels)
    return point[:, None] + sigma * np.sqrt(spread)[:, None] * z[None, :]


def seasonal_naive(history, m: int, horizon: int, quantile_levels: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Repeat the last observed season.

    Returns ``(point, quantiles)`` with shapes ``(H,)`` and ``(H, K)``.
    """
    y = _fill_gaps(history)
    T = y.size
    if m < 1:
        raise ValueError("seasonal period must be >= 1")
    if T < m:
        raise HistoryTooShortError(f"seasonal naive needs at least m={m} observations, got {T}")
    h = np.arange(1, horizon + 1)
    k = (h - 1) // m  # whole seasons elapsed before step h
    # y_{T+h-m*ceil(h/m)} in 1-based time
    point = y[T + h - m * (k + 1) - 1]
    resid = y[m:] - y[:-m]
    if resid.size < 3:
        resid = np.diff(y)
    return point, _bands(point, _rms(resid), (k + 1).astype(float), quantile_levels)


def naive(history, horizon: int, quantile_levels: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    y = _fill_gaps(history)
    if y.size < 2:
        raise HistoryTooShortError(f"naive needs at least 2 observations, got {y.size}")
    h = np.arange(1, horizon + 1, dtype=float)
    point = np.full(horizon, y[-1])
    return point, _bands(point, _rms(np.diff(y)), h, quantile_levels)


def drift(history, horizon: int, quantile_levels: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Extend the straight line through the first and last observation."""
    y = _fill_gaps(history)
    T = y.size
    if T < 2:
        raise HistoryTooShortError(f"drift needs at least 2 observations, got {T}")
    slope = (y[-1] - y[0]) / (T - 1)
    h = np.arange(1, horizon + 1, dtype=float)
    point = y[-1] + h * slope
    sigma = _rms(np.diff(y) - slope)
    return point, _bands(point, sigma, h * (1.0 + h / (T - 1)), quantile_levels)


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    seasonality: int | None = None  # seasonal_naive only; defaults to the task's

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}; choose from {', '.join(BASELINE_KINDS)}")
        if self.seasonality is not None and self.seasonality < 1:
            raise ValueError("seasonality must be >= 1")

    def forecast_series(self, history, horizon: int, quantile_levels: Sequence[float], task_m: int):
        if self.kind == "seasonal_naive":
            return seasonal_naive(history, self.seasonality or task_m, horizon, quantile_levels)
        if self.kind == "naive":
            return naive(history, horizon, quantile_levels)
        return drift(history, horizon, quantile_levels)


def forecast_window(spec: BaselineSpec, inputs: "PredictionInput", task: "Task") -> ForecastSet:
    """Forecast every (series, target) of one window independently."""
    points, quantiles = [], []
    for past in inputs.past:
        ps, qs = [], []
        for d in range(past.target.shape[0]):
            p, q = spec.forecast_series(past.target[d], inputs.horizon, task.quantile_levels, task.seasonality)
            ps.append(p)
            qs.append(q)
        points.append(ps)
        quantiles.append(qs)
    return ForecastSet(
        model_name=spec.kind,
        quantile_levels=task.quantile_levels,
        quantiles=np.array(quantiles, dtype=float),
        point=np.array(points, dtype=float),
    )
