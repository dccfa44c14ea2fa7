from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from conftest import make_task, series_dataset
from fcbench.baselines import BaselineSpec, drift, forecast_window, naive, norm_ppf, seasonal_naive
from fcbench.dataset import slice_window
from fcbench.errors import HistoryTooShortError
from fcbench.metrics import score_window
from fcbench.task import EvaluationWindow

Q = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def test_seasonal_naive_points():
    point, _ = seasonal_naive([10, 20, 30, 40], 2, 3, Q)
    np.testing.assert_array_equal(point, [30, 40, 30])


def test_seasonal_naive_band_growth():
    # residuals y_t - y_{t-2} over [0,1,2,3,4,5,10] -> [2,2,2,2,6]
    y = [0, 1, 2, 3, 4, 5, 10]
    sigma = math.sqrt((4 * 4 + 36) / 5)
    point, q = seasonal_naive(y, 2, 5, (0.9,))
    k = (np.arange(1, 6) - 1) // 2
    np.testing.assert_allclose(q[:, 0] - point, norm_ppf(0.9) * sigma * np.sqrt(k + 1))


def test_seasonal_naive_small_history_falls_back_to_one_step():
    # T=4, m=2 -> only 2 seasonal residuals, so sigma comes from one-step differences
    _, q = seasonal_naive([0, 1, 3, 6], 2, 1, (0.9,))
    sigma = math.sqrt((1 + 4 + 9) / 3)
    assert q[0, 0] - 3 == pytest.approx(norm_ppf(0.9) * sigma)


def test_seasonal_naive_too_short():
    with pytest.raises(HistoryTooShortError):
        seasonal_naive([1, 2], 3, 1, Q)


def test_naive_points_and_band():
    point, q = naive([1, 2, 3], 2, (0.5, 0.9))
    np.testing.assert_array_equal(point, [3, 3])
    assert q[0, 1] == 3 + norm_ppf(0.9)  # sigma = 1
    assert q[1, 1] == pytest.approx(3 + norm_ppf(0.9) * math.sqrt(2))
    with pytest.raises(HistoryTooShortError):
        naive([1.0], 1, Q)


def test_constant_history_collapses_bands():
    for point, q in (naive([4, 4, 4], 3, Q), drift([4, 4, 4], 3, Q), seasonal_naive([4] * 6, 2, 3, Q)):
        np.testing.assert_array_equal(q, np.full((3, len(Q)), 4.0))
        np.testing.assert_array_equal(point, [4, 4, 4])


def test_drift_points():
    np.testing.assert_array_equal(drift([1, 2, 3], 2, Q)[0], [4, 5])
    np.testing.assert_array_equal(drift([5, 5, 5], 2, Q)[0], [5, 5])
    np.testing.assert_array_equal(drift([0, 10], 1, Q)[0], [20])


def test_drift_band():
    y = [0.0, 1.0, 3.0, 3.0]  # slope 1, residuals [0, 1, -1]
    point, q = drift(y, 2, (0.9,))
    sigma = math.sqrt(2 / 3)
    h = np.array([1.0, 2.0])
    np.testing.assert_allclose(q[:, 0] - point, norm_ppf(0.9) * sigma * np.sqrt(h * (1 + h / 3)))


def test_missing_history_is_filled():
    point, _ = naive([1, 2, np.nan], 1, Q)
    assert point[0] == 2
    point, _ = seasonal_naive([np.nan, 5, 6, 7], 2, 2, Q)
    np.testing.assert_array_equal(point, [6, 7])


# ---------------------------------------------------------------------------
# normal inverse


@given(st.floats(1e-6, 1 - 1e-6))
def test_norm_ppf_accuracy(p):
    assert abs(norm_ppf(p) - norm.ppf(p)) < 4.5e-4


@given(st.integers(1, 2**19))
def test_norm_ppf_antisymmetric(k):
    p = k / 2**20  # 1 - p is exact
    assert norm_ppf(p) == -norm_ppf(1 - p)
    assert norm_ppf(0.5) == 0.0


@given(st.floats(1e-9, 1 - 1e-9), st.floats(1e-9, 1 - 1e-9))
def test_norm_ppf_monotone(p, q):
    if p < q:
        assert norm_ppf(p) <= norm_ppf(q)


# ---------------------------------------------------------------------------
# structural properties

histories = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=4, max_size=40)


@settings(max_examples=150, deadline=None)
@given(histories, st.integers(1, 4), st.integers(1, 12))
def test_quantiles_monotone_and_median_is_point(y, m, H):
    levels = (0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95)
    for point, q in (seasonal_naive(y, m, H, levels), naive(y, H, levels), drift(y, H, levels)):
        assert np.all(np.diff(q, axis=1) >= 0)
        np.testing.assert_array_equal(q[:, 3], point)


def _seasonal_windows(seed: int, n_windows: int):
    rng = np.random.default_rng(seed)
    t = np.arange(24 * 10)
    out = []
    for _ in range(n_windows):
        y = np.sin(2 * np.pi * t / 24 + rng.uniform(0, 2 * np.pi)) + rng.normal(0, 0.1, t.size)
        out.append(y)
    return out


def test_seasonal_naive_beats_naive_on_periodic_windows():
    wins = 0
    series = _seasonal_windows(7, 100)
    for y in series:
        hist, fut = y[:-24], y[-24:]
        a = np.mean(np.abs(hist[24:] - hist[:-24]))
        sn = np.mean(np.abs(fut - seasonal_naive(hist, 24, 24, Q)[0])) / a
        nv = np.mean(np.abs(fut - naive(hist, 24, Q)[0])) / a
        wins += sn < nv
    assert wins >= 90


# ---------------------------------------------------------------------------
# window forecasts


def test_forecast_window_shapes_and_noiseless_score(tmp_path):
    season = 3 + np.sin(2 * np.pi * np.arange(24) / 24)
    y1 = np.tile(season, 7)
    y1[0] += 1
    y2 = np.stack([np.tile(season, 7), np.tile(2 * season, 7)])
    y2[:, 0] -= 1
    ds = series_dataset(tmp_path, {"a": np.stack([y1, y1 + 1]), "b": y2})
    task = make_task(ds, 24, 1)
    sl = slice_window(ds, EvaluationWindow(1, 24 * 6, 24 * 7), task)
    fc = forecast_window(BaselineSpec("seasonal_naive"), sl.prediction_input(), task)
    assert fc.quantiles.shape == (2, 2, 24, 9) and fc.point.shape == (2, 2, 24)
    assert fc.model_name == "seasonal_naive"
    assert score_window(sl, fc, task)["mase"] == 0.0


def test_baseline_spec_validation():
    with pytest.raises(ValueError):
        BaselineSpec("arima")
    with pytest.raises(ValueError):
        BaselineSpec("seasonal_naive", seasonality=0)
    point, _ = BaselineSpec("seasonal_naive", seasonality=2).forecast_series([1, 2, 3, 4], 2, Q, task_m=24)
    np.testing.assert_array_equal(point, [3, 4])
