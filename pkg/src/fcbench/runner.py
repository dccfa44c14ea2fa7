"""Per-task evaluation pipelines behind the command line: baselines and submissions."""

from __future__ import annotations

import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from fcbench.baselines import BaselineSpec, forecast_window
from fcbench.dataset import TimeSeriesDataset, ValidationReport, load_dataset, slice_window, validate_dataset
from fcbench.errors import (
    HarnessError,
    IncompleteSubmissionError,
    MissingQuantileError,
    SchemaError,
    ShapeMismatchError,
)
from fcbench.metrics import ForecastSet, score_window
from fcbench.task import Benchmark, EvaluationSummary, Task, summarize, windows_for_dataset

_Q_TOL = 1e-9


class DatasetCache:
    """Loads each distinct manifest once; tasks sharing a dataset share the arrays (read-only)."""

    def __init__(self):
        self._cache: dict = {}

    def get(self, task: Task) -> TimeSeriesDataset:
        key = task.dataset
        if key not in self._cache:
            self._cache[key] = load_dataset(key)
        return self._cache[key]


def map_ordered(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """``[fn(x) for x in items]`` on up to ``jobs`` threads; results keep input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def validate_benchmark(bench: Benchmark, cache: DatasetCache | None = None) -> list[ValidationReport]:
    cache = cache or DatasetCache()
    return [validate_dataset(cache.get(t), t) for t in bench.tasks]


# ---------------------------------------------------------------------------
# baselines


def evaluate_baseline(
    task: Task,
    ds: TimeSeriesDataset,
    spec: BaselineSpec,
    skip_zero_scale: bool = False,
    timing: bool = True,
) -> EvaluationSummary:
    """Forecast and score every window of ``task``.  Harness errors become a failed summary."""
    start = time.perf_counter()
    windows = []
    try:
        windows = windows_for_dataset(task, ds)
        scores = []
        for w in windows:
            sl = slice_window(ds, w, task)
            fc = forecast_window(spec, sl.prediction_input(), task)
            scores.append(score_window(sl, fc, task, skip_zero_scale))
    except HarnessError as exc:
        return summarize(task, spec.kind, [], windows, failed=True, failure_reason=f"{type(exc).__name__}: {exc}")
    runtime = time.perf_counter() - start if timing else None
    return summarize(task, spec.kind, scores, windows, runtime_s=runtime)


def run_baselines(
    bench: Benchmark,
    kinds: Iterable[str],
    jobs: int = 1,
    skip_zero_scale: bool = False,
    timing: bool = True,
    cache: DatasetCache | None = None,
) -> dict[str, list[EvaluationSummary]]:
    cache = cache or DatasetCache()
    specs = [BaselineSpec(k) for k in kinds]
    datasets = [cache.get(t) for t in bench.tasks]

    def one(i: int) -> list[EvaluationSummary]:
        return [evaluate_baseline(bench.tasks[i], datasets[i], s, skip_zero_scale, timing) for s in specs]

    per_task = map_ordered(one, range(len(bench.tasks)), jobs)
    return {s.kind: [row[j] for row in per_task] for j, s in enumerate(specs)}


# ---------------------------------------------------------------------------
# external submissions


@dataclass
class _TaskRecords:
    forecasts: dict  # (window_index, item_id, dim_index) -> record
    failed: bool = False
    failure_reason: str | None = None
    leakage: bool | None = None
    runtime_s: float | None = None


def _parse_levels(raw: dict, where: str) -> dict[float, list]:
    if not isinstance(raw, dict):
        raise SchemaError("quantiles must map level strings to arrays", f"{where}.quantiles")
    out = {}
    for key, values in raw.items():
        try:
            q = float(key)
        except (TypeError, ValueError):
            raise SchemaError(f"quantile key {key!r} is not a number", f"{where}.quantiles") from None
        if not 0.0 < q < 1.0:
            raise SchemaError(f"quantile key {key!r} is outside (0, 1)", f"{where}.quantiles")
        out[q] = values
    return out


def group_submission(records: Iterable[dict], bench: Benchmark) -> tuple[str, dict[str, _TaskRecords]]:
    """Index submission records by task.  All records must name the same model."""
    model = None
    by_task: dict[str, _TaskRecords] = defaultdict(lambda: _TaskRecords({}))
    known = {t.task_name for t in bench.tasks}
    for n, rec in enumerate(records, 1):
        where = f"record {n}"
        if not isinstance(rec, dict):
            raise SchemaError("record must be an object", where)
        for key in ("task_name", "model_name"):
            if key not in rec:
                raise SchemaError("required key is missing", f"{where}.{key}")
        if model is None:
            model = rec["model_name"]
        elif rec["model_name"] != model:
            raise SchemaError(f"submission mixes models {model!r} and {rec['model_name']!r}", f"{where}.model_name")
        name = rec["task_name"]
        if name not in known:
            raise SchemaError(f"unknown task {name!r}", f"{where}.task_name")
        entry = by_task[name]
        leak = bool(rec.get("trained_on_this_dataset", False))
        if entry.leakage is None:
            entry.leakage = leak
        elif entry.leakage != leak:
            raise SchemaError(f"conflicting trained_on_this_dataset flags for task {name!r}", where)
        if rec.get("runtime_s") is not None and entry.runtime_s is None:
            entry.runtime_s = float(rec["runtime_s"])
        if rec.get("failed"):
            entry.failed = True
            entry.failure_reason = rec.get("failure_reason") or rec.get("reason") or "declared failed"
            continue
        for key in ("window_index", "item_id", "dim_index", "quantiles"):
            if key not in rec:
                raise SchemaError("required key is missing", f"{where}.{key}")
        key = (int(rec["window_index"]), str(rec["item_id"]), int(rec["dim_index"]))
        if key in entry.forecasts:
            raise SchemaError(f"duplicate record for task {name!r}, window/item/dim {key}", where)
        entry.forecasts[key] = rec
    if model is None:
        raise SchemaError("submission is empty")
    return model, dict(by_task)


def _assemble(task: Task, ds: TimeSeriesDataset, window_index: int, recs: dict, model: str) -> ForecastSet:
    """Stack one window's records into ``(N, D, H, K)`` arrays over the task's quantile levels."""
    H, levels = task.horizon, task.quantile_levels
    N, D = ds.num_series, ds.num_targets
    quant = np.empty((N, D, H, len(levels)))
    point = np.full((N, D, H), np.nan)
    for n, item in enumerate(ds.item_ids):
        for d in range(D):
            rec = recs[(window_index, item, d)]
            where = f"task {task.task_name!r}, window {window_index}, item {item!r}, dim {d}"
            given = _parse_levels(rec["quantiles"], where)
            for k, q in enumerate(levels):
                match = [v for lv, v in given.items() if abs(lv - q) <= _Q_TOL]
                if not match:
                    raise MissingQuantileError(f"{where}: no forecast for quantile level {q}")
                arr = np.asarray(match[0], dtype=float)
                if arr.shape != (H,):
                    raise ShapeMismatchError(f"{where}: quantile {q} has shape {arr.shape}, expected ({H},)")
                quant[n, d, :, k] = arr
            if rec.get("point") is not None:
                arr = np.asarray(rec["point"], dtype=float)
                if arr.shape != (H,):
                    raise ShapeMismatchError(f"{where}: point forecast has shape {arr.shape}, expected ({H},)")
                point[n, d] = arr
    if np.isnan(point).any():
        # records without a point forecast fall back to the (crossing-repaired) median
        median = ForecastSet(model, levels, quant).point_forecast()
        point = np.where(np.isnan(point), median, point)
    return ForecastSet(model, levels, quant, point)


def score_submission(
    bench: Benchmark,
    records: Iterable[dict],
    skip_zero_scale: bool = False,
    cache: DatasetCache | None = None,
    jobs: int = 1,
) -> list[EvaluationSummary]:
    """Score one model's submission on every task.  Only this model's records are read."""
    cache = cache or DatasetCache()
    model, by_task = group_submission(records, bench)

    plans = []
    missing: list[tuple] = []
    for task in bench.tasks:
        entry = by_task.get(task.task_name)
        ds = cache.get(task)
        windows = windows_for_dataset(task, ds)
        if entry is None:
            missing.append((task.task_name,))
            continue
        if not entry.failed:
            wanted = {(w.index, item, d) for w in windows for item in ds.item_ids for d in range(ds.num_targets)}
            have = set(entry.forecasts)
            missing += sorted((task.task_name,) + k for k in wanted - have)
            extra = sorted(have - wanted)
            if extra:
                raise SchemaError(f"task {task.task_name!r}: records for unknown window/item/dim {extra[0]}")
        plans.append((task, ds, windows, entry))
    if missing:
        raise IncompleteSubmissionError(missing)

    def one(plan) -> EvaluationSummary:
        task, ds, windows, entry = plan
        leak = bool(entry.leakage)
        if entry.failed:
            return summarize(
                task, model, [], windows, runtime_s=entry.runtime_s, trained_on_this_dataset=leak,
                failed=True, failure_reason=entry.failure_reason,
            )
        scores = []
        for w in windows:
            fc = _assemble(task, ds, w.index, entry.forecasts, model)
            scores.append(score_window(slice_window(ds, w, task), fc, task, skip_zero_scale))
        return summarize(task, model, scores, windows, runtime_s=entry.runtime_s, trained_on_this_dataset=leak)

    return map_ordered(one, plans, jobs)


def forecasts_to_records(
    task: Task,
    ds: TimeSeriesDataset,
    window_index: int,
    forecast: ForecastSet,
    trained_on_this_dataset: bool = False,
) -> list[dict]:
    """Inverse of submission assembly: one record per (series, target)."""
    out = []
    point = forecast.point_forecast()
    for n, item in enumerate(ds.item_ids):
        for d in range(ds.num_targets):
            out.append(
                {
                    "task_name": task.task_name,
                    "model_name": forecast.model_name,
                    "window_index": window_index,
                    "item_id": item,
                    "dim_index": d,
                    "trained_on_this_dataset": trained_on_this_dataset,
                    "point": point[n, d].tolist(),
                    "quantiles": {repr(q): forecast.quantiles[n, d, :, k].tolist() for k, q in enumerate(forecast.quantile_levels)},
                }
            )
    return out

