"""Tasks, benchmarks and rolling-origin evaluation windows.

A benchmark YAML file looks like::

    name: my-benchmark
    tasks:
      - task_name: energy_hourly
        dataset: manifests/energy.yaml     # or an inline manifest mapping
        horizon: 24
        num_windows: 10
        seasonality: 24                    # optional, defaults from frequency
        quantile_levels: [0.1, 0.5, 0.9]   # optional, defaults to 0.1..0.9
        eval_metric: mase                  # optional
        quantile_metric: sql               # optional

Unknown keys are rejected so a typo can never silently change a task.
"""

from __future__ import annotations

import math
import os
from datetime import date, datetime
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from fcbench.dataset import (
    DatasetManifest,
    TimeSeriesDataset,
    load_manifest_or_inline,
    timestamp_to_period,
)
from fcbench.errors import (
    DuplicateTaskNameError,
    NoFeasibleWindowError,
    SchemaError,
    UnknownFrequencyError,
    WindowCountMismatchError,
)

METRIC_NAMES: tuple[str, ...] = ("mase", "sql", "wql", "wape")
DEFAULT_QUANTILE_LEVELS: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

_SEASONALITY = {
    "T": 1440,
    "5T": 288,
    "10T": 144,
    "15T": 96,
    "30T": 48,
    "H": 24,
    "D": 7,
    "W": 1,
    "M": 12,
    "Q": 4,
    "Y": 1,
}


def default_seasonality(frequency: str) -> int:
    """Seasonal period used by MASE/SQL scaling when a task does not set one."""
    try:
        return _SEASONALITY[frequency]
    except KeyError:
        raise UnknownFrequencyError(f"no default seasonality for frequency {frequency!r}") from None


@dataclass(frozen=True)
class Task:
    task_name: str
    dataset: DatasetManifest
    horizon: int
    num_windows: int = 1
    initial_cutoff: int | str | None = None
    seasonality: int | None = None
    quantile_levels: tuple[float, ...] = DEFAULT_QUANTILE_LEVELS
    eval_metric: str = "mase"
    quantile_metric: str = "sql"

    def __post_init__(self):
        if self.seasonality is None:
            object.__setattr__(self, "seasonality", default_seasonality(self.dataset.frequency))
        object.__setattr__(self, "quantile_levels", tuple(float(q) for q in self.quantile_levels))
        if self.horizon < 1:
            raise SchemaError("horizon must be >= 1", "horizon")
        if self.num_windows < 1:
            raise SchemaError("num_windows must be >= 1", "num_windows")
        if self.seasonality < 1:
            raise SchemaError("seasonality must be >= 1", "seasonality")
        qs = self.quantile_levels
        if not qs:
            raise SchemaError("quantile_levels must not be empty", "quantile_levels")
        if any(not (0.0 < q < 1.0) for q in qs):
            raise SchemaError("quantile levels must lie strictly between 0 and 1", "quantile_levels")
        if any(b <= a for a, b in zip(qs, qs[1:])):
            raise SchemaError("quantile levels must be strictly increasing", "quantile_levels")
        if self.eval_metric not in METRIC_NAMES:
            raise SchemaError(f"eval_metric must be one of {METRIC_NAMES}", "eval_metric")
        if self.quantile_metric not in ("sql", "wql"):
            raise SchemaError("quantile_metric must be 'sql' or 'wql'", "quantile_metric")

    @property
    def metrics(self) -> tuple[str, ...]:
        return METRIC_NAMES

    def to_dict(self) -> dict:
        return {
            "task_name": self.task_name,
            "dataset": self.dataset.to_dict(),
            "horizon": self.horizon,
            "num_windows": self.num_windows,
            "initial_cutoff": self.initial_cutoff,
            "seasonality": self.seasonality,
            "quantile_levels": list(self.quantile_levels),
            "eval_metric": self.eval_metric,
            "quantile_metric": self.quantile_metric,
            "metrics": list(self.metrics),
        }


@dataclass(frozen=True)
class EvaluationWindow:
    """One forecast origin.

    ``cutoff`` counts the observations given as input in the shortest series
    (length ``reference_length``).  Longer series use the same distance to
    their own end, see :meth:`cutoff_for`.
    """

    index: int  # 1-based
    cutoff: int
    reference_length: int

    @property
    def offset_from_end(self) -> int:
        return self.reference_length - self.cutoff

    def cutoff_for(self, series_length: int) -> int:
        return series_length - self.offset_from_end


@dataclass(frozen=True)
class Benchmark:
    name: str
    tasks: tuple[Task, ...]

    def __post_init__(self):
        names = [t.task_name for t in self.tasks]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise DuplicateTaskNameError(f"duplicate task name(s): {', '.join(dupes)}")

    def task(self, name: str) -> Task:
        for t in self.tasks:
            if t.task_name == name:
                return t
        raise KeyError(name)


_TASK_KEYS = {
    "task_name",
    "dataset",
    "horizon",
    "num_windows",
    "initial_cutoff",
    "seasonality",
    "quantile_levels",
    "eval_metric",
    "quantile_metric",
}


def _int_field(raw: dict, key: str, path: str, default=None):
    value = raw.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"expected an integer, got {value!r}", f"{path}.{key}")
    return value


def _parse_task(raw: Any, path: str, base_dir: Path) -> Task:
    if not isinstance(raw, dict):
        raise SchemaError("task entry must be a mapping", path)
    for key in raw:
        if key not in _TASK_KEYS:
            raise SchemaError(f"unknown key {key!r}", f"{path}.{key}")
    if "dataset" not in raw:
        raise SchemaError("required key is missing", f"{path}.dataset")
    if "horizon" not in raw:
        raise SchemaError("required key is missing", f"{path}.horizon")
    manifest = load_manifest_or_inline(raw["dataset"], base_dir, f"{path}.dataset")
    horizon = _int_field(raw, "horizon", path)
    num_windows = _int_field(raw, "num_windows", path, 1)
    seasonality = _int_field(raw, "seasonality", path)

    initial_cutoff = raw.get("initial_cutoff")
    if isinstance(initial_cutoff, (date, datetime)):
        # YAML turns bare dates into date objects
        initial_cutoff = initial_cutoff.isoformat()
    if initial_cutoff is not None:
        if isinstance(initial_cutoff, bool) or not isinstance(initial_cutoff, (int, str)):
            raise SchemaError("expected an integer index or an ISO timestamp", f"{path}.initial_cutoff")
        if isinstance(initial_cutoff, str):
            try:
                timestamp_to_period(initial_cutoff, manifest.frequency)
            except Exception:
                raise SchemaError(f"not an ISO timestamp: {initial_cutoff!r}", f"{path}.initial_cutoff") from None

    qs = raw.get("quantile_levels", list(DEFAULT_QUANTILE_LEVELS))
    if not isinstance(qs, list) or not all(isinstance(q, (int, float)) and not isinstance(q, bool) for q in qs):
        raise SchemaError("expected a list of numbers", f"{path}.quantile_levels")

    name = raw.get("task_name")
    if name is None:
        name = f"{Path(manifest.data_path).stem}_{manifest.frequency}_h{horizon}"
    try:
        return Task(
            task_name=str(name),
            dataset=manifest,
            horizon=horizon,
            num_windows=num_windows,
            initial_cutoff=initial_cutoff,
            seasonality=seasonality,
            quantile_levels=tuple(qs),
            eval_metric=str(raw.get("eval_metric", "mase")).lower(),
            quantile_metric=str(raw.get("quantile_metric", "sql")).lower(),
        )
    except SchemaError as exc:
        raise SchemaError(exc.message, f"{path}.{exc.path}" if exc.path else path) from None


def parse_benchmark(path: str | os.PathLike) -> Benchmark:
    """Load a benchmark YAML file into a fully-resolved :class:`Benchmark`."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise SchemaError(f"invalid YAML: {exc}") from None
    return benchmark_from_dict(raw, base_dir=path.parent, default_name=path.stem)


def benchmark_from_dict(raw: Any, base_dir: str | os.PathLike = ".", default_name: str = "benchmark") -> Benchmark:
    if not isinstance(raw, dict):
        raise SchemaError("benchmark file must be a mapping with a 'tasks' list")
    for key in raw:
        if key not in ("name", "tasks"):
            raise SchemaError(f"unknown key {key!r}", str(key))
    tasks_raw = raw.get("tasks")
    if not isinstance(tasks_raw, list) or not tasks_raw:
        raise SchemaError("expected a non-empty list", "tasks")
    tasks = tuple(_parse_task(t, f"tasks[{i}]", Path(base_dir)) for i, t in enumerate(tasks_raw))
    return Benchmark(name=str(raw.get("name", default_name)), tasks=tasks)


def generate_windows(task: Task, min_series_length: int, initial_cutoff: int | None = None) -> list[EvaluationWindow]:
    """End-anchored rolling-origin cutoffs spaced by the horizon.

    Without an explicit initial cutoff the last window ends at the last
    observation and ``W' = min(W, (L - (2H+1)) // H)`` windows fit.  With one,
    cutoffs advance by ``H`` from it for as long as the horizon stays inside
    the series.
    """
    H, L = task.horizon, int(min_series_length)
    min_cutoff = 2 * H + 1
    if initial_cutoff is None and isinstance(task.initial_cutoff, int):
        initial_cutoff = task.initial_cutoff
    elif initial_cutoff is None and isinstance(task.initial_cutoff, str):
        raise ValueError("timestamp initial_cutoff needs a dataset; use windows_for_dataset")

    if initial_cutoff is None:
        n = min(task.num_windows, (L - min_cutoff) // H) if L >= min_cutoff else 0
        if n < 1:
            raise NoFeasibleWindowError(
                f"task {task.task_name!r}: series length {L} < {min_cutoff + H} needed for one window "
                f"with horizon {H}"
            )
        cutoffs = [L - (n - w) * H for w in range(n)]
    else:
        if initial_cutoff < min_cutoff:
            raise NoFeasibleWindowError(
                f"task {task.task_name!r}: initial cutoff {initial_cutoff} leaves fewer than "
                f"{min_cutoff} past observations"
            )
        n = min(task.num_windows, (L - initial_cutoff) // H) if L >= initial_cutoff else 0
        if n < 1:
            raise NoFeasibleWindowError(
                f"task {task.task_name!r}: no horizon of {H} fits after cutoff {initial_cutoff} (L={L})"
            )
        cutoffs = [initial_cutoff + w * H for w in range(n)]
    return [EvaluationWindow(index=i + 1, cutoff=c, reference_length=L) for i, c in enumerate(cutoffs)]


def windows_for_dataset(task: Task, ds: TimeSeriesDataset) -> list[EvaluationWindow]:
    """Windows governed by the shortest series; timestamp cutoffs are located in it."""
    shortest = min(ds.series, key=lambda s: s.length)
    idx = None
    if isinstance(task.initial_cutoff, str):
        period, _ = timestamp_to_period(task.initial_cutoff, ds.frequency)
        idx = int(np.searchsorted(shortest.timestamps, period, side="right"))
    return generate_windows(task, shortest.length, initial_cutoff=idx)


@dataclass
class EvaluationSummary:
    task_name: str
    model_name: str
    task: dict
    cutoffs: list[int] = field(default_factory=list)
    window_metrics: list[dict[str, float]] = field(default_factory=list)
    metrics: dict[str, float] = field(default_factory=dict)
    runtime_s: float | None = None
    trained_on_this_dataset: bool = False
    failed: bool = False
    failure_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "task_name": self.task_name,
            "model_name": self.model_name,
            "failed": self.failed,
            "failure_reason": self.failure_reason,
            "trained_on_this_dataset": self.trained_on_this_dataset,
            "runtime_s": self.runtime_s,
            "metrics": dict(self.metrics),
            "window_metrics": [dict(m) for m in self.window_metrics],
            "cutoffs": list(self.cutoffs),
            "task": self.task,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "EvaluationSummary":
        return cls(
            task_name=raw["task_name"],
            model_name=raw["model_name"],
            task=raw.get("task", {}),
            cutoffs=list(raw.get("cutoffs", [])),
            window_metrics=[
                {k: (math.nan if v is None else float(v)) for k, v in m.items()}
                for m in raw.get("window_metrics", [])
            ],
            metrics={k: (math.nan if v is None else float(v)) for k, v in (raw.get("metrics") or {}).items()},
            runtime_s=None if raw.get("runtime_s") is None else float(raw["runtime_s"]),
            trained_on_this_dataset=bool(raw.get("trained_on_this_dataset", False)),
            failed=bool(raw.get("failed", False)),
            failure_reason=raw.get("failure_reason"),
        )


def summarize(
    task: Task,
    model_name: str,
    per_window_scores: Sequence[dict[str, float]],
    windows: Sequence[EvaluationWindow],
    runtime_s: float | None = None,
    trained_on_this_dataset: bool = False,
    failed: bool = False,
    failure_reason: str | None = None,
) -> EvaluationSummary:
    """Collapse per-window scores into one task-level record (arithmetic mean per metric)."""
    if runtime_s is not None and runtime_s < 0:
        raise ValueError("runtime must be non-negative")
    summary = EvaluationSummary(
        task_name=task.task_name,
        model_name=model_name,
        task=task.to_dict(),
        cutoffs=[w.cutoff for w in windows],
        runtime_s=runtime_s,
        trained_on_this_dataset=trained_on_this_dataset,
        failed=failed,
        failure_reason=failure_reason,
    )
    if failed:
        return summary
    if len(per_window_scores) != len(windows):
        raise WindowCountMismatchError(
            f"task {task.task_name!r}: {len(windows)} windows but {len(per_window_scores)} score rows"
        )
    names = list(per_window_scores[0]) if per_window_scores else []
    for row in per_window_scores:
        if list(row) != names:
            raise WindowCountMismatchError(f"task {task.task_name!r}: windows report different metric sets")
    summary.window_metrics = [{k: float(v) for k, v in row.items()} for row in per_window_scores]
    summary.metrics = {k: float(np.mean([row[k] for row in per_window_scores])) for k in names}
    return summary


__all__ = [
    "Benchmark",
    "DEFAULT_QUANTILE_LEVELS",
    "EvaluationSummary",
    "EvaluationWindow",
    "METRIC_NAMES",
    "Task",
    "benchmark_from_dict",
    "default_seasonality",
    "generate_windows",
    "parse_benchmark",
    "summarize",
    "windows_for_dataset",
]
