"""Forecast benchmark harness: datasets, rolling-origin tasks, metrics, baselines and leaderboards."""

from __future__ import annotations

from fcbench.aggregate import (
    AggregateReport,
    BootstrapConfig,
    ErrorMatrix,
    average_rank,
    average_win_rate,
    bootstrap_intervals,
    bradley_terry,
    build_error_matrix,
    build_report,
    pairwise_skill,
    pairwise_win_rate,
    skill_scores,
)
from fcbench.baselines import BaselineSpec, drift, forecast_window, naive, seasonal_naive
from fcbench.dataset import (
    DatasetManifest,
    TimeSeriesDataset,
    load_dataset,
    slice_window,
    validate_dataset,
    write_dataset,
)
from fcbench.metrics import ForecastSet, mase, score_window, seasonal_error, sql, wape, wql
from fcbench.runner import forecasts_to_records, run_baselines, score_submission
from fcbench.task import (
    Benchmark,
    EvaluationSummary,
    EvaluationWindow,
    Task,
    generate_windows,
    parse_benchmark,
    summarize,
    windows_for_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateReport",
    "BaselineSpec",
    "Benchmark",
    "BootstrapConfig",
    "DatasetManifest",
    "ErrorMatrix",
    "EvaluationSummary",
    "EvaluationWindow",
    "ForecastSet",
    "Task",
    "TimeSeriesDataset",
    "average_rank",
    "average_win_rate",
    "bootstrap_intervals",
    "bradley_terry",
    "build_error_matrix",
    "build_report",
    "drift",
    "forecast_window",
    "forecasts_to_records",
    "generate_windows",
    "load_dataset",
    "mase",
    "naive",
    "pairwise_skill",
    "pairwise_win_rate",
    "parse_benchmark",
    "run_baselines",
    "score_submission",
    "score_window",
    "seasonal_error",
    "seasonal_naive",
    "skill_scores",
    "slice_window",
    "sql",
    "summarize",
    "validate_dataset",
    "wape",
    "windows_for_dataset",
    "wql",
    "write_dataset",
]
