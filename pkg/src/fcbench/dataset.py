"""Loading, validating and slicing manifest-described time series datasets.

A dataset lives in one long-format file (CSV or JSON lines) with one row per
``(id, timestamp)``.  Multivariate targets are wide columns within a row.  A
YAML manifest names the columns and assigns each covariate column a role:

* ``past_dynamic_columns``  observed only up to the forecast cutoff
* ``known_dynamic_columns`` available for the forecast horizon as well
* ``static_columns``        constant per series

Timestamps are ISO-8601 strings in files and are mapped to integer period
indices at the declared frequency, so the scoring core never does calendar
arithmetic.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import yaml

from fcbench.errors import (
    EmptyDatasetError,
    InsufficientLengthError,
    IrregularTimestampsError,
    MissingColumnError,
    SchemaError,
    UnknownFrequencyError,
)

if TYPE_CHECKING:
    from fcbench.task import EvaluationWindow, Task

DATA_ROOT_ENV = "FCBENCH_DATA_ROOT"

# step length in seconds for fixed-width frequencies; calendar ones are handled separately
_FIXED_STEPS = {
    "T": 60,
    "5T": 300,
    "10T": 600,
    "15T": 900,
    "30T": 1800,
    "H": 3600,
    "D": 86400,
    "W": 7 * 86400,
}
_CALENDAR = ("M", "Q", "Y")
SUPPORTED_FREQUENCIES: tuple[str, ...] = tuple(_FIXED_STEPS) + _CALENDAR


def check_frequency(freq: str) -> str:
    if freq not in SUPPORTED_FREQUENCIES:
        raise UnknownFrequencyError(
            f"unsupported frequency {freq!r}; expected one of {', '.join(SUPPORTED_FREQUENCIES)}"
        )
    return freq


def _parse_iso(text: str) -> datetime:
    s = str(text).strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        raise IrregularTimestampsError(f"cannot parse timestamp {text!r} as ISO-8601") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def timestamp_to_period(text: str, freq: str) -> tuple[int, int]:
    """Map an ISO timestamp to ``(period_index, phase)`` at ``freq``.

    ``phase`` is the offset inside the period (seconds for fixed-width
    frequencies, always 0 for calendar ones); a regular series keeps it constant.
    """
    dt = _parse_iso(text)
    if freq in _FIXED_STEPS:
        secs = int(dt.timestamp())
        step = _FIXED_STEPS[freq]
        return secs // step, secs % step
    if freq == "M":
        return dt.year * 12 + dt.month - 1, 0
    if freq == "Q":
        return dt.year * 4 + (dt.month - 1) // 3, 0
    return dt.year, 0


@dataclass(frozen=True)
class DatasetManifest:
    data_path: str
    format: str
    id_column: str
    timestamp_column: str
    frequency: str
    target_columns: tuple[str, ...]
    past_dynamic_columns: tuple[str, ...] = ()
    known_dynamic_columns: tuple[str, ...] = ()
    static_columns: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("target_columns", "past_dynamic_columns", "known_dynamic_columns", "static_columns"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.format not in ("csv", "jsonl"):
            raise SchemaError(f"format must be 'csv' or 'jsonl', got {self.format!r}", "format")
        if not self.target_columns:
            raise SchemaError("at least one target column is required", "target_columns")
        check_frequency(self.frequency)
        roles = [
            self.target_columns,
            self.past_dynamic_columns,
            self.known_dynamic_columns,
            self.static_columns,
        ]
        seen: dict[str, int] = {}
        for i, cols in enumerate(roles):
            for c in cols:
                if c in seen or c in (self.id_column, self.timestamp_column):
                    raise SchemaError(f"column {c!r} is assigned to more than one role")
                seen[c] = i

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | os.PathLike | None = None, path: str = "") -> "DatasetManifest":
        if not isinstance(raw, dict):
            raise SchemaError("manifest must be a mapping", path)
        allowed = {f.name for f in fields(cls)}
        for key in raw:
            if key not in allowed:
                raise SchemaError(f"unknown key {key!r}", f"{path}.{key}" if path else key)
        for key in ("data_path", "format", "id_column", "timestamp_column", "frequency", "target_columns"):
            if key not in raw:
                raise SchemaError("required key is missing", f"{path}.{key}" if path else key)
        kwargs = dict(raw)
        for key in ("target_columns", "past_dynamic_columns", "known_dynamic_columns", "static_columns"):
            value = kwargs.get(key, [])
            if isinstance(value, str) or not isinstance(value, (list, tuple)):
                raise SchemaError("expected a list of column names", f"{path}.{key}" if path else key)
            kwargs[key] = tuple(str(v) for v in value)
        kwargs["frequency"] = str(kwargs["frequency"])
        kwargs["data_path"] = resolve_data_path(str(kwargs["data_path"]), base_dir)
        try:
            return cls(**kwargs)
        except SchemaError as exc:
            if not path:
                raise
            sub = f"{path}.{exc.path}" if exc.path else path
            raise SchemaError(exc.message, sub) from None

    @classmethod
    def from_yaml(cls, path: str | os.PathLike) -> "DatasetManifest":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        return cls.from_dict(raw, base_dir=Path(path).parent)

    def to_dict(self) -> dict:
        return {
            "data_path": self.data_path,
            "format": self.format,
            "id_column": self.id_column,
            "timestamp_column": self.timestamp_column,
            "frequency": self.frequency,
            "target_columns": list(self.target_columns),
            "past_dynamic_columns": list(self.past_dynamic_columns),
            "known_dynamic_columns": list(self.known_dynamic_columns),
            "static_columns": list(self.static_columns),
        }

    @property
    def dynamic_columns(self) -> tuple[str, ...]:
        return self.target_columns + self.past_dynamic_columns + self.known_dynamic_columns


def resolve_data_path(data_path: str, base_dir: str | os.PathLike | None) -> str:
    """Absolute paths pass through; relative ones resolve against $FCBENCH_DATA_ROOT
    when set, otherwise against the directory of the declaring file."""
    p = Path(data_path)
    if p.is_absolute():
        return str(p)
    root = os.environ.get(DATA_ROOT_ENV)
    if root:
        return str(Path(root) / p)
    if base_dir is not None:
        return str(Path(base_dir) / p)
    return str(p)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Series:
    """One item of a dataset.  ``targets`` has shape ``(D, T)``."""

    item_id: str
    timestamps: np.ndarray  # int64 period indices, length T
    timestamp_labels: tuple[str, ...]
    targets: np.ndarray
    past_dynamic: dict[str, np.ndarray] = field(default_factory=dict)
    known_dynamic: dict[str, np.ndarray] = field(default_factory=dict)
    static: dict[str, Any] = field(default_factory=dict)

    @property
    def length(self) -> int:
        return int(self.targets.shape[1])

    @property
    def num_targets(self) -> int:
        return int(self.targets.shape[0])


@dataclass(frozen=True)
class TimeSeriesDataset:
    series: tuple[Series, ...]
    frequency: str
    manifest: DatasetManifest

    @property
    def num_series(self) -> int:
        return len(self.series)

    @property
    def num_targets(self) -> int:
        return len(self.manifest.target_columns)

    @property
    def min_length(self) -> int:
        return min(s.length for s in self.series)

    @property
    def item_ids(self) -> list[str]:
        return [s.item_id for s in self.series]


# ---------------------------------------------------------------------------
# loading


def _to_float(value: Any, where: str) -> float:
    if value is None:
        return math.nan
    if isinstance(value, bool):
        return float(value)
    if isinstance(value, (int, float)):
        return float(value)
    s = str(value).strip()
    if s == "":
        return math.nan
    try:
        return float(s)
    except ValueError:
        raise ValueError(f"{where}: non-numeric value {value!r}") from None


def _is_missing(value: Any) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == "")


def _column_array(values: list, name: str, numeric_required: bool) -> np.ndarray:
    """Float array when every present cell parses as a number, else an object array."""
    try:
        return np.array([_to_float(v, name) for v in values], dtype=np.float64)
    except ValueError:
        if numeric_required:
            raise
        return np.array([None if _is_missing(v) else str(v) for v in values], dtype=object)


def _read_rows(manifest: DatasetManifest) -> tuple[list[str], list[dict]]:
    path = Path(manifest.data_path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    if manifest.format == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise EmptyDatasetError(f"{path}: missing header row")
            columns = list(reader.fieldnames)
            rows = list(reader)
        return columns, rows
    rows = []
    columns: dict[str, None] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise SchemaError(f"{path}:{lineno}: record is not a JSON object")
            rows.append(rec)
            for k in rec:
                columns.setdefault(k, None)
    return list(columns), rows


def load_dataset(manifest: DatasetManifest) -> TimeSeriesDataset:
    """Read the manifest's file into a dataset grouped by id and sorted by time.

    Missing numeric cells (empty CSV cell, JSON ``null`` or absent key) become NaN.
    """
    columns, rows = _read_rows(manifest)
    required = (manifest.id_column, manifest.timestamp_column) + manifest.dynamic_columns + manifest.static_columns
    missing = [c for c in required if c not in columns]
    if missing:
        raise MissingColumnError(f"{manifest.data_path}: missing column(s) {', '.join(missing)}")
    if not rows:
        raise EmptyDatasetError(f"{manifest.data_path}: no data rows")

    groups: dict[str, list[dict]] = {}
    for row in rows:
        item = row.get(manifest.id_column)
        if _is_missing(item):
            raise SchemaError(f"{manifest.data_path}: row with empty {manifest.id_column!r}")
        groups.setdefault(str(item), []).append(row)

    series = []
    freq = manifest.frequency
    for item_id, item_rows in groups.items():
        keyed = []
        for row in item_rows:
            label = str(row[manifest.timestamp_column])
            idx, phase = timestamp_to_period(label, freq)
            keyed.append((idx, phase, label, row))
        keyed.sort(key=lambda k: (k[0], k[1]))
        idx = np.array([k[0] for k in keyed], dtype=np.int64)
        phases = {k[1] for k in keyed}
        if len(phases) > 1:
            raise IrregularTimestampsError(f"series {item_id!r}: timestamps not aligned to frequency {freq}")
        steps = np.diff(idx)
        if np.any(steps == 0):
            dup = keyed[int(np.argmax(steps == 0)) + 1][2]
            raise IrregularTimestampsError(f"series {item_id!r}: duplicated timestamp {dup}")
        if np.any(steps != 1):
            gap = keyed[int(np.argmax(steps != 1)) + 1][2]
            raise IrregularTimestampsError(f"series {item_id!r}: gap before {gap} at frequency {freq}")
        ordered = [k[3] for k in keyed]

        targets = np.vstack(
            [
                _column_array([r.get(c) for r in ordered], f"series {item_id!r} column {c!r}", True)
                for c in manifest.target_columns
            ]
        )
        past = {
            c: _readonly(_column_array([r.get(c) for r in ordered], c, False))
            for c in manifest.past_dynamic_columns
        }
        known = {
            c: _readonly(_column_array([r.get(c) for r in ordered], c, False))
            for c in manifest.known_dynamic_columns
        }
        static = {}
        for c in manifest.static_columns:
            values = {json.dumps(r.get(c), sort_keys=True) for r in ordered}
            if len(values) > 1:
                raise SchemaError(f"series {item_id!r}: static column {c!r} varies over time")
            static[c] = ordered[0].get(c)
        series.append(
            Series(
                item_id=item_id,
                timestamps=_readonly(idx),
                timestamp_labels=tuple(k[2] for k in keyed),
                targets=_readonly(targets),
                past_dynamic=past,
                known_dynamic=known,
                static=static,
            )
        )
    return TimeSeriesDataset(series=tuple(series), frequency=freq, manifest=manifest)


def _cell_text(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return "" if math.isnan(value) else repr(float(value))
    return str(value)


def _cell_json(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return None if math.isnan(value) else float(value)
    return value


def write_dataset(ds: TimeSeriesDataset, path: str | os.PathLike, fmt: str | None = None) -> None:
    """Write ``ds`` in long format; ``load_dataset`` on the result returns the same values."""
    m = ds.manifest
    fmt = fmt or m.format
    header = [m.id_column, m.timestamp_column, *m.target_columns, *m.past_dynamic_columns,
              *m.known_dynamic_columns, *m.static_columns]
    records = []
    for s in ds.series:
        for t in range(s.length):
            rec = [s.item_id, s.timestamp_labels[t]]
            rec += [s.targets[d, t] for d in range(s.num_targets)]
            rec += [s.past_dynamic[c][t] for c in m.past_dynamic_columns]
            rec += [s.known_dynamic[c][t] for c in m.known_dynamic_columns]
            rec += [s.static[c] for c in m.static_columns]
            records.append(rec)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for rec in records:
                w.writerow([_cell_text(v) for v in rec])
    elif fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps({k: _cell_json(v) for k, v in zip(header, rec)}) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Defect:
    severity: str  # "error" blocks evaluation, "warning" does not
    kind: str
    item_id: str | None
    detail: str


@dataclass(frozen=True)
class SeriesCheck:
    item_id: str
    length: int
    required_length: int
    sufficient: bool
    nan_counts: dict[str, int]


@dataclass
class ValidationReport:
    task_name: str
    required_length: int
    num_windows: int
    cutoffs: list[int]
    series: list[SeriesCheck] = field(default_factory=list)
    defects: list[Defect] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.defects)

    def to_dict(self) -> dict:
        return {
            "task_name": self.task_name,
            "ok": self.ok,
            "required_length": self.required_length,
            "num_windows": self.num_windows,
            "cutoffs": list(self.cutoffs),
            "series": [
                {
                    "item_id": s.item_id,
                    "length": s.length,
                    "required_length": s.required_length,
                    "sufficient": s.sufficient,
                    "nan_counts": s.nan_counts,
                }
                for s in self.series
            ],
            "defects": [d.__dict__ for d in self.defects],
        }


def validate_dataset(ds: TimeSeriesDataset, task: "Task") -> ValidationReport:
    """Report-only health check of ``ds`` against ``task``; never raises for data problems.

    A series is "sufficient" when it holds ``2H + 1 + W*H`` observations, enough
    for the requested ``W`` windows under the end-anchored cutoff rule.
    """
    from fcbench.errors import NoFeasibleWindowError
    from fcbench.metrics import seasonal_error_matrix
    from fcbench.task import windows_for_dataset

    H, W = task.horizon, task.num_windows
    required = 2 * H + 1 + W * H
    report = ValidationReport(task_name=task.task_name, required_length=required, num_windows=0, cutoffs=[])
    m = ds.manifest
    for s in ds.series:
        nan_counts = {c: int(np.isnan(s.targets[d]).sum()) for d, c in enumerate(m.target_columns)}
        report.series.append(SeriesCheck(s.item_id, s.length, required, s.length >= required, nan_counts))
        for c, n in nan_counts.items():
            if n:
                report.defects.append(Defect("warning", "missing_values", s.item_id, f"{n} missing value(s) in {c!r}"))

    try:
        windows = windows_for_dataset(task, ds)
    except NoFeasibleWindowError as exc:
        report.defects.append(Defect("error", "NoFeasibleWindow", None, str(exc)))
        return report
    report.num_windows = len(windows)
    report.cutoffs = [w.cutoff for w in windows]
    if len(windows) < W:
        report.defects.append(
            Defect("warning", "fewer_windows", None, f"only {len(windows)} of {W} requested windows fit")
        )

    zero_seen: set[tuple[str, int]] = set()
    for w in windows:
        for s in ds.series:
            cut = w.cutoff_for(s.length)
            past = s.targets[:, :cut]
            try:
                scales = seasonal_error_matrix(past[None], task.seasonality)[0]
            except Exception as exc:  # HistoryTooShort and friends
                report.defects.append(Defect("error", type(exc).__name__, s.item_id, f"window {w.index}: {exc}"))
                continue
            for d in np.flatnonzero(scales == 0):
                key = (s.item_id, int(d))
                if key not in zero_seen:
                    zero_seen.add(key)
                    report.defects.append(
                        Defect(
                            "warning",
                            "zero_scale",
                            s.item_id,
                            f"seasonal error is 0 for {m.target_columns[d]!r} (m={task.seasonality}) "
                            f"from window {w.index}",
                        )
                    )
            for c, arr in s.known_dynamic.items():
                future = arr[cut : cut + task.horizon]
                if _has_missing(future) or len(future) < task.horizon:
                    report.defects.append(
                        Defect(
                            "error",
                            "known_covariate_short",
                            s.item_id,
                            f"known covariate {c!r} does not cover the horizon of window {w.index}",
                        )
                    )
    return report


def _has_missing(a: np.ndarray) -> bool:
    if a.dtype == object:
        return any(v is None for v in a)
    return bool(np.isnan(a).any())


# ---------------------------------------------------------------------------
# slicing


@dataclass(frozen=True)
class PastSeries:
    """Everything observable for one series at a cutoff."""

    item_id: str
    target: np.ndarray  # (D, cutoff)
    past_dynamic: dict[str, np.ndarray]
    known_dynamic: dict[str, np.ndarray]  # values up to and including the cutoff
    static: dict[str, Any]


@dataclass(frozen=True)
class PredictionInput:
    """The view handed to a forecaster: history plus future known covariates, no actuals."""

    window_index: int
    horizon: int
    past: tuple[PastSeries, ...]
    future_known: tuple[dict[str, np.ndarray], ...]


@dataclass(frozen=True)
class WindowSlice:
    window_index: int
    horizon: int
    past: tuple[PastSeries, ...]
    future_known: tuple[dict[str, np.ndarray], ...]
    future_actuals: tuple[np.ndarray, ...]  # each (D, H)

    def prediction_input(self) -> PredictionInput:
        return PredictionInput(self.window_index, self.horizon, self.past, self.future_known)

    def actuals_array(self) -> np.ndarray:
        """Stacked held-out targets, shape ``(N, D, H)``."""
        return np.stack(self.future_actuals)


def slice_window(ds: TimeSeriesDataset, window: "EvaluationWindow", task: "Task") -> WindowSlice:
    """Split every series at the window cutoff into read-only past and future views.

    Cutoffs are end-anchored: a series longer than the shortest one keeps the
    same distance between its cutoff and its last observation.
    """
    H = task.horizon
    past, future_known, actuals = [], [], []
    for s in ds.series:
        cut = window.cutoff_for(s.length)
        if cut < 1 or cut + H > s.length:
            raise InsufficientLengthError(
                f"series {s.item_id!r} of length {s.length} cannot supply cutoff {cut} with horizon {H}"
            )
        past.append(
            PastSeries(
                item_id=s.item_id,
                target=s.targets[:, :cut],
                past_dynamic={c: a[:cut] for c, a in s.past_dynamic.items()},
                known_dynamic={c: a[:cut] for c, a in s.known_dynamic.items()},
                static=dict(s.static),
            )
        )
        future_known.append({c: a[cut : cut + H] for c, a in s.known_dynamic.items()})
        actuals.append(s.targets[:, cut : cut + H])
    return WindowSlice(window.index, H, tuple(past), tuple(future_known), tuple(actuals))


def load_manifest_or_inline(value: Any, base_dir: str | os.PathLike, path: str) -> DatasetManifest:
    """Resolve a ``dataset`` entry that is either an inline mapping or a manifest path."""
    if isinstance(value, dict):
        return DatasetManifest.from_dict(value, base_dir=base_dir, path=path)
    if isinstance(value, str):
        p = Path(value)
        if not p.is_absolute():
            p = Path(base_dir) / p
        if not p.exists():
            raise SchemaError(f"manifest file not found: {p}", path)
        with open(p, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        return DatasetManifest.from_dict(raw, base_dir=p.parent, path=path)
    raise SchemaError("dataset must be a mapping or a path to a manifest", path)

