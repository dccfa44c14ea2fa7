from __future__ import annotations

import csv
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import pytest

from fcbench.dataset import DatasetManifest, load_dataset
from fcbench.task import Task


def hourly(n: int, start: datetime = datetime(2024, 1, 1)) -> list[str]:
    return [(start + timedelta(hours=i)).strftime("%Y-%m-%dT%H:%M:%S") for i in range(n)]


def write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def series_dataset(tmp_path: Path, values: dict[str, np.ndarray], freq: str = "H", known: dict | None = None,
                   past: dict | None = None, name: str = "data.csv"):
    """Write a long-format CSV for ``{item_id: (T,) or (D, T) array}`` and load it back."""
    first = np.atleast_2d(next(iter(values.values())))
    D = first.shape[0]
    targets = ["target"] if D == 1 else [f"y{d}" for d in range(D)]
    known = known or {}
    past = past or {}
    header = ["item_id", "timestamp", *targets, *past, *known]
    rows = []
    for item, arr in values.items():
        arr = np.atleast_2d(np.asarray(arr, dtype=float))
        ts = hourly(arr.shape[1])
        for t in range(arr.shape[1]):
            row = [item, ts[t]] + ["" if np.isnan(v) else repr(float(v)) for v in arr[:, t]]
            row += [past[c][item][t] for c in past]
            row += [known[c][item][t] for c in known]
            rows.append(row)
    write_csv(tmp_path / name, header, rows)
    manifest = DatasetManifest(
        data_path=str(tmp_path / name),
        format="csv",
        id_column="item_id",
        timestamp_column="timestamp",
        frequency=freq,
        target_columns=tuple(targets),
        past_dynamic_columns=tuple(past),
        known_dynamic_columns=tuple(known),
    )
    return load_dataset(manifest)


def make_task(ds, horizon: int, num_windows: int = 1, **kw) -> Task:
    return Task(task_name=kw.pop("task_name", "t"), dataset=ds.manifest, horizon=horizon, num_windows=num_windows, **kw)


@pytest.fixture(scope="session")
def synthetic_benchmark(tmp_path_factory) -> Path:
    from fcbench.synthetic import write_synthetic_benchmark

    return write_synthetic_benchmark(tmp_path_factory.mktemp("synthetic"), num_tasks=20, seed=0)
