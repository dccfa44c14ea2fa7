"""Synthetic seasonal benchmarks for smoke tests, demos and sanity checks.

Every series is ``level + trend*t + A*sin(2*pi*t/m + phase)`` plus Gaussian
noise whose variance is set by a signal-to-noise ratio ``var(signal)/var(noise)``
(``A**2 / 2`` over ``sigma**2``).

``snr=None`` gives noiseless data: one period is computed and tiled so that
``y[t] == y[t - m]`` holds exactly for every ``t > m``, while the first
observation is nudged so the seasonal error of any history stays positive.
"""

from __future__ import annotations

import csv
import io
import math
import os
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from fcbench._io import atomic_write_text
from fcbench.task import default_seasonality

# frequency -> (horizon, step) ; step is None for calendar frequencies
_FREQ_SETUP = {
    "H": (24, timedelta(hours=1)),
    "30T": (48, timedelta(minutes=30)),
    "D": (14, timedelta(days=1)),
    "M": (12, None),
    "Q": (8, None),
}
_START = datetime(2020, 1, 1)


def _timestamps(freq: str, n: int) -> list[str]:
    _, step = _FREQ_SETUP[freq]
    if step is not None:
        return [(_START + i * step).strftime("%Y-%m-%dT%H:%M:%S") for i in range(n)]
    months = 1 if freq == "M" else 3
    out = []
    for i in range(n):
        k = i * months
        out.append(f"{_START.year + k // 12:04d}-{k % 12 + 1:02d}-01")
    return out


def seasonal_signal(
    rng: np.random.Generator,
    length: int,
    period: int,
    snr: float | None = 10.0,
    level: float = 10.0,
    amplitude: float = 2.0,
    trend: float = 0.0,
) -> np.ndarray:
    t = np.arange(length)
    phase = rng.uniform(0, 2 * math.pi)
    if snr is None:
        season = level + amplitude * np.sin(2 * math.pi * np.arange(period) / period + phase)
        y = np.resize(season, length) + trend * t
        y[0] += amplitude
        return y
    y = level + trend * t + amplitude * np.sin(2 * math.pi * t / period + phase)
    return y + rng.normal(0.0, amplitude / math.sqrt(2.0 * snr), size=length)


def write_synthetic_benchmark(
    out_dir: str | os.PathLike,
    num_tasks: int = 20,
    seed: int = 0,
    snr: float | None = 10.0,
    frequencies: Sequence[str] = ("H", "H", "30T", "D", "M", "Q"),
    name: str = "synthetic",
) -> Path:
    """Write CSV datasets, manifests and ``benchmark.yaml`` under ``out_dir``; return the YAML path.

    Tasks vary in frequency, number of series (1-4), number of targets (1-2)
    and number of windows (1-3).  Task 0 carries a known covariate and a static
    column; task 1 has a few missing history values.  Output depends only on the
    arguments.
    """
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    tasks = []
    for r in range(num_tasks):
        freq = frequencies[r % len(frequencies)]
        m = default_seasonality(freq)
        H, _ = _FREQ_SETUP[freq]
        W = int(rng.integers(1, 4))
        N = int(rng.integers(1, 5))
        D = 2 if rng.random() < 0.25 else 1
        base_len = 2 * H + 1 + W * H + 2 * m
        targets = [f"y{d}" for d in range(D)] if D > 1 else ["target"]
        known = ["promo"] if r == 0 else []
        static = ["region"] if r == 0 else []

        header = ["item_id", "timestamp", *targets, *known, *static]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for n in range(N):
            length = base_len + int(rng.integers(0, m + 1))
            ts = _timestamps(freq, length)
            cols = [
                seasonal_signal(rng, length, m, snr, level=float(rng.uniform(5, 50)), amplitude=float(rng.uniform(1, 5)))
                for _ in range(D)
            ]
            if r == 1 and n == 0:
                cols[0][[3, 7, 11]] = np.nan
            promo = (rng.random(length) < 0.2).astype(int)
            for i in range(length):
                row = [f"s{n}", ts[i]]
                row += ["" if np.isnan(c[i]) else repr(float(c[i])) for c in cols]
                if known:
                    row.append(int(promo[i]))
                if static:
                    row.append(f"region{n % 2}")
                w.writerow(row)
        stem = f"ds{r:02d}"
        atomic_write_text(out / "data" / f"{stem}.csv", buf.getvalue())
        manifest = {
            "data_path": f"data/{stem}.csv",
            "format": "csv",
            "id_column": "item_id",
            "timestamp_column": "timestamp",
            "frequency": freq,
            "target_columns": targets,
            "known_dynamic_columns": known,
            "static_columns": static,
        }
        atomic_write_text(out / f"{stem}.yaml", yaml.safe_dump(manifest, sort_keys=False))
        tasks.append({"task_name": f"{stem}_{freq}_h{H}", "dataset": f"{stem}.yaml", "horizon": H, "num_windows": W})
    path = out / "benchmark.yaml"
    atomic_write_text(path, yaml.safe_dump({"name": name, "tasks": tasks}, sort_keys=False))
    return path
