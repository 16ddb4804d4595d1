"""Time-series container and delimited-text I/O shared across the package."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class TimeSeries:
    """An ``N x D`` block of real observations sampled on a uniform grid.

    ``values`` is stored read-only; use :meth:`copy_values` for a writable copy.
    """

    values: np.ndarray
    dt: float = 1.0
    t0: float = 0.0
    names: tuple[str, ...] = field(default=())
    transform: str = "identity"  # elementwise map already applied to the values

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValueError(f"TimeSeries values must be 1-D or 2-D, got shape {v.shape}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        names = tuple(self.names) or tuple(f"x{i}" for i in range(v.shape[1]))
        if len(names) != v.shape[1]:
            raise ValueError("names must match the number of columns")
        object.__setattr__(self, "names", names)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    def copy_values(self) -> np.ndarray:
        return np.array(self.values)

    def slice(self, start: int, stop: int | None = None) -> "TimeSeries":
        stop = len(self) if stop is None else stop
        return TimeSeries(self.values[start:stop], self.dt, self.t0 + start * self.dt, self.names,
                          self.transform)

    def resample(self, every: int) -> "TimeSeries":
        """Keep every ``every``-th sample."""
        if every < 1:
            raise ValueError("resample stride must be >= 1")
        return TimeSeries(self.values[::every], self.dt * every, self.t0, self.names, self.transform)


def as_array(series) -> np.ndarray:
    """Coerce a TimeSeries or array-like to a 2-D float array (no copy if possible)."""
    a = np.asarray(series, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D series, got shape {a.shape}")
    return a


def write_csv(path, header: Sequence[str], rows) -> Path:
    """Write a numeric table with ``.`` decimals and 17 significant digits.

    ``rows`` may mix strings and numbers; floats are formatted with ``%.17g``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % float(v)
    return str(v)


def export_series(series: TimeSeries, path) -> Path:
    """Write ``t,x0,x1,...`` rows at full double precision."""
    header = ["t", *series.names]
    return write_csv(path, header, np.column_stack([series.t, series.values]))
