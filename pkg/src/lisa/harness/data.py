"""Data preparation: generation or ingestion, split, log transform and
standardization, plus start-index sampling for multi-start evaluation."""

from __future__ import annotations

import csv
import hashlib
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..dynsys import (RegimeSwitchSpec, TrajectoryConfig, integrate, integrate_regime_switch,
                      make_system)
from ..errors import ConfigError, ParseError
from ..series import TimeSeries, as_array
from .config import ExperimentConfig

TIME_COLUMNS = ("t", "timestamp")


class StartsWithReplacementWarning(UserWarning):
    """Fewer admissible start indices than requested starts."""


def array_digest(a) -> str:
    """SHA-256 of an array's dtype, shape and bytes (used for leakage checks)."""
    a = np.ascontiguousarray(a)
    h = hashlib.sha256(f"{a.dtype.str}{a.shape}".encode())
    h.update(a.tobytes())
    return h.hexdigest()


# --- standardization -------------------------------------------------------

@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray
    flagged: tuple[int, ...] = ()  # coordinates whose scale fell back to 1

    def transform(self, x) -> np.ndarray:
        return (as_array(x) - self.mean) / self.scale

    def inverse(self, x) -> np.ndarray:
        return as_array(x) * self.scale + self.mean

    def apply(self, series: TimeSeries) -> TimeSeries:
        return TimeSeries(self.transform(series), series.dt, series.t0, series.names, series.transform)


def fit_standardizer(stats_source) -> Standardizer:
    x = as_array(stats_source)
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    bad = ~(scale > 0) | ~np.isfinite(scale)
    flagged = tuple(int(i) for i in np.flatnonzero(bad))
    if flagged:
        warnings.warn(f"zero-variance coordinates {flagged}: scale set to 1", stacklevel=2)
    scale = np.where(bad, 1.0, scale)
    for a in (mean, scale):
        a.setflags(write=False)
    return Standardizer(mean, scale, flagged)


def standardize(series: TimeSeries, stats_source=None) -> tuple[TimeSeries, Standardizer]:
    """Center and scale each coordinate with the statistics of ``stats_source``
    (default: ``series`` itself)."""
    std = fit_standardizer(series if stats_source is None else stats_source)
    return std.apply(series), std


# --- CSV ingestion ---------------------------------------------------------

def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"non-numeric cell {cell!r}", row=row, column=column) from None


def ingest_csv(path, log1p: bool = False) -> TimeSeries:
    """Read a wide numeric CSV with a header row.

    A leading ``t`` or ``timestamp`` column is taken as the time axis: if it is
    numeric and uniformly spaced it sets ``dt``/``t0``, otherwise it is dropped
    (``dt = 1``). Row numbers in errors are 1-based file lines.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if not body:
        raise ParseError(f"{path} has a header but no data rows", row=2)
    width = len(header)
    has_time = header[0].lower() in TIME_COLUMNS
    names = header[1:] if has_time else header
    if not names:
        raise ParseError("no value columns", row=1)
    values, times = [], []
    for i, r in enumerate(rows[1:], start=2):
        if not r:
            continue
        if len(r) != width:
            raise ParseError(f"expected {width} cells, found {len(r)}", row=i,
                             column=min(len(r), width) + 1)
        cells = r[1:] if has_time else r
        vals = [_parse_float(c, i, n) for c, n in zip(cells, names)]
        if log1p:
            for v, n in zip(vals, names):
                if not v > -1.0:
                    raise ParseError(f"value {v!r} is <= -1, log1p undefined", row=i, column=n)
        values.append(vals)
        times.append(r[0] if has_time else None)

    dt, t0 = 1.0, 0.0
    if has_time:
        try:
            t = np.array([float(s) for s in times])
        except ValueError:
            t = None  # e.g. ISO timestamps: keep unit spacing
        if t is not None and t.size > 1:
            steps = np.diff(t)
            if steps[0] > 0 and np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
                dt, t0 = float(steps[0]), float(t[0])
        elif t is not None:
            t0 = float(t[0])
    arr = np.array(values, dtype=float)
    if log1p:
        arr = np.log1p(arr)
    return TimeSeries(arr, dt=dt, t0=t0, names=tuple(names),
                      transform="log1p" if log1p else "identity")


def to_original_units(values, standardizer: Standardizer, transform: str = "identity") -> np.ndarray:
    """Undo standardization and then any elementwise transform."""
    x = standardizer.inverse(values)
    return np.expm1(x) if transform == "log1p" else x


# --- synthetic load --------------------------------------------------------

def synthetic_load(n_hours: int = 24 * 7 * 30, n_series: int = 6, seed: int = 0) -> TimeSeries:
    """Hourly positive load curves: daily and weekly cycles, a slow trend and
    AR(1) multiplicative noise, with county-like differences in level."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_hours, dtype=float)
    out = np.empty((n_hours, n_series))
    for j in range(n_series):
        level = rng.uniform(50.0, 500.0)
        daily = rng.uniform(0.1, 0.3) * np.sin(2 * np.pi * t / 24.0 + rng.uniform(0, 2 * np.pi))
        weekly = rng.uniform(0.03, 0.1) * np.sin(2 * np.pi * t / 168.0 + rng.uniform(0, 2 * np.pi))
        trend = rng.uniform(-0.1, 0.2) * t / n_hours
        eps = rng.normal(0.0, 0.03, n_hours)
        noise = np.empty(n_hours)
        noise[0] = eps[0]
        for i in range(1, n_hours):
            noise[i] = 0.8 * noise[i - 1] + eps[i]
        out[:, j] = level * np.exp(daily + weekly + trend + noise)
    return TimeSeries(out, dt=1.0, names=tuple(f"load{j}" for j in range(n_series)))


# --- dataset ---------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    train: TimeSeries  # standardized
    test: TimeSeries  # standardized with the same statistics
    standardizer: Standardizer
    transform: str = "identity"

    @property
    def names(self) -> tuple[str, ...]:
        return self.train.names

    def original_units(self, values) -> np.ndarray:
        return to_original_units(values, self.standardizer, self.transform)


def _raw_series(cfg: ExperimentConfig) -> tuple[TimeSeries, TimeSeries | None]:
    """Full series (or an already split train/test pair for regime switches)."""
    d = cfg.data
    if d.source == "csv":
        return ingest_csv(d.csv, d.log1p), None
    if d.source == "synthetic_load":
        s = synthetic_load(d.load_hours, d.load_series, cfg.seed)
        if d.log1p:
            s = TimeSeries(np.log1p(s.values), s.dt, s.t0, s.names, "log1p")
        return s, None
    system = make_system(d.system, **d.params)
    traj = TrajectoryConfig(dt=d.dt, n_steps=d.n_steps, burn_in=d.burn_in,
                            initial_state=d.initial_state, seed=cfg.seed)
    if cfg.split.kind == "regime_switch":
        spec = RegimeSwitchSpec(dict(cfg.split.regime_a), dict(cfg.split.regime_b), cfg.split.split_step)
        return integrate_regime_switch(system, spec, traj)
    return integrate(system, traj), None


def prepare_data(cfg: ExperimentConfig) -> Dataset:
    """Generate or load the series and return standardized train/test segments.

    ``cfg`` must be resolved (see :func:`lisa.harness.config.resolve`).
    """
    first, second = _raw_series(cfg)
    step = cfg.data.resample
    if second is None:
        full = first.resample(step)
        cut = int(math.floor(cfg.split.train_fraction * len(full)))
        train, test = full.slice(0, cut), full.slice(cut)
    else:
        train, test = first.resample(step), second.resample(step)
    if len(train) < 2 or len(test) < 1:
        raise ConfigError(f"split leaves {len(train)} training and {len(test)} test samples")
    if cfg.standardization == "global":
        source = np.vstack([train.values, test.values])
    else:
        source = train.values
    std = fit_standardizer(source)
    return Dataset(std.apply(train), std.apply(test), std, train.transform)


def select_starts(test_len: int, ell_max: int, H: int, n_starts: int, seed: int) -> list[int]:
    """Start indices ``t0`` with ``ell_max <= t0`` and ``t0 + H <= test_len``.

    Sampled uniformly without replacement and returned sorted; if the region
    holds fewer than ``n_starts`` indices, sampling is with replacement and a
    :class:`StartsWithReplacementWarning` is issued.
    """
    if n_starts < 1:
        raise ConfigError("n_starts must be >= 1")
    lo, hi = int(ell_max), int(test_len) - int(H)
    if hi < lo:
        raise ConfigError(f"no admissible start: need test length >= ell_max + H = {ell_max + H}, "
                          f"have {test_len}")
    region = np.arange(lo, hi + 1)
    rng = np.random.default_rng(seed)
    replace = region.size < n_starts
    if replace:
        warnings.warn(f"admissible region has {region.size} indices for {n_starts} starts; "
                      "sampling with replacement", StartsWithReplacementWarning, stacklevel=2)
    return sorted(int(i) for i in rng.choice(region, size=n_starts, replace=replace))
