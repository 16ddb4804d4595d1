"""Training, multi-start sweeps and run-directory output.

The encoder and decoder are fitted once on the training segment. Each sweep
cell ``(method, context length, temperature, start)`` is then an independent
rollout over the frozen models; cells for one start share a single encoding
of the longest prefix.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import spectral
from ..artifact import ModelBundle
from ..errors import CellError, ConfigError, LisaError
from ..gplm import build_pairs, default_latent_kernel, fit_decoder
from ..hankel import delay_windows
from ..icm import IcmConfig
from ..metrics import WelchSettings, evaluate
from ..rollout import Forecast, Method, RolloutConfig, encode_prefix, roll
from ..series import write_csv
from .config import ExperimentConfig, dump_config, resolve
from .data import Dataset, array_digest, prepare_data, select_starts

METRIC_KEYS = ("mse", "acf_mse", "spec_div", "mmd2")
AGGREGATE_KEYS = (*METRIC_KEYS, "mean_weight_entropy", "max_entropy_gap")


# --- training --------------------------------------------------------------

def window_indices(n_samples: int, L: int, max_windows: int) -> np.ndarray:
    """Evenly spaced start indices of windows that have a successor sample."""
    n_pairs = n_samples - L
    if n_pairs < 1:
        raise ConfigError(f"training segment of {n_samples} samples is too short for L={L}")
    if n_pairs <= max_windows:
        return np.arange(n_pairs)
    return np.unique(np.round(np.linspace(0, n_pairs - 1, max_windows)).astype(int))


def train_models(cfg: ExperimentConfig, dataset: Dataset) -> ModelBundle:
    """Fit encoder and decoder on the training segment only."""
    m = cfg.model
    X = dataset.train.values
    idx = window_indices(X.shape[0], m.L, m.max_windows)
    windows = delay_windows(X, m.L)[idx]
    enc_kernel = spectral.KernelParams(m.encoder.beta, m.encoder.epsilon, m.encoder.alpha_density)
    encoder = spectral.fit(windows, enc_kernel, r=m.rank, seed=cfg.seed)
    Z, Y = build_pairs(X, encoder, idx)
    if m.decoder.epsilon is None:
        dec_kernel = default_latent_kernel(Z, m.decoder.beta, m.decoder.epsilon_scale)
    else:
        dec_kernel = spectral.KernelParams(m.decoder.beta, m.decoder.epsilon, 0.0)
    decoder = fit_decoder(Z, Y, dec_kernel, m.decoder.noise_var)
    provenance = {
        "seed": cfg.seed,
        "L": m.L,
        "train_digest": array_digest(X),
        "stats_digest": array_digest(np.concatenate([dataset.standardizer.mean,
                                                     dataset.standardizer.scale])),
        "encoder_input_digest": array_digest(encoder.train_windows),
        "decoder_target_digest": array_digest(Y),
        "window_indices_digest": array_digest(idx),
        "transform": dataset.transform,
        "names": list(dataset.names),
    }
    extras = {"std_mean": dataset.standardizer.mean, "std_scale": dataset.standardizer.scale,
              "window_indices": idx}
    return ModelBundle(encoder, decoder, extras, provenance)


def check_bundle(bundle: ModelBundle, dataset: Dataset) -> None:
    """Refuse an artifact that was trained on a different training segment."""
    p = bundle.provenance
    if p.get("train_digest") != array_digest(dataset.train.values):
        raise ConfigError("model artifact was trained on a different training segment")


# --- sweeps ----------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    method: Method
    ell: int
    temperature: float


@dataclass
class CellResult:
    cell: Cell
    start: int
    forecast: Forecast
    record: dict
    mse_by_horizon: np.ndarray


@dataclass
class SweepResult:
    """Raw per-(method, ell, temperature, start) records plus their forecasts."""

    kind: str
    L: int
    starts: list[int]
    results: list[CellResult]
    truths: dict[int, np.ndarray] = field(default_factory=dict)
    bundle: ModelBundle | None = field(default=None, repr=False)
    dataset: Dataset | None = field(default=None, repr=False)

    @property
    def rows(self) -> list[dict]:
        return [r.record for r in self.results]

    def select(self, **match) -> list[dict]:
        return [r for r in self.rows if all(r[k] == v for k, v in match.items())]

    def mean(self, metric: str, **match) -> float:
        return float(np.mean([r[metric] for r in self.select(**match)]))

    def aggregates(self) -> list[dict]:
        groups: dict[tuple, list[dict]] = {}
        for r in self.rows:
            groups.setdefault((r["method"], r["ell"], r["temperature"]), []).append(r)
        out = []
        for (method, ell, temp), rows in groups.items():
            agg = {"method": method, "ell": ell, "ell_multiple": ell / self.L, "temperature": temp,
                   "n": len(rows), "n_diverged": sum(r["diverged_at"] >= 0 for r in rows)}
            for k in AGGREGATE_KEYS:
                v = np.array([r[k] for r in rows], dtype=float)
                v = v[np.isfinite(v)]
                agg[f"{k}_mean"] = float(np.mean(v)) if v.size else math.nan
                agg[f"{k}_std"] = float(np.std(v)) if v.size else math.nan
            out.append(agg)
        return out


def _context_cells(cfg: ExperimentConfig) -> list[Cell]:
    L, T = cfg.model.L, cfg.icm.temperature
    methods = [Method(m) for m in cfg.eval.methods]
    cells = [Cell(Method.NLSA, L, T)] if Method.NLSA in methods else []
    for mult in cfg.eval.context_multiples:
        cells += [Cell(m, mult * L, T) for m in methods if m is not Method.NLSA]
    return cells


def _temperature_cells(cfg: ExperimentConfig) -> list[Cell]:
    ell = cfg.eval.temperature_context * cfg.model.L
    methods = [Method(m) for m in cfg.eval.methods]
    return [Cell(m, cfg.model.L if m is Method.NLSA else ell, float(t))
            for t in cfg.eval.temperatures for m in methods]


def _icm_config(cfg: ExperimentConfig, temperature: float) -> IcmConfig:
    s = cfg.icm
    return IcmConfig(beta=s.beta, epsilon=s.epsilon, sigma2=s.sigma2, tau2=s.tau2, k0=s.k0,
                     gain=s.gain, temperature=temperature)


def _welch(cfg: ExperimentConfig) -> WelchSettings:
    m = cfg.metrics
    return WelchSettings(m.welch_segment, m.welch_overlap, m.welch_window, m.spectral_floor)


def _entropy_stats(fc: Forecast, C: int) -> dict:
    ent = np.asarray(fc.diagnostics["weight_entropy"], dtype=float)
    finite = ent[np.isfinite(ent)]
    log_c = math.log(C) if C > 0 else math.nan
    if finite.size == 0:
        return {"mean_weight_entropy": math.nan, "min_weight_entropy": math.nan,
                "max_entropy_gap": math.nan, "log_C": log_c}
    return {"mean_weight_entropy": float(finite.mean()), "min_weight_entropy": float(finite.min()),
            "max_entropy_gap": float(np.max(np.abs(finite - log_c))) if C > 0 else math.nan,
            "log_C": log_c}


def _nanmean(x) -> float:
    a = np.asarray(x, dtype=float)
    a = a[np.isfinite(a)]
    return float(a.mean()) if a.size else math.nan


def _run_start(cfg: ExperimentConfig, bundle: ModelBundle, test: np.ndarray, start: int,
               cells: list[Cell], kind: str) -> list[CellResult]:
    H = cfg.eval.horizon
    ell_max = max(c.ell for c in cells)
    prefix = test[start - ell_max:start]
    truth = test[start:start + H]
    enc, dec = bundle.encoder, bundle.decoder
    encoded = encode_prefix(prefix, enc, dec)
    welch = _welch(cfg)
    memo: dict[tuple, Forecast] = {}
    out = []
    for k, cell in enumerate(cells):
        try:
            key = (cell.method, cell.ell, None if cell.method is Method.NLSA else cell.temperature)
            fc = memo.get(key)
            if fc is None:
                seed = int(np.random.SeedSequence([cfg.seed, start, k]).generate_state(1)[0])
                rc = RolloutConfig(H, cell.method, cell.ell, _icm_config(cfg, cell.temperature),
                                   cfg.eval.stochastic, seed)
                fc = memo[key] = roll(prefix, enc, dec, rc, encoded=encoded)
            rec = {"sweep": kind, "method": cell.method.value, "ell": cell.ell,
                   "ell_multiple": cell.ell / cfg.model.L, "temperature": cell.temperature,
                   "start": start, "C": fc.diagnostics["C"], "horizon": H,
                   "diverged_at": -1 if fc.diverged_at is None else int(fc.diverged_at)}
            if fc.diverged_at is None:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    rep = evaluate(fc.values, truth, kind=cfg.metrics.kind, welch=welch,
                                   tau_max=cfg.metrics.tau_max, n_features=cfg.metrics.rff_features,
                                   bandwidth=cfg.metrics.mmd_bandwidth, seed=cfg.seed)
                rec.update(rep.to_record())
                by_h = rep.mse_by_horizon
            else:
                rec.update({k: math.nan for k in METRIC_KEYS})
                rec["flags"] = "diverged"
                by_h = np.sum((fc.values - truth[:fc.values.shape[0]]) ** 2, axis=1)
            rec.update(_entropy_stats(fc, fc.diagnostics["C"]))
            rec["mean_gate_ctx"] = _nanmean(fc.diagnostics["gate_ctx"])
            rec["mean_gate_var"] = _nanmean(fc.diagnostics["gate_var"])
            rec["mean_variance"] = (math.nan if fc.per_step_variance is None
                                    else _nanmean(fc.per_step_variance))
            rec["n_degenerate_steps"] = len(fc.diagnostics["degenerate_steps"])
            out.append(CellResult(cell, start, fc, rec, by_h))
        except LisaError as exc:
            raise CellError(str(exc), cell.method.value, cell.ell, start, cell.temperature) from exc
    return out


def _sweep(cfg: ExperimentConfig, dataset: Dataset | None, bundle: ModelBundle | None,
           cells: list[Cell], kind: str) -> SweepResult:
    cfg = resolve(cfg)
    if dataset is None:
        dataset = prepare_data(cfg)
    if bundle is None:
        bundle = train_models(cfg, dataset)
    else:
        check_bundle(bundle, dataset)
    if bundle.encoder.window_shape[0] != cfg.model.L:
        raise ConfigError(f"artifact window length {bundle.encoder.window_shape[0]} != model.L={cfg.model.L}")
    test = dataset.test.values
    H = cfg.eval.horizon
    # one start set per experiment, valid for every sweep it may run
    ell_max = cfg.ell_max_multiple * cfg.model.L
    starts = select_starts(len(test), ell_max, H, cfg.eval.n_starts, cfg.seed)
    jobs = lambda s: _run_start(cfg, bundle, test, s, cells, kind)  # noqa: E731
    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(cfg.n_jobs) as pool:
            per_start = list(pool.map(jobs, starts))
    else:
        per_start = [jobs(s) for s in starts]
    # serialized collection in start order
    results = [r for batch in per_start for r in batch]
    truths = {s: test[s:s + H].copy() for s in starts}
    return SweepResult(kind, cfg.model.L, starts, results, truths, bundle, dataset)


def run_context_sweep(cfg: ExperimentConfig, dataset: Dataset | None = None,
                      bundle: ModelBundle | None = None) -> SweepResult:
    """NLSA at ``ell = L`` plus LISA/ALSA at every configured context length.

    Data are prepared from ``cfg`` and the models trained unless given; the
    ones used are attached to the result.
    """
    return _sweep(cfg, dataset, bundle, _context_cells(cfg), "context")


def run_temperature_sweep(cfg: ExperimentConfig, dataset: Dataset | None = None,
                          bundle: ModelBundle | None = None) -> SweepResult:
    """LISA/ALSA at ``ell = temperature_context * L`` for every temperature.

    NLSA rows (one per temperature) are identical, since the baseline ignores
    the in-context kernel.
    """
    return _sweep(cfg, dataset, bundle, _temperature_cells(cfg), "temperature")


# --- output ----------------------------------------------------------------

def _table(rows: list[dict]) -> tuple[list[str], list[list]]:
    header: list[str] = []
    for r in rows:
        header += [k for k in r if k not in header]
    return header, [[r.get(k, "") for k in header] for r in rows]


def write_sweep(result: SweepResult, cfg: ExperimentConfig, outdir) -> list:
    """Write the plot-ready CSVs of one sweep into ``outdir``; returns the paths."""
    outdir = Path(outdir)
    dataset = result.dataset
    cfg = resolve(cfg)
    outdir.mkdir(parents=True, exist_ok=True)
    names = list(dataset.names)
    orig = [f"orig_{n}" for n in names]
    paths = [dump_config(cfg, outdir / "config.resolved")]
    paths.append(write_csv(outdir / "raw_metrics.csv", *_table(result.rows)))
    paths.append(write_csv(outdir / "aggregates.csv", *_table(result.aggregates())))

    curve_rows = []
    for r in result.results:
        for h, v in enumerate(r.mse_by_horizon, start=1):
            curve_rows.append([r.cell.method.value, r.cell.ell, r.cell.temperature, r.start, h, v])
    paths.append(write_csv(outdir / "mse_by_horizon.csv",
                           ["method", "ell", "temperature", "start", "step", "sq_error"], curve_rows))

    by_file: dict[str, list] = {}
    for r in result.results:
        fc = r.forecast
        h = fc.values.shape[0]
        d = fc.diagnostics
        var = np.full(h, np.nan) if fc.per_step_variance is None else fc.per_step_variance
        ou = dataset.original_units(fc.values) if h else np.zeros((0, len(names)))
        rows = by_file.setdefault(f"forecast_{r.cell.method.value}_{r.start}.csv", [])
        for i in range(h):
            rows.append([r.cell.ell, r.cell.temperature, i + 1, *fc.values[i], var[i],
                         d["gate_ctx"][i], d["gate_var"][i], d["weight_entropy"][i], *ou[i]])
    header = ["ell", "temperature", "step", *names, "variance", "gate_ctx", "gate_var",
              "weight_entropy", *orig]
    for fname, rows in by_file.items():
        paths.append(write_csv(outdir / fname, header, rows))

    for s, truth in result.truths.items():
        rows = np.column_stack([np.arange(1, truth.shape[0] + 1), truth, dataset.original_units(truth)])
        paths.append(write_csv(outdir / f"truth_{s}.csv", ["step", *names, *orig],
                               ([int(r[0]), *r[1:]] for r in rows)))
    paths.append(export_trajectory(dataset, outdir / "trajectory_export.csv"))
    return paths


def export_trajectory(dataset: Dataset, path):
    """Standardized and original-unit samples of both segments, for phase plots."""
    names = list(dataset.names)
    rows = []
    for seg, s in (("train", dataset.train), ("test", dataset.test)):
        ou = dataset.original_units(s.values)
        rows += [[seg, t, *v, *o] for t, v, o in zip(s.t, s.values, ou)]
    return write_csv(path, ["segment", "t", *names, *[f"orig_{n}" for n in names]], rows)
