"""Command-line entry point: ``lisa <subcommand> ...``.

Every subcommand prints a JSON summary on stdout and exits 0; on failure it
prints ``{"error": ..., "message": ...}`` on stderr and exits nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .artifact import load_model, save_model
from .dynsys import REFERENCE, TrajectoryConfig, integrate, make_system
from .errors import CellError, ConfigError, LisaError, ParseError
from .harness import config as hconfig
from .harness.data import ingest_csv, prepare_data, select_starts
from .harness.experiment import (check_bundle, run_context_sweep, run_temperature_sweep,
                                 train_models, write_sweep)
from .icm import IcmConfig
from .icpca import adaptation_report
from .metrics import WelchSettings, evaluate
from .rollout import Method, RolloutConfig, roll
from .series import export_series, write_csv

# shortcut flags -> dotted config keys
SHORTCUTS = {
    "seed": "seed", "system": "data.system", "csv": "data.csv", "L": "model.L",
    "rank": "model.rank", "horizon": "eval.horizon", "n_starts": "eval.n_starts",
    "n_jobs": "n_jobs",
}


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML experiment file (defaults if omitted)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. --set eval.horizon=200 (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--system")
    p.add_argument("--csv")
    p.add_argument("--L", type=int)
    p.add_argument("--rank", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--n-starts", dest="n_starts", type=int)
    p.add_argument("--n-jobs", dest="n_jobs", type=int)


def _load_cfg(args) -> hconfig.ExperimentConfig:
    cfg = hconfig.load_config(args.config) if args.config else hconfig.ExperimentConfig()
    over = [f"{key}={getattr(args, flag)}" for flag, key in SHORTCUTS.items()
            if getattr(args, flag, None) is not None]
    if args.csv:
        over.append("data.source=csv")
    cfg = hconfig.apply_overrides(cfg, over + list(args.overrides))
    return hconfig.resolve(cfg)


def _bundle_for(args, cfg, dataset):
    if getattr(args, "model", None):
        bundle = load_model(args.model)
        check_bundle(bundle, dataset)
        return bundle
    return train_models(cfg, dataset)


def cmd_simulate(args) -> dict:
    params = dict(kv.split("=", 1) for kv in args.param)
    system = make_system(args.system, **{k: float(v) for k, v in params.items()})
    dt = args.dt if args.dt is not None else REFERENCE[args.system].dt
    traj = integrate(system, TrajectoryConfig(dt, args.n_steps, args.burn_in, seed=args.seed))
    if args.resample > 1:
        traj = traj.resample(args.resample)
    path = export_series(traj, args.out)
    return {"output": str(path), "samples": len(traj), "dim": traj.dim}


def cmd_train(args) -> dict:
    cfg = _load_cfg(args)
    dataset = prepare_data(cfg)
    bundle = train_models(cfg, dataset)
    bundle.provenance["config"] = cfg.to_dict()
    path = save_model(args.out, bundle)
    return {"output": str(path), "K": bundle.encoder.K, "rank": bundle.encoder.rank,
            "eigenvalues": [float(v) for v in bundle.encoder.eigenvalues],
            "decoder_epsilon": bundle.decoder.kernel.epsilon}


def cmd_forecast(args) -> dict:
    cfg = _load_cfg(args)
    dataset = prepare_data(cfg)
    bundle = _bundle_for(args, cfg, dataset)
    L, H = cfg.model.L, cfg.eval.horizon
    ell = args.ell_multiple * L
    test = dataset.test.values
    start = args.start
    if start is None:
        start = select_starts(len(test), ell, H, 1, cfg.seed)[0]
    if start < ell or start + H > len(test):
        raise ConfigError(f"start {start} needs {ell} samples before and {H} after it")
    s = cfg.icm
    icm = IcmConfig(beta=s.beta, epsilon=s.epsilon, sigma2=s.sigma2, tau2=s.tau2, k0=s.k0,
                    gain=s.gain, temperature=args.temperature or s.temperature)
    rc = RolloutConfig(H, Method(args.method), ell, icm, cfg.eval.stochastic, cfg.seed)
    fc = roll(test[start - ell:start], bundle.encoder, bundle.decoder, rc)
    path = fc.to_csv(args.out, dataset.names)
    summary = {"output": str(path), "start": start, "ell": ell, "steps": fc.values.shape[0],
               "diverged_at": fc.diverged_at}
    if fc.diverged_at is None:
        truth = test[start:start + H]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = evaluate(fc.values, truth, seed=cfg.seed)
        summary.update({k: v for k, v in rep.to_record().items() if k in ("mse", "acf_mse", "spec_div", "mmd2")})
    return summary


def _sweep(args, runner) -> dict:
    cfg = _load_cfg(args)
    dataset = prepare_data(cfg)
    bundle = _bundle_for(args, cfg, dataset)
    result = runner(cfg, dataset, bundle)
    out = Path(args.out)
    paths = write_sweep(result, cfg, out)
    if args.save_model:
        paths.append(save_model(out / "model.npz", bundle))
    return {"output_dir": str(out), "files": len(paths), "starts": result.starts,
            "aggregates": [{k: a[k] for k in ("method", "ell", "temperature", "mse_mean", "mmd2_mean")}
                           for a in result.aggregates()]}


def cmd_sweep_context(args) -> dict:
    return _sweep(args, run_context_sweep)


def cmd_sweep_temperature(args) -> dict:
    return _sweep(args, run_temperature_sweep)


def cmd_icpca_demo(args) -> dict:
    rows = adaptation_report(D=args.dim, r=args.rank, n_repeats=args.repeats, seed=args.seed)
    if args.out:
        write_csv(args.out, list(rows[0]), [list(r.values()) for r in rows])
    return {"rows": rows, "output": args.out}


def cmd_metrics(args) -> dict:
    truth = ingest_csv(args.truth)
    forecast = ingest_csv(args.forecast)
    cols = args.columns.split(",") if args.columns else list(truth.names)
    missing = [c for c in cols if c not in forecast.names or c not in truth.names]
    if missing:
        raise ParseError(f"columns {missing} missing from forecast or truth")
    F = np.column_stack([forecast.values[:, forecast.names.index(c)] for c in cols])
    T = np.column_stack([truth.values[:, truth.names.index(c)] for c in cols])
    n = min(F.shape[0], T.shape[0])
    welch = WelchSettings(segment_len=args.welch_segment)
    rep = evaluate(F[:n], T[:n], kind=args.kind, welch=welch, tau_max=args.tau_max,
                   n_features=args.rff_features, seed=args.seed)
    return rep.to_record()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lisa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a benchmark system and export a CSV")
    p.add_argument("--system", default="Lorenz63", choices=sorted(REFERENCE))
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--dt", type=float)
    p.add_argument("--n-steps", dest="n_steps", type=int, default=10000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=1000)
    p.add_argument("--resample", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit encoder and decoder, save a model artifact")
    _add_config_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("forecast", help="one rollout from a test start index")
    _add_config_args(p)
    p.add_argument("--model", type=Path, help="saved artifact (trained from config if omitted)")
    p.add_argument("--method", default="ALSA", choices=[m.value for m in Method])
    p.add_argument("--ell-multiple", dest="ell_multiple", type=int, default=1)
    p.add_argument("--temperature", type=float)
    p.add_argument("--start", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_forecast)

    for name, func, text in (("sweep-context", cmd_sweep_context, "context-length sweep"),
                             ("sweep-temperature", cmd_sweep_temperature, "temperature sweep")):
        p = sub.add_parser(name, help=text)
        _add_config_args(p)
        p.add_argument("--model", type=Path)
        p.add_argument("--save-model", dest="save_model", action="store_true",
                       help="also write model.npz into the output directory")
        p.add_argument("--out", type=Path, required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("icpca-demo", help="oracle vs plug-in PCA adaptation error")
    p.add_argument("--dim", type=int, default=6)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_icpca_demo)

    p = sub.add_parser("metrics", help="score a forecast CSV against a truth CSV")
    p.add_argument("--forecast", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--columns", help="comma-separated value columns (default: all truth columns)")
    p.add_argument("--kind", default="JS", choices=["JS", "KL"])
    p.add_argument("--welch-segment", dest="welch_segment", type=int)
    p.add_argument("--tau-max", dest="tau_max", type=int)
    p.add_argument("--rff-features", dest="rff_features", type=int, default=2048)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_metrics)
    return parser


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (Path, np.ndarray)):
        return str(obj) if isinstance(obj, Path) else obj.tolist()
    raise TypeError(type(obj).__name__)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = args.func(args)
    except (LisaError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, CellError):
            err.update(method=exc.method, ell=exc.ell, start=exc.start, temperature=exc.temperature)
        if isinstance(exc, ParseError):
            err.update(row=exc.row, column=exc.column)
        print(json.dumps(err), file=sys.stderr)
        return 2 if isinstance(exc, (ConfigError, ParseError)) else 1
    print(json.dumps(summary, default=_jsonable, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
