"""Experiment configuration.

One YAML file per experiment with the sections below; every key is optional
and unknown keys are rejected. ``resolve`` fills data-dependent defaults (the
window length) so the written ``config.resolved`` is complete.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from ..dynsys import REFERENCE, REGIME_A, REGIME_B, SYSTEM_NAMES
from ..errors import ConfigError
from ..rollout import Method

DEFAULT_TEMPERATURES = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3]


@dataclass
class DataConfig:
    source: str = "system"  # system | csv | synthetic_load
    system: str = "Lorenz63"
    params: dict = field(default_factory=dict)
    csv: str | None = None
    log1p: bool = False
    dt: float | None = None
    n_steps: int = 30000
    burn_in: int = 1000
    resample: int = 1
    initial_state: list[float] | None = None
    load_hours: int = 24 * 7 * 30
    load_series: int = 6


@dataclass
class SplitConfig:
    kind: str = "chronological"  # chronological | regime_switch
    train_fraction: float = 0.7
    split_step: int | None = None
    regime_a: dict = field(default_factory=lambda: dict(REGIME_A))
    regime_b: dict = field(default_factory=lambda: dict(REGIME_B))


@dataclass
class EncoderConfig:
    beta: float = 1.0
    epsilon: float | None = None
    alpha_density: float = 1.0


@dataclass
class DecoderConfig:
    beta: float = 1.0
    epsilon: float | None = None
    epsilon_scale: float = 0.1
    noise_var: float = 1e-4


@dataclass
class ModelConfig:
    L: int | None = None
    rank: int = 10
    max_windows: int = 4000
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)


@dataclass
class IcmSection:
    beta: float = 1.0
    epsilon: float | None = None
    sigma2: float = 1e-2
    tau2: float = 1.0
    k0: float = 4.0
    gain: float = 1.0
    temperature: float = 1.0


@dataclass
class EvalConfig:
    horizon: int = 300
    context_multiples: list[int] = field(default_factory=lambda: [1, 2, 4, 8, 16])
    temperatures: list[float] = field(default_factory=lambda: list(DEFAULT_TEMPERATURES))
    temperature_context: int = 16
    methods: list[str] = field(default_factory=lambda: ["NLSA", "LISA", "ALSA"])
    n_starts: int = 10
    stochastic: bool = False


@dataclass
class MetricsConfig:
    kind: str = "JS"
    welch_segment: int | None = None
    welch_overlap: float = 0.5
    welch_window: str = "hann"
    spectral_floor: float = 1e-12
    tau_max: int | None = None
    rff_features: int = 2048
    mmd_bandwidth: float | None = None


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    standardization: str = "train_stats"  # train_stats | global
    n_jobs: int = 1
    data: DataConfig = field(default_factory=DataConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    icm: IcmSection = field(default_factory=IcmSection)
    eval: EvalConfig = field(default_factory=EvalConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def ell_max_multiple(self) -> int:
        return max([*self.eval.context_multiples, self.eval.temperature_context])


def _coerce(hint, value, path: str):
    """Check/convert a YAML value against a field annotation.

    YAML 1.1 reads ``1e3`` as a string, so numeric strings are accepted.
    """
    origin, args = typing.get_origin(hint), typing.get_args(hint)
    if value is None:
        if type(None) in args:
            return None
        raise ConfigError(f"{path} must not be null")
    if args and type(None) in args:
        (inner,) = [a for a in args if a is not type(None)]
        return _coerce(inner, value, path)
    if origin is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path} must be a list")
        return [_coerce(args[0], v, f"{path}[{i}]") for i, v in enumerate(value)] if args else list(value)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be true or false")
        return value
    if hint in (int, float):
        if isinstance(value, bool):
            raise ConfigError(f"{path} must be a number")
        try:
            num = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{path} must be a number, got {value!r}") from None
        if hint is int:
            if not num.is_integer():
                raise ConfigError(f"{path} must be an integer, got {value!r}")
            return int(num)
        return num
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string")
        return value
    if hint is dict and not isinstance(value, dict):
        raise ConfigError(f"{path} must be a mapping")
    return value


def _build(cls, data, path: str = ""):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {path or '<root>'} must be a mapping")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {path or '<root>'}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        where = f"{path}.{name}".lstrip(".")
        if dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value, where)
        else:
            kwargs[name] = _coerce(hint, value, where)
    return cls(**kwargs)


def from_dict(data: dict | None) -> ExperimentConfig:
    cfg = _build(ExperimentConfig, data or {})
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    with Path(path).open() as fh:
        return from_dict(yaml.safe_load(fh))


def dump_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
    return path


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply ``section.key=value`` strings (values parsed as YAML scalars/lists)."""
    data = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, raw = item.split("=", 1)
        node = data
        parts = key.strip().split(".")
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                raise ConfigError(f"unknown config section in {key!r}")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node[parts[-1]] = yaml.safe_load(raw)
    return from_dict(data)


def validate(cfg: ExperimentConfig) -> None:
    d, s, e = cfg.data, cfg.split, cfg.eval
    if d.source not in ("system", "csv", "synthetic_load"):
        raise ConfigError(f"data.source must be system, csv or synthetic_load, not {d.source!r}")
    if d.source == "system" and d.system not in SYSTEM_NAMES:
        raise ConfigError(f"data.system must be one of {SYSTEM_NAMES}")
    if d.source == "csv" and not d.csv:
        raise ConfigError("data.csv must be set when data.source is csv")
    if d.resample < 1:
        raise ConfigError("data.resample must be >= 1")
    if s.kind not in ("chronological", "regime_switch"):
        raise ConfigError("split.kind must be chronological or regime_switch")
    if s.kind == "regime_switch" and (d.source != "system" or d.system != "Lorenz63"):
        raise ConfigError("regime_switch splits are defined for the Lorenz63 system only")
    if s.kind == "chronological" and not 0 < s.train_fraction < 1:
        raise ConfigError("split.train_fraction must lie in (0, 1)")
    if cfg.standardization not in ("train_stats", "global"):
        raise ConfigError("standardization must be train_stats or global")
    if e.horizon < 1 or e.n_starts < 1:
        raise ConfigError("eval.horizon and eval.n_starts must be >= 1")
    if not e.context_multiples or min(e.context_multiples) < 1 or e.temperature_context < 1:
        raise ConfigError("context lengths are multiples of L and must be >= 1")
    if any(not t > 0 for t in e.temperatures):
        raise ConfigError("temperatures must be positive")
    for m in e.methods:
        try:
            Method(m)
        except ValueError:
            raise ConfigError(f"unknown method {m!r}") from None
    if cfg.model.rank < 1 or cfg.model.max_windows <= cfg.model.rank + 1:
        raise ConfigError("need model.rank >= 1 and model.max_windows > rank + 1")
    if cfg.n_jobs < 1:
        raise ConfigError("n_jobs must be >= 1")


def resolve(cfg: ExperimentConfig) -> ExperimentConfig:
    """Copy of ``cfg`` with the window length, step and split index filled in."""
    cfg = from_dict(cfg.to_dict())
    d = cfg.data
    if d.source == "system":
        info = REFERENCE[d.system]
        if d.dt is None:
            d.dt = info.dt
        if cfg.model.L is None:
            cfg.model.L = max(1, int(round(info.window / d.resample)))
        if cfg.split.kind == "regime_switch" and cfg.split.split_step is None:
            cfg.split.split_step = int(round((d.n_steps - d.burn_in) * cfg.split.train_fraction))
    if cfg.model.L is None:
        raise ConfigError("model.L must be given for non-system data")
    return cfg
