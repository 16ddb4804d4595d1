"""Autoregressive forecasting with the frozen encoder/decoder and an optional
in-context correction.

The residual table is built once from the observed prefix and then frozen;
only the query window slides forward over the predicted samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import DegenerateKernelError
from .gplm import GplmDecoder, predict_batch
from .hankel import delay_windows
from .icm import IcmConfig, Mode, build_context, correct, with_query
from .series import as_array, write_csv
from .spectral import SpectralModel, encode_batch


class Method(str, Enum):
    NLSA = "NLSA"
    LISA = "LISA"
    ALSA = "ALSA"


METHOD_MODE = {Method.NLSA: Mode.NONE, Method.LISA: Mode.ICGP, Method.ALSA: Mode.ICNW}


@dataclass(frozen=True)
class RolloutConfig:
    horizon: int
    method: Method = Method.ALSA
    context_length: int | None = None  # None means the window length L
    icm: IcmConfig = field(default_factory=IcmConfig)
    stochastic: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.horizon < 1:
            raise ValueError("horizon must be positive")


@dataclass
class Forecast:
    values: np.ndarray  # (h, D), h <= horizon
    per_step_variance: np.ndarray | None
    diagnostics: dict

    @property
    def diverged_at(self) -> int | None:
        return self.diagnostics.get("diverged_at")

    def to_csv(self, path, names=None):
        h, D = self.values.shape
        names = list(names) if names is not None else [f"x{i}" for i in range(D)]
        var = self.per_step_variance
        diag = self.diagnostics
        cols = [np.arange(1, h + 1), self.values,
                np.full(h, np.nan) if var is None else var,
                np.asarray(diag["gate_ctx"][:h]), np.asarray(diag["gate_var"][:h]),
                np.asarray(diag["weight_entropy"][:h])]
        table = np.column_stack(cols)
        rows = ([int(r[0]), *r[1:]] for r in table)
        return write_csv(path, ["step", *names, "variance", "gate_ctx", "gate_var", "weight_entropy"], rows)


def encode_prefix(prefix, encoder: SpectralModel, decoder: GplmDecoder):
    """Latents and baseline predictions for every window of ``prefix``."""
    values = as_array(prefix)
    Z = encode_batch(encoder, delay_windows(values, encoder.window_shape[0]))
    Q = predict_batch(decoder, Z, return_var=False)
    return Z, Q


def _entropy(w: np.ndarray | None) -> float:
    if w is None or w.size == 0:
        return float("nan")
    nz = w[w > 0]
    return float(-(nz * np.log(nz)).sum())


def roll(prefix, encoder: SpectralModel, decoder: GplmDecoder, cfg: RolloutConfig,
         encoded=None) -> Forecast:
    """Roll the model ``cfg.horizon`` steps past the end of ``prefix``.

    Parameters
    ----------
    prefix : array-like (n, D)
        Observed history; only the last ``context_length`` samples are used
        (the last ``L`` for NLSA).
    encoded : tuple of arrays, optional
        Output of :func:`encode_prefix` on the same ``prefix``, to reuse the
        window encodings across methods and context lengths.
    """
    values = as_array(prefix)
    L = encoder.window_shape[0]
    ell = L if cfg.method is Method.NLSA or cfg.context_length is None else int(cfg.context_length)
    if ell < L:
        raise ValueError(f"context length {ell} is shorter than L={L}")
    if values.shape[0] < ell:
        raise ValueError(f"prefix has {values.shape[0]} samples, context needs {ell}")
    icm = replace(cfg.icm, mode=METHOD_MODE[cfg.method]).resolve(decoder)

    n_windows = ell - L + 1
    if encoded is None:
        Z, Q = encode_prefix(values[-ell:], encoder, decoder)
    else:
        Z, Q = encoded[0][-n_windows:], encoded[1][-n_windows:]
    C = ell - L
    state = build_context(Z[:C], values[-ell:][L:], Q[:C], icm, Z[C], Q[C])

    rng = np.random.default_rng(cfg.seed) if (cfg.stochastic and icm.mode is Mode.ICGP) else None
    H, D = cfg.horizon, values.shape[1]
    window = np.array(values[-L:])
    out = np.empty((H, D))
    s2 = np.full(H, np.nan)
    diag = {"gate_ctx": [], "gate_var": [], "weight_entropy": [], "degenerate_steps": [],
            "diverged_at": None, "divergence_reason": None, "C": C}
    for h in range(H):
        if h > 0:
            try:
                z = encode_batch(encoder, window[None])
            except DegenerateKernelError as exc:
                diag["diverged_at"], diag["divergence_reason"] = h, str(exc)
                break
            q = predict_batch(decoder, z, return_var=False)
            state = with_query(state, z[0], q[0])
        c = correct(state, icm, rng)
        if not np.isfinite(c.prediction).all():
            diag["diverged_at"], diag["divergence_reason"] = h, "non-finite prediction"
            break
        out[h] = c.prediction
        if c.s2 is not None:
            s2[h] = c.s2
        diag["gate_ctx"].append(c.gate_ctx)
        diag["gate_var"].append(np.nan if c.gate_var is None else c.gate_var)
        diag["weight_entropy"].append(_entropy(c.weights))
        if c.degenerate:
            diag["degenerate_steps"].append(h)
        window[:-1] = window[1:]
        window[-1] = c.prediction
    n = H if diag["diverged_at"] is None else diag["diverged_at"]
    var = s2[:n] if icm.mode is Mode.ICGP else None
    return Forecast(out[:n], var, diag)
