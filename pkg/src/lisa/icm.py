"""In-context residual correction over a prefix.

The prefix is split into ``C`` context windows (with in-prefix targets) and a
query window. Both are encoded by the frozen encoder and decoded by the frozen
decoder; context residuals ``target - prediction`` are then regressed onto the
query latent, either with a GP posterior (ICGP) or with a kernel-weighted
average (ICNW).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import ConditioningError
from .gplm import GplmDecoder, predict_batch
from .hankel import split_prefix
from .spectral import SpectralModel, encode_batch, sq_distances


class Mode(str, Enum):
    ICGP = "ICGP"
    ICNW = "ICNW"
    NONE = "None"


@dataclass(frozen=True)
class IcmConfig:
    """Hyperparameters of the in-context correction.

    ``epsilon=None`` borrows the decoder's latent lengthscale. ``temperature``
    multiplies ``epsilon`` in the in-context kernel only.
    """

    beta: float = 1.0
    epsilon: float | None = None
    sigma2: float = 1e-2
    tau2: float = 1.0
    k0: float = 4.0
    gain: float = 1.0
    temperature: float = 1.0
    mode: Mode = Mode.ICNW

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.sigma2 < 0 or not self.tau2 > 0 or self.k0 < 0 or self.gain < 0:
            raise ValueError("need sigma2 >= 0, tau2 > 0, k0 >= 0, gain >= 0")

    def resolve(self, decoder: GplmDecoder) -> "IcmConfig":
        if self.epsilon is not None:
            return self
        return replace(self, epsilon=decoder.kernel.epsilon)

    @property
    def length2(self) -> float:
        """Effective squared lengthscale ``epsilon * temperature / beta``."""
        if self.epsilon is None:
            raise ValueError("epsilon unresolved; call resolve(decoder) first")
        return self.epsilon * self.temperature / self.beta


@dataclass(frozen=True)
class IcmState:
    context_latents: np.ndarray  # (C, r)
    targets: np.ndarray  # (C, D)
    context_preds: np.ndarray  # (C, D)
    residuals: np.ndarray  # (C, D)
    query_latent: np.ndarray  # (r,)
    query_pred: np.ndarray  # (D,)
    gram_factor: np.ndarray | None = None  # ICGP: Cholesky of k_AA' + sigma2 I
    gp_weights: np.ndarray | None = None  # ICGP: (k + sigma2 I)^-1 residuals

    @property
    def C(self) -> int:
        return self.context_latents.shape[0]

    @property
    def baseline_preds(self) -> np.ndarray:
        return np.vstack([self.context_preds, self.query_pred[None]])


@dataclass(frozen=True)
class Correction:
    prediction: np.ndarray
    delta: np.ndarray
    gate_ctx: float
    gate_var: float | None = None
    s2: float | None = None
    weights: np.ndarray | None = None
    degenerate: bool = False


def latent_kernel(z1, z2, cfg: IcmConfig) -> float:
    z1, z2 = np.asarray(z1, dtype=float), np.asarray(z2, dtype=float)
    if z1.shape != z2.shape:
        raise ValueError("latent vectors must have equal length")
    d2 = float(np.sum((z1 - z2) ** 2))
    return math.exp(-d2 / cfg.length2)


def _kernel_matrix(A: np.ndarray, B: np.ndarray, cfg: IcmConfig) -> np.ndarray:
    return np.exp(-sq_distances(np.atleast_2d(A), np.atleast_2d(B)) / cfg.length2)


def _freeze(*arrays):
    for a in arrays:
        if a is not None:
            a.setflags(write=False)


def build_context(context_latents, targets, context_preds, cfg: IcmConfig,
                  query_latent=None, query_pred=None) -> IcmState:
    """Assemble the residual table (and the ICGP factor) from encoded context."""
    Y = np.asarray(targets, dtype=float)
    Z = np.asarray(context_latents, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != Y.shape[0]:
        raise ValueError("context latents must be (C, r) with one row per target")
    Q = np.asarray(context_preds, dtype=float)
    res = Y - Q
    factor = weights = None
    if cfg.mode is Mode.ICGP and Z.shape[0] > 0:
        G = _kernel_matrix(Z, Z, cfg)
        G[np.diag_indices_from(G)] += cfg.sigma2
        try:
            factor = scipy.linalg.cholesky(G, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError(
                f"context Gram matrix is not positive definite ({exc}); increase sigma2") from None
        weights = scipy.linalg.cho_solve((factor, True), res)
    r = Z.shape[1]
    zq = np.zeros(r) if query_latent is None else np.asarray(query_latent, dtype=float)
    qq = np.zeros(Y.shape[1]) if query_pred is None else np.asarray(query_pred, dtype=float)
    _freeze(Z, Y, Q, res, factor, weights)
    return IcmState(Z, Y, Q, res, zq, qq, factor, weights)


def build_state(prefix, L: int, encoder: SpectralModel, decoder: GplmDecoder,
                cfg: IcmConfig) -> IcmState:
    cfg = cfg.resolve(decoder)
    split = split_prefix(prefix, L)
    windows = np.concatenate([split.context_windows, split.query_window[None]], axis=0)
    Z = encode_batch(encoder, windows)
    Q = predict_batch(decoder, Z, return_var=False)
    C = split.C
    return build_context(Z[:C], split.targets, Q[:C], cfg, Z[C], Q[C])


def with_query(state: IcmState, query_latent, query_pred) -> IcmState:
    """Same frozen context, new query."""
    zq = np.array(query_latent, dtype=float)
    qq = np.array(query_pred, dtype=float)
    _freeze(zq, qq)
    return replace(state, query_latent=zq, query_pred=qq)


def _query_kernel(state: IcmState, cfg: IcmConfig) -> np.ndarray:
    return _kernel_matrix(state.query_latent, state.context_latents, cfg)[0]


def icgp_correction(state: IcmState, cfg: IcmConfig) -> tuple[np.ndarray, float, float]:
    """GP posterior residual mean, posterior variance and confidence gate."""
    D = state.query_pred.shape[0]
    if state.C == 0:
        return np.zeros(D), 1.0, cfg.tau2 / (cfg.tau2 + 1.0)
    if state.gram_factor is None:
        raise ValueError("state was not built in ICGP mode")
    k = _query_kernel(state, cfg)
    delta = k @ state.gp_weights
    v = scipy.linalg.solve_triangular(state.gram_factor, k, lower=True)
    s2 = min(max(1.0 - float(v @ v), 0.0), 1.0)
    return delta, s2, cfg.tau2 / (cfg.tau2 + s2)


def icgp_sample(state: IcmState, cfg: IcmConfig, rng=None) -> np.ndarray:
    """Residual drawn from the GP posterior plus observation noise.

    ``rng`` may be a seed or a ``numpy.random.Generator``.
    """
    delta, s2, _ = icgp_correction(state, cfg)
    xi = np.random.default_rng(rng).standard_normal(delta.shape[0])
    return delta + math.sqrt(s2 + cfg.sigma2) * xi


def icnw_weights(state: IcmState, cfg: IcmConfig) -> tuple[np.ndarray, bool]:
    """Normalized kernel weights over the context and an underflow flag.

    Weights are computed as a max-shifted softmax of ``-d^2 / length2``, which
    equals ``k / sum(k)`` exactly but stays defined when every raw kernel value
    underflows; that case is reported through the flag.
    """
    if state.C == 0:
        return np.zeros(0), False
    d2 = sq_distances(state.query_latent[None], state.context_latents)[0]
    logits = -d2 / cfg.length2
    if not np.isfinite(logits).all():
        return np.full(state.C, 1.0 / state.C), True
    top = logits.max()
    degenerate = bool(np.exp(top) == 0.0)
    w = np.exp(logits - top)
    w /= w.sum()
    return w, degenerate


def icnw_correction(state: IcmState, cfg: IcmConfig) -> tuple[np.ndarray, np.ndarray]:
    """Attention-weighted average of context residuals."""
    w, _ = icnw_weights(state, cfg)
    if state.C == 0:
        return np.zeros(state.query_pred.shape[0]), w
    return w @ state.residuals, w


def context_gate(C: int, k0: float) -> float:
    if C == 0:
        return 0.0
    return C / (C + k0)


def correct(state: IcmState, cfg: IcmConfig, rng=None) -> Correction:
    """Corrected one-step prediction with its diagnostics.

    With ``rng`` given (ICGP only) the residual is sampled from the posterior
    instead of taking its mean.
    """
    Q = state.query_pred
    g_ctx = context_gate(state.C, cfg.k0)
    gain = cfg.gain * g_ctx
    if cfg.mode is Mode.ICGP:
        delta, s2, g_var = icgp_correction(state, cfg)
        if rng is not None:
            xi = rng.standard_normal(delta.shape[0])
            delta = delta + math.sqrt(s2 + cfg.sigma2) * xi
        return Correction(Q + gain * g_var * delta, delta, g_ctx, g_var, s2)
    if cfg.mode is Mode.ICNW:
        w, degenerate = icnw_weights(state, cfg)
        delta = w @ state.residuals if state.C else np.zeros_like(Q)
        return Correction(Q + gain * delta, delta, g_ctx, weights=w, degenerate=degenerate)
    return Correction(Q.copy(), np.zeros_like(Q), g_ctx)


def corrected_prediction(state: IcmState, cfg: IcmConfig) -> np.ndarray:
    return correct(state, cfg).prediction
