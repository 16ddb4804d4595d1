"""Kernel-regression decoder from diffusion coordinates to next-step samples.

A zero-mean GP with an isotropic RBF kernel over latents and i.i.d. output
noise; the predictive mean coincides with kernel ridge regression and the
predictive variance is a scalar shared by all output dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConditioningError
from .hankel import delay_windows
from .series import as_array
from .spectral import KernelParams, SpectralModel, encode_batch, median_sq_distance, sq_distances

DEFAULT_NOISE = 1e-4


def rbf(A: np.ndarray, B: np.ndarray, beta: float, epsilon: float) -> np.ndarray:
    """``exp(-beta * |a - b|^2 / epsilon)`` for all row pairs."""
    return np.exp(-beta * sq_distances(np.atleast_2d(A), np.atleast_2d(B)) / epsilon)


@dataclass(frozen=True)
class GplmDecoder:
    train_latents: np.ndarray  # (M, r)
    train_targets: np.ndarray  # (M, D)
    kernel: KernelParams
    noise_var: float
    gram_factor: np.ndarray  # lower Cholesky factor of K + noise_var * I
    weights: np.ndarray  # (K + noise_var I)^-1 Y

    @property
    def M(self) -> int:
        return self.train_latents.shape[0]


def build_pairs(series, model: SpectralModel, indices=None) -> tuple[np.ndarray, np.ndarray]:
    """Latent of each window paired with the sample right after it.

    ``indices`` optionally restricts which windows (by start index) are used;
    windows without a successor are always dropped.
    """
    values = as_array(series)
    L = model.window_shape[0]
    n_pairs = values.shape[0] - L
    if n_pairs < 1:
        raise ValueError(f"series of length {values.shape[0]} yields no (window, next sample) pair for L={L}")
    idx = np.arange(n_pairs) if indices is None else np.asarray(indices, dtype=int)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= n_pairs:
        raise ValueError("window indices out of range")
    windows = delay_windows(values, L)[idx]
    return encode_batch(model, windows), values[idx + L].copy()


def default_latent_kernel(latents: np.ndarray, beta: float = 1.0, scale: float = 1.0) -> KernelParams:
    """Latent kernel with ``epsilon = scale * median squared latent distance``."""
    z = np.asarray(latents, dtype=float)
    eps = median_sq_distance(sq_distances(z, z)) if z.shape[0] > 1 else 1.0
    return KernelParams(beta=beta, epsilon=scale * eps, alpha_density=0.0)


def fit_decoder(latents, targets, kernel: KernelParams | None = None,
                noise_var: float = DEFAULT_NOISE) -> GplmDecoder:
    Z = np.atleast_2d(np.asarray(latents, dtype=float))
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Z.shape[0] != Y.shape[0] or Z.shape[0] < 1:
        raise ValueError("latents and targets must have the same, nonzero number of rows")
    if noise_var < 0:
        raise ValueError("noise_var must be nonnegative")
    kernel = kernel or default_latent_kernel(Z)
    if kernel.epsilon is None:
        kernel = default_latent_kernel(Z, kernel.beta)
    G = rbf(Z, Z, kernel.beta, kernel.epsilon)
    G[np.diag_indices_from(G)] += noise_var
    try:
        Lf = scipy.linalg.cholesky(G, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(
            f"Gram matrix is not positive definite ({exc}); increase noise_var") from None
    W = scipy.linalg.cho_solve((Lf, True), Y)
    for a in (Z, Y, Lf, W):
        a.setflags(write=False)
    return GplmDecoder(Z, Y, kernel, float(noise_var), Lf, W)


def predict_batch(decoder: GplmDecoder, Z, return_var: bool = True):
    """Predictive means ``(n, D)`` and, unless ``return_var`` is False, scalar
    variances ``(n,)``."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[1] != decoder.train_latents.shape[1]:
        raise ValueError(f"latent must have length {decoder.train_latents.shape[1]}")
    ka = rbf(Z, decoder.train_latents, decoder.kernel.beta, decoder.kernel.epsilon)
    mean = ka @ decoder.weights
    if not return_var:
        return mean
    v = scipy.linalg.solve_triangular(decoder.gram_factor, ka.T, lower=True)
    var = np.clip(1.0 - np.einsum("ij,ij->j", v, v), 0.0, 1.0)
    return mean, var


def predict(decoder: GplmDecoder, z) -> tuple[np.ndarray, float]:
    """Predictive mean (D-vector) and variance (scalar) at one latent."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise ValueError("z must be a single latent vector")
    mean, var = predict_batch(decoder, z[None])
    return mean[0], float(var[0])
