"""Diffusion-map encoder over delay windows.

The Markov operator is built with the density-corrected softmax

    K_ij = exp(-beta * H_ij),  q_i = sum_j K_ij,
    K^a_ij = K_ij / (q_i^a q_j^a),  P_ij = K^a_ij / sum_k K^a_ik,

on ``H = D^2 / epsilon`` (squared window distances). ``P`` is similar to the
symmetric matrix ``d^-1/2 K^a d^-1/2`` (``d`` the row sums of ``K^a``), which
is what gets diagonalized. New windows are mapped by Nystrom extension.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import DegenerateKernelError
from .hankel import DelayTensor

MODE_FLOOR = 1e-10
# exp() of anything below this underflows to zero in double precision
_LOG_TINY = float(np.log(np.finfo(float).tiny)) - 52 * float(np.log(2.0))


@dataclass(frozen=True)
class KernelParams:
    """Gaussian kernel ``exp(-beta * d^2 / epsilon)``.

    ``epsilon=None`` defers to a median heuristic at fit time.
    ``alpha_density`` is the density-normalization exponent (0 gives the plain
    random walk, 1 the Laplace-Beltrami normalization).
    """

    beta: float = 1.0
    epsilon: float | None = None
    alpha_density: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 <= self.alpha_density <= 1.0:
            raise ValueError("alpha_density must lie in [0, 1]")


@dataclass(frozen=True)
class SpectralModel:
    train_windows: np.ndarray  # (K, L*D)
    window_shape: tuple[int, int]  # (L, D)
    kernel: KernelParams  # epsilon always resolved
    eigenvalues: np.ndarray  # (r+1,) descending, eigenvalues[0] == 1
    eigenvectors: np.ndarray  # (K, r+1) right eigenvectors of P
    density: np.ndarray  # (K,) degrees q before alpha-normalization
    rank: int
    metadata: dict = field(default_factory=dict, compare=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def K(self) -> int:
        return self.train_windows.shape[0]

    @property
    def active_modes(self) -> np.ndarray:
        """Boolean mask over the ``rank`` nontrivial modes kept for encoding."""
        return self.eigenvalues[1:] > MODE_FLOOR

    @property
    def coordinates(self) -> np.ndarray:
        """Diffusion coordinates of the training windows, ``(K, rank)``."""
        return np.where(self.active_modes, self.eigenvectors[:, 1:], 0.0)


def _alpha_affinity(H: np.ndarray, beta: float, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    K = np.exp(-beta * H)
    q = K.sum(axis=1)
    if not np.all(q > 0):
        raise DegenerateKernelError(
            "kernel degree vanished for some rows; increase epsilon")
    qa = q**alpha
    return K / qa[:, None] / qa[None, :], q


def cl_softmax(H, params: KernelParams) -> np.ndarray:
    """Density-corrected row softmax of ``-beta * H`` (a row-stochastic matrix)."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] < 1:
        raise ValueError("H must be a non-empty square matrix")
    if not np.isfinite(H).all():
        raise ValueError("H must be finite")
    Ka, _ = _alpha_affinity(H, params.beta, params.alpha_density)
    return Ka / Ka.sum(axis=1, keepdims=True)


def sq_distances(A: np.ndarray, B: np.ndarray, B_sq: np.ndarray | None = None) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of ``A`` and ``B``."""
    if B_sq is None:
        B_sq = np.einsum("ij,ij->i", B, B)
    A_sq = np.einsum("ij,ij->i", A, A)
    d2 = A_sq[:, None] + B_sq[None, :] - 2.0 * (A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def median_sq_distance(d2: np.ndarray) -> float:
    iu = np.triu_indices(d2.shape[0], k=1)
    med = float(np.median(d2[iu])) if iu[0].size else 0.0
    return med if med > 0 else 1.0


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def fit(train, params: KernelParams | None = None, r: int = 10, **metadata) -> SpectralModel:
    """Fit the diffusion-map encoder on training windows.

    Parameters
    ----------
    train : DelayTensor or array of shape (K, L, D)
        Training delay windows.
    params : KernelParams
        Kernel settings; ``epsilon=None`` uses the median squared distance.
    r : int
        Number of nontrivial modes to keep.
    **metadata
        Stored verbatim in ``model.metadata`` (seed, data hash, ...).
    """
    params = params or KernelParams()
    data = train.data if isinstance(train, DelayTensor) else np.asarray(train, dtype=float)
    if data.ndim != 3:
        raise ValueError("training windows must have shape (K, L, D)")
    K, L, D = data.shape
    if not K > r + 1:
        raise ValueError(f"need more than r+1={r + 1} windows, got {K}")
    X = np.ascontiguousarray(data.reshape(K, L * D), dtype=float)

    d2 = sq_distances(X, X)
    np.fill_diagonal(d2, 0.0)
    eps = params.epsilon if params.epsilon is not None else median_sq_distance(d2)
    kernel = replace(params, epsilon=float(eps))

    Ka, q = _alpha_affinity(d2 / eps, kernel.beta, kernel.alpha_density)
    deg = Ka.sum(axis=1)
    root = np.sqrt(deg)
    S = Ka / root[:, None] / root[None, :]
    S = 0.5 * (S + S.T)
    try:
        lam, U = scipy.linalg.eigh(S, subset_by_index=[K - r - 1, K - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DegenerateKernelError(f"eigensolver failed: {exc}") from exc
    lam, U = lam[::-1], U[:, ::-1]
    # right eigenvectors of P, scaled to unit degree-weighted RMS
    phi = U * np.sqrt(deg.sum() / deg)[:, None]
    phi = _fix_signs(phi)

    meta = dict(metadata)
    excluded = [int(i + 1) for i in np.flatnonzero(lam[1:] <= MODE_FLOOR)]
    if excluded:
        msg = f"modes {excluded} have eigenvalue <= {MODE_FLOOR:g} and are excluded from encoding"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        meta.setdefault("warnings", []).append(msg)

    X.setflags(write=False)
    for a in (lam, phi, q):
        a.setflags(write=False)
    return SpectralModel(X, (L, D), kernel, lam, phi, q, int(r), meta)


def markov_operator(model: SpectralModel) -> np.ndarray:
    """Rebuild the dense training Markov matrix (for diagnostics and tests)."""
    d2 = sq_distances(model.train_windows, model.train_windows)
    np.fill_diagonal(d2, 0.0)
    return cl_softmax(d2 / model.kernel.epsilon, model.kernel)


def _row_stats(model: SpectralModel) -> dict:
    cache = model._cache
    if not cache:
        X = model.train_windows
        lam = model.eigenvalues[1:]
        active = model.active_modes
        scale = np.where(active, 1.0 / np.where(active, lam, 1.0), 0.0)
        cache.update({
            "X_sq": np.einsum("ij,ij->i", X, X),
            "log_qa": model.kernel.alpha_density * np.log(model.density),
            "proj": model.eigenvectors[:, 1:] * scale[None, :],
        })
    return cache


def encode_batch(model: SpectralModel, windows) -> np.ndarray:
    """Nystrom coordinates of ``(M, L, D)`` windows, shape ``(M, rank)``."""
    W = np.asarray(windows, dtype=float)
    L, D = model.window_shape
    if W.ndim == 2 and W.shape[1] == L * D:
        W = W.reshape(-1, L, D)
    if W.ndim != 3 or W.shape[1:] != (L, D):
        raise ValueError(f"windows must have shape (M, {L}, {D}), got {W.shape}")
    if W.shape[0] == 0:
        return np.zeros((0, model.rank))
    cache = _row_stats(model)
    Wf = W.reshape(W.shape[0], L * D)
    d2 = sq_distances(Wf, model.train_windows, cache["X_sq"])
    logits = -model.kernel.beta * d2 / model.kernel.epsilon
    top = logits.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(top)) or np.any(top < _LOG_TINY):
        raise DegenerateKernelError(
            "window is too far from every training window: kernel row underflows; "
            "increase epsilon")
    # q_new^alpha is a common row factor and cancels in the row normalization
    logits = logits - cache["log_qa"][None, :]
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return p @ cache["proj"]


def encode(model: SpectralModel, window) -> np.ndarray:
    """Nystrom coordinates of a single ``(L, D)`` window."""
    w = np.asarray(window, dtype=float)
    if w.shape != tuple(model.window_shape):
        raise ValueError(f"window must have shape {model.window_shape}, got {w.shape}")
    return encode_batch(model, w[None])[0]
