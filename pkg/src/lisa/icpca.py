"""In-context PCA toy problem.

A PCA basis ``V`` is learned on data from one Gaussian; samples from a shifted
Gaussian are then encoded with that stale basis. The best linear map back to
ambient coordinates is ``W = S V (V^T S V)^-1`` for the shifted covariance
``S``. :func:`adaptation_report` compares this oracle with the same formula fed
a plug-in covariance estimated from ``ell`` shifted samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import _fix_signs


@dataclass(frozen=True)
class PcaModel:
    loading: np.ndarray  # (D, r) orthonormal columns
    mean: np.ndarray  # (D,)
    eigvals: np.ndarray  # (r,) descending

    @property
    def r(self) -> int:
        return self.loading.shape[1]

    def encode(self, samples) -> np.ndarray:
        return (np.asarray(samples, dtype=float) - self.mean) @ self.loading


def covariance(samples) -> np.ndarray:
    """Empirical covariance with the unbiased ``1/(N-1)`` normalization."""
    P = np.asarray(samples, dtype=float)
    if P.ndim != 2 or P.shape[0] < 2:
        raise ValueError("need an (N, D) sample with N > 1")
    c = P - P.mean(axis=0)
    return c.T @ c / (P.shape[0] - 1)


def fit_pca(samples, r: int, rank_tol: float = 1e-10) -> PcaModel:
    P = np.asarray(samples, dtype=float)
    if P.ndim != 2 or P.shape[0] < 2:
        raise ValueError("need an (N, D) sample with N > 1")
    D = P.shape[1]
    if not 1 <= r <= D:
        raise ValueError(f"r must lie in [1, {D}]")
    lam, V = np.linalg.eigh(covariance(P))
    lam, V = lam[::-1], V[:, ::-1]
    lam = np.maximum(lam, 0.0)
    if lam[r - 1] <= rank_tol * max(lam[0], 1.0):
        raise ValueError(f"r={r} exceeds the numerical rank of the sample covariance")
    return PcaModel(_fix_signs(V[:, :r]), P.mean(axis=0), lam[:r])


def oracle_adaptation(sigma_q, pca: PcaModel) -> np.ndarray:
    """Least-squares map from stale latents ``V^T q`` back to ``q`` (D x r)."""
    S = np.asarray(sigma_q, dtype=float)
    V = pca.loading
    proj = V.T @ S @ V
    cond = np.linalg.cond(proj)
    if not np.isfinite(cond) or cond > 1e12:
        raise np.linalg.LinAlgError("projected covariance V^T S V is singular")
    return np.linalg.solve(proj, (S @ V).T).T


def reconstruction_error(W: np.ndarray, pca: PcaModel, samples) -> float:
    """Mean squared residual ``|q - W V^T q|^2`` over zero-mean samples."""
    Q = np.asarray(samples, dtype=float)
    R = Q - (Q @ pca.loading) @ W.T
    return float(np.mean(np.sum(R**2, axis=1)))


def random_covariance(D: int, rng: np.random.Generator, spread: float = 1.0) -> np.ndarray:
    A = rng.standard_normal((D, D))
    return A @ A.T / D + spread * 0.1 * np.eye(D)


def adaptation_report(D: int = 6, r: int = 2, n_train: int = 20000,
                      context_lengths=(4, 8, 16, 32, 64, 128, 256, 512, 1024),
                      n_eval: int = 20000, n_repeats: int = 20, seed: int = 0) -> list[dict]:
    """Oracle vs. plug-in adaptation error as the shifted context grows.

    Each row reports, for one context length, the reconstruction error of the
    stale PCA basis (``W = V``), of the oracle map, and the mean/std of the
    plug-in map over ``n_repeats`` independent contexts.
    """
    rng = np.random.default_rng(seed)
    sig_p = random_covariance(D, rng)
    sig_q = random_covariance(D, rng)
    zero = np.zeros(D)
    pca = fit_pca(rng.multivariate_normal(zero, sig_p, n_train), r)
    q_eval = rng.multivariate_normal(zero, sig_q, n_eval)
    w_oracle = oracle_adaptation(sig_q, pca)
    base = reconstruction_error(pca.loading, pca, q_eval)
    oracle = reconstruction_error(w_oracle, pca, q_eval)
    rows = []
    for ell in context_lengths:
        errs, gaps = [], []
        for _ in range(n_repeats):
            ctx = rng.multivariate_normal(zero, sig_q, ell)
            w_hat = oracle_adaptation(covariance(ctx), pca)
            errs.append(reconstruction_error(w_hat, pca, q_eval))
            gaps.append(float(np.linalg.norm(w_hat - w_oracle)))
        rows.append({
            "context_length": int(ell),
            "stale_error": base,
            "oracle_error": oracle,
            "plugin_error_mean": float(np.mean(errs)),
            "plugin_error_std": float(np.std(errs)),
            "map_distance_mean": float(np.mean(gaps)),
        })
    return rows
