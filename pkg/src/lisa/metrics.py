"""Forecast-vs-truth error metrics.

Four complementary scores: pointwise MSE (plus its horizon-resolved curve),
a divergence between normalized Welch spectra, the MSE between normalized
autocorrelation functions, and an unbiased squared MMD between state samples
with a random-Fourier-feature RBF kernel.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

SPECTRAL_FLOOR = 1e-12
DEFAULT_FEATURES = 2048


class DegenerateSeriesWarning(UserWarning):
    """A coordinate is constant, so its spectrum or autocorrelation is undefined."""


def _pair(forecast, truth) -> tuple[np.ndarray, np.ndarray]:
    F = np.asarray(forecast, dtype=float)
    T = np.asarray(truth, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if T.ndim == 1:
        T = T[:, None]
    if F.shape != T.shape:
        raise ValueError(f"forecast shape {F.shape} does not match truth shape {T.shape}")
    return F, T


def mse(forecast, truth) -> tuple[float, np.ndarray]:
    """Mean over steps of the squared Euclidean error, and the per-step errors."""
    F, T = _pair(forecast, truth)
    by_h = np.sum((F - T) ** 2, axis=1)
    return float(by_h.mean()), by_h


# --- spectra ---------------------------------------------------------------

@dataclass(frozen=True)
class WelchSettings:
    """``segment_len=None`` means ``min(256, n)``."""

    segment_len: int | None = None
    overlap: float = 0.5
    window: str = "hann"
    floor: float = SPECTRAL_FLOOR

    def resolve(self, n: int) -> tuple[int, int]:
        seg = min(256, n) if self.segment_len is None else int(self.segment_len)
        if seg > n:
            raise ValueError(f"series length {n} is shorter than the Welch segment {seg}")
        return seg, int(math.floor(self.overlap * seg))


def welch_psd(x: np.ndarray, settings: WelchSettings = WelchSettings()) -> np.ndarray:
    """One-sided Welch PSD per column, ``(n_freq, D)``, mean-detrended per segment."""
    x = np.asarray(x, dtype=float)
    seg, nover = settings.resolve(x.shape[0])
    _, S = scipy.signal.welch(x, window=settings.window, nperseg=seg, noverlap=nover,
                              detrend="constant", scaling="density", axis=0)
    return S


def spectral_masses(S: np.ndarray, floor: float = SPECTRAL_FLOOR) -> np.ndarray:
    """Floor-regularized probability masses over frequency, zero frequency dropped."""
    S = S[1:] + floor
    return S / S.sum(axis=0, keepdims=True)


def _kl(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.sum(p * np.log(p / q), axis=0)


def js_divergence(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    m = 0.5 * (p + q)
    return 0.5 * _kl(p, m) + 0.5 * _kl(q, m)


def _constant_columns(x: np.ndarray) -> np.ndarray:
    return np.ptp(x, axis=0) == 0


def spectral_divergence(forecast, truth, kind: str = "JS",
                        welch: WelchSettings = WelchSettings()) -> float:
    """Coordinate-averaged JS (or KL(truth || forecast)) divergence, in nats,
    between normalized Welch spectra."""
    F, T = _pair(forecast, truth)
    if _constant_columns(F).any() or _constant_columns(T).any():
        warnings.warn("constant coordinate: its spectral mass sits on the floor",
                      DegenerateSeriesWarning, stacklevel=2)
    pT = spectral_masses(welch_psd(T, welch), welch.floor)
    pF = spectral_masses(welch_psd(F, welch), welch.floor)
    kind = kind.upper()
    if kind == "JS":
        per = js_divergence(pT, pF)
    elif kind == "KL":
        per = _kl(pT, pF)
    else:
        raise ValueError("kind must be 'JS' or 'KL'")
    return float(np.mean(np.maximum(per, 0.0)))


# --- autocorrelation -------------------------------------------------------

def autocorrelation(x, tau_max: int) -> np.ndarray:
    """Biased normalized sample ACF at lags ``0..tau_max``, shape ``(tau_max+1, D)``.

    A constant column has an undefined ACF; it is reported as 0 at every lag.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if not 0 <= tau_max < n:
        raise ValueError(f"tau_max={tau_max} must be below the series length {n}")
    xc = x - x.mean(axis=0)
    denom = np.sum(xc * xc, axis=0)
    num = np.stack([np.sum(xc[: n - t] * xc[t:], axis=0) for t in range(tau_max + 1)])
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 0.0)
    return rho


def default_tau_max(n: int) -> int:
    return min(n - 1, 50)


def acf_mse(forecast, truth, tau_max: int | None = None) -> float:
    """Squared ACF discrepancy averaged over lags ``1..tau_max`` and coordinates."""
    F, T = _pair(forecast, truth)
    tau_max = default_tau_max(F.shape[0]) if tau_max is None else int(tau_max)
    if tau_max < 1:
        raise ValueError("tau_max must be at least 1")
    if _constant_columns(F).any() or _constant_columns(T).any():
        warnings.warn("constant coordinate: autocorrelation set to 0",
                      DegenerateSeriesWarning, stacklevel=2)
    diff = autocorrelation(F, tau_max)[1:] - autocorrelation(T, tau_max)[1:]
    return float(np.mean(diff**2))


# --- MMD -------------------------------------------------------------------

def median_bandwidth(samples) -> float:
    """Median pairwise Euclidean distance of a sample (1.0 if it vanishes)."""
    Z = np.asarray(samples, dtype=float)
    sq = np.einsum("ij,ij->i", Z, Z)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * Z @ Z.T, 0.0)
    iu = np.triu_indices(Z.shape[0], k=1)
    med = float(np.sqrt(np.median(d2[iu]))) if iu[0].size else 0.0
    return med if med > 0 else 1.0


def gaussian_kernel(A, B, bandwidth: float) -> np.ndarray:
    """``exp(-|a - b|^2 / (2 h^2))``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    d2 = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)
    return np.exp(-d2 / (2.0 * bandwidth**2))


def _check_samples(X, Y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError("samples must share the same dimension")
    if X.shape[0] < 2 or Y.shape[0] < 2:
        raise ValueError("need at least two samples on each side")
    return X, Y


def mmd2_exact(X, Y, bandwidth: float) -> float:
    """Unbiased (diagonal-excluded) MMD^2 with the exact Gaussian kernel."""
    X, Y = _check_samples(X, Y)
    n, m = X.shape[0], Y.shape[0]
    Kxx = gaussian_kernel(X, X, bandwidth)
    Kyy = gaussian_kernel(Y, Y, bandwidth)
    Kxy = gaussian_kernel(X, Y, bandwidth)
    return float((Kxx.sum() - np.trace(Kxx)) / (n * (n - 1))
                 + (Kyy.sum() - np.trace(Kyy)) / (m * (m - 1))
                 - 2.0 * Kxy.mean())


def rff_features(Z: np.ndarray, n_features: int, bandwidth: float, seed: int) -> np.ndarray:
    """Random Fourier features whose inner products approximate the Gaussian kernel."""
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((Z.shape[1], n_features)) / bandwidth
    b = rng.uniform(0.0, 2.0 * np.pi, n_features)
    return math.sqrt(2.0 / n_features) * np.cos(Z @ W + b)


def mmd2_rff(X, Y, n_features: int = DEFAULT_FEATURES, bandwidth: float | None = None,
             seed: int = 0) -> float:
    """Unbiased MMD^2 with the kernel replaced by a random-feature inner product.

    ``bandwidth=None`` uses the median heuristic on the pooled sample. The
    estimate can be slightly negative.
    """
    X, Y = _check_samples(X, Y)
    h = median_bandwidth(np.vstack([X, Y])) if bandwidth is None else float(bandwidth)
    fx = rff_features(X, n_features, h, seed)
    fy = rff_features(Y, n_features, h, seed)
    n, m = X.shape[0], Y.shape[0]
    sx, sy = fx.sum(axis=0), fy.sum(axis=0)
    xx = (sx @ sx - np.einsum("ij,ij->", fx, fx)) / (n * (n - 1))
    yy = (sy @ sy - np.einsum("ij,ij->", fy, fy)) / (m * (m - 1))
    xy = (sx @ sy) / (n * m)
    return float(xx + yy - 2.0 * xy)


# --- report ----------------------------------------------------------------

@dataclass
class MetricReport:
    mse: float
    mse_by_horizon: np.ndarray
    acf_mse: float
    spec_div: float
    mmd2: float
    metadata: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        """Flat key-value record: scalar metrics followed by estimator settings."""
        rec = {"mse": self.mse, "acf_mse": self.acf_mse, "spec_div": self.spec_div, "mmd2": self.mmd2}
        rec.update(self.metadata)
        return rec


def evaluate(forecast, truth, *, kind: str = "JS", welch: WelchSettings = WelchSettings(),
             tau_max: int | None = None, n_features: int = DEFAULT_FEATURES,
             bandwidth: float | None = None, seed: int = 0) -> MetricReport:
    """All metrics for one forecast against its ground truth.

    Autocorrelation, spectral and MMD scores need at least two samples and are NaN
    for a single-step forecast.
    """
    F, T = _pair(forecast, truth)
    n = F.shape[0]
    tau = default_tau_max(n) if tau_max is None else int(tau_max)
    seg, nover = welch.resolve(n)
    h = median_bandwidth(np.vstack([T, F])) if bandwidth is None else float(bandwidth)
    flags = []
    if n < 2:
        flags.append("too_short")
    if _constant_columns(F).any() or _constant_columns(T).any():
        flags.append("constant_coordinate")
    total, by_h = mse(F, T)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSeriesWarning)
        sd = spectral_divergence(F, T, kind, welch) if n >= 2 else math.nan
        am = acf_mse(F, T, tau) if n >= 2 else math.nan
    meta = {
        "spec_kind": kind.upper(), "welch_segment": seg, "welch_overlap": nover,
        "welch_window": welch.window, "spectral_floor": welch.floor, "tau_max": tau,
        "rff_features": n_features, "mmd_bandwidth": h, "mmd_seed": seed,
        "flags": ";".join(flags),
    }
    mmd = mmd2_rff(T, F, n_features, h, seed) if n >= 2 else math.nan
    return MetricReport(total, by_h, am, sd, mmd, meta)
