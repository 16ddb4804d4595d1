"""Delay-coordinate (Hankel) embedding and prefix splitting.

All indices are zero-based: window ``T`` of length ``L`` covers samples
``T, ..., T + L - 1`` and its one-step target is sample ``T + L``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import as_array


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DelayTensor:
    """``data[T, c, X] == source[T + c, X]`` for the ``K = N - L + 1`` windows."""

    data: np.ndarray
    L: int
    origin_index: np.ndarray

    @property
    def K(self) -> int:
        return self.data.shape[0]

    @property
    def D(self) -> int:
        return self.data.shape[2]

    def flat(self) -> np.ndarray:
        """Windows flattened to ``(K, L * D)`` in lag-major order."""
        return self.data.reshape(self.K, -1)


@dataclass(frozen=True)
class ContextSplit:
    context_windows: np.ndarray  # (C, L, D)
    targets: np.ndarray  # (C, D)
    query_window: np.ndarray  # (L, D)

    @property
    def C(self) -> int:
        return self.context_windows.shape[0]


def delay_windows(values: np.ndarray, L: int) -> np.ndarray:
    """Read-only ``(N - L + 1, L, D)`` view of the windows of a 2-D array."""
    v = np.lib.stride_tricks.sliding_window_view(values, L, axis=0)
    # sliding_window_view puts the window axis last: (K, D, L) -> (K, L, D)
    return v.transpose(0, 2, 1)


def hankelize(series, L: int) -> DelayTensor:
    values = as_array(series)
    N = values.shape[0]
    if not 1 <= L <= N:
        raise ValueError(f"window length L={L} must satisfy 1 <= L <= N={N}")
    data = delay_windows(values, L)
    return DelayTensor(_frozen(data), int(L), _frozen(np.arange(data.shape[0])))


def split_prefix(prefix, L: int) -> ContextSplit:
    """Split a length-``l`` prefix into ``C = l - L`` context windows with their
    in-prefix targets, plus the final (query) window."""
    values = as_array(prefix)
    ell = values.shape[0]
    if ell < L or L < 1:
        raise ValueError(f"prefix length {ell} is shorter than the window length L={L}")
    windows = delay_windows(values, L)
    C = ell - L
    return ContextSplit(
        context_windows=_frozen(windows[:C]),
        targets=_frozen(values[L:]),
        query_window=_frozen(windows[C]),
    )
