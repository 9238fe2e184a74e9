"""Smooth dyadic pieces of the Hilbert kernel 1/y.

chi is even, equal to 1 on |t| <= 4 and supported in |t| <= 8. With
rho(y) = chi(y) - chi(2y) and psi(y) = rho(y)/y, the rescaled pieces
psi_k(y) = 2^k psi(2^k y) telescope:

    sum_{k=0}^{K} psi_k(y) = (chi(y) - chi(2^(K+1) y)) / y,

which equals 1/y whenever 4 * 2^-K <= |y| <= 4.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["chi", "rho", "psi", "psi_k", "kernel_sum", "torus_offsets", "kernel_array", "kernel_window"]


def _h(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def _ramp(s: np.ndarray) -> np.ndarray:
    a = _h(s)
    b = _h(1.0 - s)
    return a / (a + b)


def chi(t) -> np.ndarray:
    t = np.abs(np.asarray(t, dtype=np.float64))
    return _ramp((8.0 - t) / 4.0)


def rho(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return chi(y) - chi(2.0 * y)


def psi(y) -> np.ndarray:
    """Odd bump supported in 2 < |y| < 8."""
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros_like(y)
    nz = y != 0
    out[nz] = rho(y[nz]) / y[nz]
    return out


def psi_k(y, k: int) -> np.ndarray:
    s = 2.0**k
    return s * psi(s * np.asarray(y, dtype=np.float64))


def kernel_sum(y, k_lo: int, k_hi: int) -> np.ndarray:
    """sum of psi_k(y) for k_lo <= k <= k_hi."""
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros_like(y)
    for k in range(k_lo, k_hi + 1):
        out += psi_k(y, k)
    return out


def torus_offsets(N: int) -> np.ndarray:
    """Signed torus distance d/N in [-1/2, 1/2) for d = 0..N-1."""
    d = np.arange(N)
    d = np.where(d >= N // 2, d - N, d)
    return d / N


@lru_cache(maxsize=128)
def kernel_array(m: int, k: int) -> np.ndarray:
    """psi_k sampled at every torus offset (index d <-> distance d/N)."""
    arr = psi_k(torus_offsets(1 << m), k)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=128)
def kernel_fft(m: int, k: int) -> np.ndarray:
    arr = np.fft.fft(kernel_array(m, k))
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=128)
def kernel_window(m: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer offsets d with psi_k(d/N) != 0 and the matching weights."""
    N = 1 << m
    half = (8 * N) >> k
    d = np.arange(-half, half + 1)
    w = psi_k(d / N, k)
    keep = w != 0
    d, w = d[keep], w[keep]
    d.setflags(write=False)
    w.setflags(write=False)
    return d, w
