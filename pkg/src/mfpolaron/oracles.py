"""Closed-form reference solutions used by the self-test and the test suite.

These are evaluated from analytic formulas only (no FFT of sampled data),
so they stay independent of the spectral code paths they check.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.special import erf

from .fields import Grid, inverse

__all__ = [
    "gaussian_density",
    "gaussian_potential_free",
    "gaussian_potential_periodic",
    "free_gaussian_evolution",
    "periodic_green_direct",
]


def gaussian_density(grid: Grid, sigma: float, total: float = 1.0) -> np.ndarray:
    """Normalized density total (2 pi sigma^2)^(-3/2) exp(-r^2 / (2 sigma^2))."""
    return total * (2 * np.pi * sigma**2) ** -1.5 * np.exp(-grid.r2 / (2 * sigma**2))


def _erf_over_r(r: np.ndarray, a: float) -> np.ndarray:
    """erf(a r) / r with its limit 2a/sqrt(pi) at r = 0."""
    out = np.full_like(r, 2 * a / np.sqrt(np.pi))
    nz = r > 0
    out[nz] = erf(a * r[nz]) / r[nz]
    return out


def gaussian_potential_free(r: np.ndarray, sigma: float, total: float = 1.0) -> np.ndarray:
    """Whole-space solution of Lap phi = Gaussian density: -total erf(r/(sqrt2 sigma)) / (4 pi r)."""
    return -total * _erf_over_r(np.asarray(r, dtype=float), 1 / (np.sqrt(2) * sigma)) / (4 * np.pi)


def gaussian_potential_periodic(grid: Grid, sigma: float, total: float = 1.0, sigma_wide: float = 1.5) -> np.ndarray:
    """Mean-zero periodic potential of a Gaussian density, by Ewald splitting.

    The whole-space erf potential is split into a short-range part
    (width ``sigma`` minus width ``sigma_wide``), summed over the nearest
    periodic images, and the potential of the wide Gaussian, summed from its
    exact Fourier coefficients exp(-sigma_wide^2 |k|^2 / 2).
    """
    x1, x2, x3 = grid.coords
    a = 1 / (np.sqrt(2) * sigma)
    b = 1 / (np.sqrt(2) * sigma_wide)
    short = np.zeros(grid.shape)
    for shift in itertools.product((-1, 0, 1), repeat=3):
        d = np.sqrt(
            (x1 - shift[0] * grid.L) ** 2 + (x2 - shift[1] * grid.L) ** 2 + (x3 - shift[2] * grid.L) ** 2
        )
        short += -(total / (4 * np.pi)) * (_erf_over_r(d, a) - _erf_over_r(d, b))
    # coefficients of the wide part, phase-shifted to the box origin at -L/2
    coeff = -(total / grid.volume) * np.exp(-(sigma_wide**2) * grid.k2 / 2) * grid.inv_k2
    k1, k2, k3 = grid.wavevector
    coeff = coeff * np.exp(1j * (k1 + k2 + k3) * (-grid.L / 2))
    wide = inverse(coeff).real
    phi = short + wide
    return phi - phi.mean()


def free_gaussian_evolution(grid: Grid, sigma: float, t: float, images: int = 1) -> np.ndarray:
    """Periodized solution of u_t = i Lap u from exp(-r^2 / (2 sigma^2)).

    Each image evolves as (sigma^2/a)^(3/2) exp(-r^2/(2a)) with a = sigma^2 + 2 i t.
    """
    a = sigma**2 + 2j * t
    pref = (sigma**2 / a) ** 1.5
    x1, x2, x3 = grid.coords
    out = np.zeros(grid.shape, dtype=complex)
    rng = range(-images, images + 1)
    for s1, s2, s3 in itertools.product(rng, rng, rng):
        r2 = (x1 - s1 * grid.L) ** 2 + (x2 - s2 * grid.L) ** 2 + (x3 - s3 * grid.L) ** 2
        out += pref * np.exp(-r2 / (2 * a))
    return out


def periodic_green_direct(grid: Grid, source: np.ndarray) -> np.ndarray:
    """Direct O(n^6) convolution with the grid's periodic Green's function.

    G(x) = -(1/L^3) sum_{k != 0} e^{ik.x} / |k|^2 is tabulated by explicit
    summation over the grid modes, then convolved point by point.
    """
    n = grid.n
    kk = grid.k_axis
    offsets = grid.h * np.arange(n)
    # 1D phase tables e^{i k d} for every offset d
    ph = np.exp(1j * np.outer(offsets, kk))
    G = np.zeros(grid.shape)
    inv = grid.inv_k2
    for a in range(n):
        for b in range(n):
            for c in range(n):
                G[a, b, c] = -np.real(np.sum(inv * ph[a][:, None, None] * ph[b][None, :, None] * ph[c][None, None, :]))
    G /= grid.volume
    out = np.zeros(grid.shape)
    idx = np.arange(n)
    w = grid.cell_volume
    for i, j, k in itertools.product(idx, idx, idx):
        shifted = G[np.ix_((i - idx) % n, (j - idx) % n, (k - idx) % n)]
        out[i, j, k] = w * np.sum(shifted * source)
    return out
