"""Exactly solvable building-block flows on the periodic grid."""

from __future__ import annotations

import numpy as np

from .fields import Grid, apply_fourier_multiplier, forward, inverse

__all__ = [
    "inv_laplacian",
    "hartree_potential",
    "free_flow",
    "free_flow_symbol",
    "lambda_rotate",
    "phase_kick",
    "dealias",
]


def inv_laplacian(w: np.ndarray, grid: Grid) -> np.ndarray:
    """Solve Lap v = w - mean(w) with mean(v) = 0.

    Mode k != 0 is multiplied by -1/|k|^2 and the zero mode is dropped: on the
    torus only the mean-free part of the source is invertible.
    """
    return apply_fourier_multiplier(w, -grid.inv_k2)


def dealias(f: np.ndarray, grid: Grid) -> np.ndarray:
    return apply_fourier_multiplier(f, grid.dealias_mask.astype(float))


def hartree_potential(u: np.ndarray, grid: Grid, dealiased: bool = False) -> np.ndarray:
    """Mean-zero potential inv_laplacian(|u|^2); real output."""
    density = u.real**2 + u.imag**2 if np.iscomplexobj(u) else u**2
    if dealiased:
        return apply_fourier_multiplier(density, -grid.inv_k2 * grid.dealias_mask)
    return inv_laplacian(density, grid)


def free_flow_symbol(grid: Grid, t: float) -> np.ndarray:
    return np.exp(-1j * grid.k2 * t)


def free_flow(u: np.ndarray, grid: Grid, t: float) -> np.ndarray:
    """Exact solution of u' = i Lap u after time ``t`` (any sign)."""
    if t == 0:
        return np.array(u, dtype=complex, copy=True)
    return inverse(free_flow_symbol(grid, t) * forward(u))


def lambda_rotate(v: np.ndarray, w: np.ndarray, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Flow of (v, w)' = (w, -v) over angle ``theta`` (callers pass t / eps).

    Pointwise (v, w) -> (v cos + w sin, -v sin + w cos).
    """
    c, s = np.cos(theta), np.sin(theta)
    return c * v + s * w, c * w - s * v


def phase_kick(u: np.ndarray, v: np.ndarray, tau: float) -> np.ndarray:
    """Exact flow of u' = -i v u with frozen real ``v``: u * exp(-i v tau)."""
    if np.iscomplexobj(v):
        raise TypeError("phase_kick needs a real potential")
    return u * np.exp(-1j * tau * v)
