"""Localized initial data, prepared coupled data and the Pekar ground state."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .choquard import ChoquardState, choquard_energy
from .fields import Grid, forward, inverse, laplacian, mass, norm_sobolev, norm_y
from .operators import hartree_potential, inv_laplacian

__all__ = [
    "PreparedData",
    "gaussian_wave",
    "normalize_mass",
    "gaussian_amplitude_for_mass",
    "potential_rate",
    "trig_perturbation",
    "random_bandlimited_field",
    "prepared_polaron_data",
    "pekar_ground_state",
    "GroundStateResult",
    "ansatz_width",
    "ConvergenceError",
]

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def gaussian_wave(grid: Grid, sigma: float, center=(0.0, 0.0, 0.0), momentum=(0.0, 0.0, 0.0), amplitude=1.0):
    """A exp(-|x-c|^2 / (2 sigma^2)) exp(i k0.x) sampled on the grid.

    The centre must sit on a grid node and 6 sigma must not exceed L/2, which
    keeps the periodic truncation error below about e^{-18}.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if 6 * sigma > grid.L / 2:
        raise ValueError(f"truncation guard violated: 6 sigma = {6 * sigma:g} > L/2 = {grid.L / 2:g}")
    c = np.asarray(center, dtype=float)
    idx = (c + grid.L / 2) / grid.h
    if np.any(np.abs(idx - np.round(idx)) > 1e-9):
        raise ValueError(f"centre {tuple(c)} is not a grid point")
    x1, x2, x3 = grid.coords
    r2 = (x1 - c[0]) ** 2 + (x2 - c[1]) ** 2 + (x3 - c[2]) ** 2
    k0 = np.asarray(momentum, dtype=float)
    phase = np.exp(1j * (k0[0] * x1 + k0[1] * x2 + k0[2] * x3))
    return amplitude * np.exp(-r2 / (2 * sigma**2)) * phase


def gaussian_amplitude_for_mass(sigma: float, target_mass: float) -> float:
    """Amplitude A with A^2 pi^(3/2) sigma^3 = target_mass."""
    return float(np.sqrt(target_mass / (np.pi**1.5 * sigma**3)))


def normalize_mass(u: np.ndarray, grid: Grid, target_mass: float) -> np.ndarray:
    m = mass(u, grid)
    if m == 0:
        raise ValueError("cannot normalize the zero field")
    return u * np.sqrt(target_mass / m)


def potential_rate(U: np.ndarray, grid: Grid) -> np.ndarray:
    """Time derivative V' of V = inv_laplacian(|U|^2) along the Choquard flow.

    Uses d|U|^2/dt = -2 Im(conj(U) Lap U); the potential term drops out
    because it only rotates the phase.
    """
    rate = -2.0 * np.imag(np.conj(U) * laplacian(U, grid))
    return inv_laplacian(rate, grid)


def trig_perturbation(grid: Grid, mode=(1, 0, 0), complex_valued: bool = False) -> np.ndarray:
    """Lowest-frequency trigonometric shape cos(k.x), scaled to unit sup norm."""
    x1, x2, x3 = grid.coords
    k = (2 * np.pi / grid.L) * np.asarray(mode, dtype=float)
    arg = k[0] * x1 + k[1] * x2 + k[2] * x3
    return np.exp(1j * arg) if complex_valued else np.broadcast_to(np.cos(arg), grid.shape).copy()


def random_bandlimited_field(grid: Grid, rng: np.random.Generator, kmax: float, complex_valued: bool = True):
    """Random field with Fourier support in |k| <= kmax and O(1) amplitude."""
    coeffs = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    coeffs[grid.k2 > kmax**2] = 0.0
    f = inverse(coeffs)
    if not complex_valued:
        f = f.real
    scale = np.max(np.abs(f))
    return f / scale if scale > 0 else f


@dataclass
class PreparedData:
    """Coupled initial data (u0, v0, w0) next to the limit data U0, V0.

    ``deficits`` holds ||u0-U0||_{X_s}, ||v0-V0||_{Y_{s-2}} and
    ||v0'-V0'||_{Y_{s-2}} with v0' = w0 / eps.
    """

    u0: np.ndarray
    v0: np.ndarray
    w0: np.ndarray
    U0: np.ndarray
    V0: np.ndarray
    V0_rate: np.ndarray
    eps: float
    mode: str
    deficits: tuple
    s: float = 2.0

    @property
    def composite_deficit(self) -> float:
        """Left side of the initial hypothesis: d_u + d_v + eps d_w."""
        du, dv, dw = self.deficits
        return du + dv + self.eps * dw


def prepared_polaron_data(
    U0: np.ndarray,
    grid: Grid,
    eps: float,
    mode: str = "well",
    delta_u: np.ndarray | None = None,
    delta_v: np.ndarray | None = None,
    w0_rule: str = "rate",
    s: float = 2.0,
) -> PreparedData:
    """Coupled data for the limit data ``U0``.

    ``well``: u0 = U0 + eps du (renormalized to the mass of U0),
    v0 = V0 + eps dv. ``ill``: u0 = U0 + eps du, v0 = V0 + dv, an O(1)
    deficit. ``w0_rule`` is ``"rate"`` (w0 = eps V0') or ``"zero"``.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if mode not in ("well", "ill"):
        raise ValueError(f"mode must be 'well' or 'ill', got {mode!r}")
    if w0_rule not in ("rate", "zero"):
        raise ValueError(f"w0_rule must be 'rate' or 'zero', got {w0_rule!r}")
    U0 = np.asarray(U0, dtype=complex)
    for name, d in (("delta_u", delta_u), ("delta_v", delta_v)):
        if d is not None and np.shape(d) != grid.shape:
            raise ValueError(f"{name} has shape {np.shape(d)}, grid needs {grid.shape}")
    if delta_v is not None and np.iscomplexobj(delta_v):
        raise ValueError("delta_v must be real")
    m0 = mass(U0, grid)
    if m0 <= 0:
        raise ValueError("U0 must have positive mass")

    V0 = hartree_potential(U0, grid)
    V0_rate = potential_rate(U0, grid)
    u0 = U0 if delta_u is None else normalize_mass(U0 + eps * delta_u, grid, m0)
    dv = np.zeros(grid.shape) if delta_v is None else np.asarray(delta_v, dtype=float)
    v0 = V0 + (eps * dv if mode == "well" else dv)
    w0 = eps * V0_rate if w0_rule == "rate" else np.zeros(grid.shape)

    deficits = (
        norm_sobolev(u0 - U0, s, grid),
        norm_y(v0 - V0, s - 2, grid),
        norm_y(w0 / eps - V0_rate, s - 2, grid),
    )
    return PreparedData(u0, v0, w0, U0, V0, V0_rate, eps, mode, deficits, s)


@dataclass
class GroundStateResult:
    U: np.ndarray
    energy: float
    residual: float
    iterations: int
    energies: np.ndarray


def _gs_residual(U: np.ndarray, grid: Grid, target_mass: float) -> tuple[np.ndarray, float, float]:
    """Projected gradient r = H U - mu U with H = -Lap + V, its L2 norm and mu."""
    HU = -laplacian(U, grid) + hartree_potential(U, grid) * U
    mu = grid.cell_volume * np.sum(U * HU) / target_mass
    r = HU - mu * U
    return r, float(np.sqrt(grid.cell_volume * np.sum(r**2))), float(mu)


def ansatz_width(target_mass: float) -> float:
    """Width minimizing the energy over Gaussians of the given mass (whole space)."""
    return 12 * np.pi**1.5 / target_mass


def pekar_ground_state(
    grid: Grid,
    target_mass: float,
    tol: float = 1e-8,
    max_iters: int = 5000,
    sigma0: float | None = None,
) -> GroundStateResult:
    """Minimize the Choquard energy at fixed mass by preconditioned gradient descent.

    The search direction is the projected gradient H U - mu U smoothed by
    (alpha - Lap)^{-1}; each trial is renormalized and accepted if the energy
    does not increase (ties at round-off level are broken by the residual).
    ``tol`` bounds the L2 norm of the projected gradient relative to
    max(|mu|, 1) ||U||. The start is a centred Gaussian, by default of the
    whole-space optimal width clipped to the box; for small masses the
    uniform state can win on the torus and the iteration converges to it.
    """
    if target_mass <= 0:
        raise ValueError(f"mass must be positive, got {target_mass}")
    if sigma0 is None:
        sigma0 = float(np.clip(ansatz_width(target_mass), 2 * grid.h, grid.L / 12))
    U = normalize_mass(np.exp(-grid.r2 / (2 * sigma0**2)), grid, target_mass)

    def energy(f):
        return choquard_energy(ChoquardState(U=f, t=0.0, grid=grid))

    def scaled(res, mu):
        return res / (max(abs(mu), 1.0) * np.sqrt(target_mass))

    E = energy(U)
    energies = [E]
    r, res, mu = _gs_residual(U, grid, target_mass)
    residual = scaled(res, mu)
    tau = 1.0
    it = 0
    while residual > tol and it < max_iters:
        it += 1
        alpha = max(-mu, 1.0)
        d = np.real(inverse(forward(r) / (alpha + grid.k2)))
        while tau > 1e-14:
            trial = normalize_mass(U - tau * d, grid, target_mass)
            E_trial = energy(trial)
            tie = abs(E_trial - E) <= 64 * np.finfo(float).eps * abs(E)
            if E_trial < E or tie:
                r_t, res_t, mu_t = _gs_residual(trial, grid, target_mass)
                if E_trial < E or scaled(res_t, mu_t) < residual:
                    U, E, r, mu = trial, min(E, E_trial), r_t, mu_t
                    residual = scaled(res_t, mu_t)
                    energies.append(E)
                    tau = min(1.5 * tau, 10.0)
                    break
            tau *= 0.5
        else:
            break
    if residual > tol:
        raise ConvergenceError(f"ground state not converged after {it} iterations; residual {residual:.3e}", residual)
    log.info("ground state: %d iterations, E=%.12g, residual=%.3e", it, E, residual)
    return GroundStateResult(U=U.astype(complex), energy=E, residual=residual, iterations=it, energies=np.array(energies))
