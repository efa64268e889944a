"""Periodic 3D grid, spectral transforms and the norms used by the error functionals.

Fields are plain numpy arrays of shape ``(n, n, n)``: real arrays hold scalar
fields (``v``, ``w``, ``V``), complex arrays hold wave functions (``u``, ``U``).
Fourier coefficients follow the convention

    f_hat(k) = n^-3 * sum_x f(x) exp(-i k.x)

so that a plane wave of unit amplitude has a single coefficient of modulus one,
independent of the resolution. Norms carry the box volume ``L^3``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "SpectralWeights",
    "make_grid",
    "forward",
    "inverse",
    "is_real_preserving",
    "apply_fourier_multiplier",
    "laplacian",
    "norm_sobolev",
    "norm_l1",
    "norm_sup",
    "norm_l2",
    "norm_y",
    "mass",
]

# conjugate-symmetry check of a multiplier, relative to max |m|
SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid on the box [-L/2, L/2)^3 with n points per axis.

    The origin is a grid point (index ``n // 2`` on every axis), so localized
    data can be centred exactly on a node.
    """

    n: int
    L: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 8 or self.n % 2:
            raise ValueError(f"n must be even >= 8, got {self.n!r}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"box length L must be positive, got {self.L!r}")

    def __eq__(self, other):
        return isinstance(other, Grid) and self.n == other.n and self.L == other.L

    def __hash__(self):
        return hash((self.n, self.L))

    def __repr__(self):
        return f"Grid(n={self.n}, L={self.L})"

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def volume(self) -> float:
        return self.L**3

    @cached_property
    def x_axis(self) -> np.ndarray:
        return -self.L / 2 + self.h * np.arange(self.n)

    @cached_property
    def k_axis_centered(self) -> np.ndarray:
        """Wavenumbers (2 pi / L) * {-n/2, ..., n/2 - 1} in increasing order."""
        return (2 * np.pi / self.L) * np.arange(-self.n // 2, self.n // 2)

    @cached_property
    def k_axis(self) -> np.ndarray:
        """Same wavenumbers in FFT storage order."""
        return (2 * np.pi / self.L) * np.fft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = self.x_axis
        return (x[:, None, None], x[None, :, None], x[None, None, :])

    @cached_property
    def r2(self) -> np.ndarray:
        x1, x2, x3 = self.coords
        return x1**2 + x2**2 + x3**2

    @cached_property
    def wavevector(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = self.k_axis
        return (k[:, None, None], k[None, :, None], k[None, None, :])

    @cached_property
    def k2(self) -> np.ndarray:
        k1, k2, k3 = self.wavevector
        return np.broadcast_to(k1**2 + k2**2 + k3**2, self.shape).copy()

    @cached_property
    def inv_k2(self) -> np.ndarray:
        """1/|k|^2 with the zero mode set to 0."""
        out = np.zeros(self.shape)
        nz = self.k2 > 0
        out[nz] = 1.0 / self.k2[nz]
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with every |k_j| < (2/3) k_max."""
        kmax = np.pi * self.n / self.L
        keep = np.abs(self.k_axis) < (2.0 / 3.0) * kmax
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    def derivative_symbol(self, axis: int) -> np.ndarray:
        """i k_axis with the Nyquist mode zeroed, so real fields stay real."""
        k = self.k_axis.copy()
        k[self.n // 2] = 0.0
        shape = [1, 1, 1]
        shape[axis] = self.n
        return np.broadcast_to(1j * k.reshape(shape), self.shape).copy()

    def weights(self, s_values=(0.0, 2.0)) -> "SpectralWeights":
        return SpectralWeights.build(self, s_values)


@dataclass(frozen=True)
class SpectralWeights:
    """Per-mode weights rho_s(k) = (1+|k|^2)^(s/2) and sigma_s(k) = |k|^s."""

    rho: dict
    sigma: dict

    @classmethod
    def build(cls, grid: Grid, s_values) -> "SpectralWeights":
        k2 = grid.k2
        rho = {float(s): (1.0 + k2) ** (s / 2.0) for s in s_values}
        sigma = {float(s): np.sqrt(k2) ** s if s > 0 else (k2 > 0).astype(float) for s in s_values}
        return cls(rho=rho, sigma=sigma)


def make_grid(n: int, L: float) -> Grid:
    """Build a periodic grid; rejects odd or too small ``n`` and nonpositive ``L``."""
    return Grid(n=n, L=float(L))


def _check_shape(f: np.ndarray, grid: Grid) -> None:
    if f.shape != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape}")


def forward(f: np.ndarray) -> np.ndarray:
    """Normalized forward transform n^-3 * sum f(x) e^{-ik.x}."""
    return sfft.fftn(f, norm="forward")


def inverse(f_hat: np.ndarray) -> np.ndarray:
    return sfft.ifftn(f_hat, norm="forward")


def _reflect(m: np.ndarray) -> np.ndarray:
    """Table of m(-k) in FFT storage order."""
    return np.roll(np.flip(m), 1, axis=(0, 1, 2))


def is_real_preserving(m: np.ndarray) -> bool:
    scale = np.max(np.abs(m)) if m.size else 0.0
    if scale == 0.0:
        return True
    return bool(np.max(np.abs(_reflect(m) - np.conj(m))) <= SYMMETRY_RTOL * scale)


def apply_fourier_multiplier(f: np.ndarray, m) -> np.ndarray:
    """Return inverse(m * forward(f)).

    Real input yields real output; this requires ``m(-k) == conj(m(k))`` and a
    ``ValueError`` is raised otherwise. A scalar ``m`` is broadcast to all modes.
    """
    m = np.asarray(m)
    if m.ndim and m.shape != f.shape:
        raise ValueError(f"multiplier shape {m.shape} does not match field {f.shape}")
    real_out = not np.iscomplexobj(f)
    if real_out and m.ndim and np.iscomplexobj(m) and not is_real_preserving(m):
        raise ValueError("multiplier violates m(-k) = conj(m(k)); cannot map a real field to a real field")
    out = inverse(m * forward(f))
    return out.real.copy() if real_out else out


def laplacian(f: np.ndarray, grid: Grid) -> np.ndarray:
    return apply_fourier_multiplier(f, -grid.k2)


def norm_sobolev(f: np.ndarray, s: float, grid: Grid) -> float:
    """X_s norm ( L^3 sum_k (1+|k|^2)^s |f_hat(k)|^2 )^(1/2)."""
    if s < 0:
        raise ValueError(f"Sobolev index must be nonnegative, got {s}")
    _check_shape(f, grid)
    power = np.abs(forward(f)) ** 2
    if s != 0:
        power = power * (1.0 + grid.k2) ** s
    return float(np.sqrt(grid.volume * power.sum()))


def norm_l2(f: np.ndarray, grid: Grid) -> float:
    """Direct quadrature (h^3 sum |f|^2)^(1/2)."""
    return float(np.sqrt(grid.cell_volume * np.sum(np.abs(f) ** 2)))


def mass(u: np.ndarray, grid: Grid) -> float:
    """h^3 sum |u|^2."""
    return float(grid.cell_volume * np.sum(np.abs(u) ** 2))


def norm_l1(f: np.ndarray, grid: Grid) -> float:
    return float(grid.cell_volume * np.sum(np.abs(f)))


def norm_sup(f: np.ndarray, grid: Grid | None = None) -> float:
    return float(np.max(np.abs(f))) if f.size else 0.0


def norm_y(v: np.ndarray, s: float, grid: Grid) -> float:
    """Y_s norm: sup|v| + ||Lap v||_{X_s} + ||Lap v||_{L^1}."""
    if s < 0:
        raise ValueError(f"Sobolev index must be nonnegative, got {s}")
    lap = laplacian(v, grid)
    return norm_sup(v) + norm_sobolev(lap, s, grid) + norm_l1(lap, grid)
