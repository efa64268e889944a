"""Analytic-oracle checks runnable from the command line."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fields
from .analysis import SweepRecord, fit_slope, resonance_gap
from .choquard import ChoquardState, choquard_energy, choquard_integrate
from .fields import make_grid, norm_l1, norm_sobolev, norm_sup, norm_y
from .initdata import gaussian_wave
from .operators import free_flow, hartree_potential, inv_laplacian, lambda_rotate, phase_kick
from .oracles import free_gaussian_evolution, gaussian_density, gaussian_potential_periodic
from .polaron import PolaronState, polaron_energy, polaron_integrate

__all__ = ["CheckResult", "run_selftest", "CHECKS"]

N = 32
TWO_PI = 2 * np.pi


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


class _Context:
    def __init__(self, corrupt=()):
        self.corrupt = set(corrupt)

    def multiplier(self, f, m):
        if "multiplier" in self.corrupt:
            m = np.asarray(m) * (1 + 1e-3)
        return fields.apply_fourier_multiplier(f, m)


def _rel(a, b):
    return abs(a - b) / abs(b)


def check_grid_tables(ctx):
    g = make_grid(8, TWO_PI)
    assert np.array_equal(g.k_axis_centered, np.arange(-4, 4)), g.k_axis_centered
    g = make_grid(16, 16.0)
    assert g.h == 1.0 and g.cell_volume == 1.0
    try:
        make_grid(7, 1.0)
    except ValueError:
        return "tables ok, odd n rejected"
    raise AssertionError("n=7 accepted")


def check_multiplier_identity(ctx):
    g = make_grid(N, 16.0)
    f = np.random.default_rng(1).standard_normal(g.shape)
    err = np.max(np.abs(ctx.multiplier(f, np.ones(g.shape)) - f)) / np.max(np.abs(f))
    assert err <= 1e-12, f"round trip error {err:.2e}"
    return f"rel err {err:.1e}"


def check_multiplier_laplacian(ctx):
    g = make_grid(N, TWO_PI)
    x1 = g.coords[0]
    f = np.broadcast_to(np.exp(1j * x1), g.shape)
    err = np.max(np.abs(ctx.multiplier(f, -g.k2) + f))
    assert err <= 1e-12, f"error {err:.2e}"
    return f"err {err:.1e}"


def check_multiplier_derivative(ctx):
    g = make_grid(N, TWO_PI)
    x1 = g.coords[0]
    f = np.broadcast_to(np.cos(x1), g.shape).copy()
    err = np.max(np.abs(ctx.multiplier(f, g.derivative_symbol(0)) + np.sin(x1)))
    assert err <= 1e-12, f"error {err:.2e}"
    return f"err {err:.1e}"


def check_sobolev_plane_wave(ctx):
    g = make_grid(N, TWO_PI)
    f = np.broadcast_to(np.exp(1j * g.coords[0]), g.shape)
    val = norm_sobolev(f, 2, g)
    assert _rel(val, 2 * TWO_PI**1.5) <= 1e-12
    return f"{val:.12g}"


def check_gaussian_norms(ctx):
    g = make_grid(N, 16.0)
    f = gaussian_wave(g, 1.0)
    m = norm_sobolev(f, 0, g) ** 2
    l1 = norm_l1(f, g)
    assert _rel(m, np.pi**1.5) <= 1e-8, f"mass {m}"
    assert _rel(l1, TWO_PI**1.5) <= 1e-8, f"L1 {l1}"
    assert norm_sup(2 * f) == 2.0
    return f"mass rel err {_rel(m, np.pi**1.5):.1e}"


def check_l1_cosine(ctx):
    g = make_grid(64, TWO_PI)
    f = np.broadcast_to(np.cos(g.coords[0]), g.shape)
    err = _rel(norm_l1(f, g), 4 * TWO_PI**2)
    assert err <= 1e-3, f"rel err {err:.2e}"
    return f"rel err {err:.1e}"


def check_norm_y_cosine(ctx):
    g = make_grid(64, TWO_PI)
    v = np.broadcast_to(np.cos(g.coords[0]), g.shape).copy()
    expected = 1 + TWO_PI**1.5 / np.sqrt(2) + 4 * TWO_PI**2
    err = _rel(norm_y(v, 0, g), expected)
    assert err <= 1e-3, f"rel err {err:.2e}"
    return f"rel err {err:.1e}"


def check_inv_laplacian_cosine(ctx):
    g = make_grid(N, TWO_PI)
    c = np.broadcast_to(np.cos(g.coords[0]), g.shape).copy()
    err = np.max(np.abs(inv_laplacian(c, g) + c))
    assert err <= 1e-12
    return f"err {err:.1e}"


def check_inv_laplacian_gaussian(ctx):
    g = make_grid(N, 16.0)
    rho = gaussian_density(g, 1.0)
    err = np.max(np.abs(inv_laplacian(rho, g) - gaussian_potential_periodic(g, 1.0)))
    assert err <= 1e-6, f"sup err {err:.2e}"
    return f"sup err {err:.1e}"


def check_hartree_plane_wave(ctx):
    g = make_grid(N, TWO_PI)
    u = np.broadcast_to(3 * np.exp(1j * g.coords[0]), g.shape)
    err = np.max(np.abs(hartree_potential(u, g)))
    assert err <= 1e-12
    return f"max |V| {err:.1e}"


def check_free_flow(ctx):
    g = make_grid(N, TWO_PI)
    f = np.broadcast_to(np.exp(1j * g.coords[0]), g.shape)
    err1 = np.max(np.abs(free_flow(f, g, 0.7) - np.exp(-0.7j) * f))
    g = make_grid(N, 16.0)
    u0 = gaussian_wave(g, 1.0)
    err2 = np.max(np.abs(free_flow(u0, g, 0.5) - free_gaussian_evolution(g, 1.0, 0.5)))
    # n = 32 leaves a 2e-10 aliasing residue; the acceptance run uses n = 64
    assert err1 <= 1e-12 and err2 <= 1e-8, (err1, err2)
    return f"plane {err1:.1e}, gaussian {err2:.1e}"


def check_rotation(ctx):
    one, zero = np.ones(4), np.zeros(4)
    v, w = lambda_rotate(one, zero, np.pi / 2)
    assert np.max(np.abs(v)) <= 1e-15 and np.max(np.abs(w + 1)) <= 1e-15
    v, w = lambda_rotate(one, zero, TWO_PI)
    assert np.max(np.abs(v - 1)) <= 1e-14 and np.max(np.abs(w)) <= 1e-14
    return "quarter turn and period ok"


def check_phase_kick(ctx):
    g = make_grid(N, TWO_PI)
    rng = np.random.default_rng(2)
    u = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    v = rng.standard_normal(g.shape)
    err = np.max(np.abs(np.abs(phase_kick(u, v, 0.3)) - np.abs(u)))
    assert err <= 1e-14
    return f"modulus err {err:.1e}"


def check_choquard_plane_wave(ctx):
    g = make_grid(N, TWO_PI)
    f = np.broadcast_to(2 * np.exp(1j * g.coords[0]), g.shape).astype(complex)
    traj = choquard_integrate(f, g, 1.0, 0.1, observer_stride=10)
    err = np.max(np.abs(traj.fields["U"][-1] - np.exp(-1j) * f))
    E = choquard_energy(ChoquardState(U=f, t=0.0, grid=g))
    assert err <= 1e-12 and _rel(E, 4 * TWO_PI**3) <= 1e-12, (err, E)
    return f"trajectory err {err:.1e}"


def check_polaron_rotation(ctx):
    g = make_grid(N, TWO_PI)
    c = np.broadcast_to(np.cos(g.coords[0]), g.shape).copy()
    eps, T = 0.1, 0.5
    traj = polaron_integrate(np.zeros(g.shape), c, np.zeros(g.shape), eps, g, T, 0.01, observer_stride=50)
    v, w = traj.fields["v"][-1], traj.fields["w"][-1]
    err = max(np.max(np.abs(v - np.cos(T / eps) * c)), np.max(np.abs(w + np.sin(T / eps) * c)))
    E = polaron_energy(PolaronState(np.zeros(g.shape, complex), c, np.zeros(g.shape), 0.0, eps, g))
    assert err <= 1e-12 and _rel(E, TWO_PI**3 / 4) <= 1e-12, (err, E)
    return f"rotation err {err:.1e}"


def check_resonance(ctx):
    res = resonance_gap(0.2, 3)
    assert res.gap == 0.0, res
    assert abs(resonance_gap(2.0, 3).gap - 0.5) <= 1e-15
    return f"attained at k={res.k}, l={res.l}, sign={res.sign:+d}"


def check_slope_fit(ctx):
    recs = [SweepRecord(e, 0.7 * e, 1.0, True, 0.0, 0.0) for e in (0.1, 0.05, 0.025)]
    fit = fit_slope(recs)
    assert abs(fit.slope - 1) <= 1e-12 and fit.residual <= 1e-12
    return f"slope {fit.slope:.12g}"


CHECKS = [
    ("grid_tables", check_grid_tables),
    ("multiplier_identity", check_multiplier_identity),
    ("multiplier_laplacian_plane_wave", check_multiplier_laplacian),
    ("multiplier_derivative_cosine", check_multiplier_derivative),
    ("sobolev_plane_wave", check_sobolev_plane_wave),
    ("gaussian_norms", check_gaussian_norms),
    ("l1_cosine", check_l1_cosine),
    ("norm_y_cosine", check_norm_y_cosine),
    ("inv_laplacian_cosine", check_inv_laplacian_cosine),
    ("inv_laplacian_gaussian", check_inv_laplacian_gaussian),
    ("hartree_plane_wave", check_hartree_plane_wave),
    ("free_flow", check_free_flow),
    ("rotation", check_rotation),
    ("phase_kick", check_phase_kick),
    ("choquard_plane_wave", check_choquard_plane_wave),
    ("polaron_rotation", check_polaron_rotation),
    ("resonance_gap", check_resonance),
    ("slope_fit", check_slope_fit),
]


def run_selftest(corrupt=(), only=None) -> list[CheckResult]:
    """Run every check; ``corrupt`` injects faults (``"multiplier"``) for testing the harness."""
    ctx = _Context(corrupt)
    results = []
    for name, fn in CHECKS:
        if only is not None and name not in only:
            continue
        try:
            detail = fn(ctx) or ""
            results.append(CheckResult(name, True, detail))
        except Exception as exc:  # a failing check must not stop the others
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
    return results
