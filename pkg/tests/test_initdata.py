import numpy as np
import pytest

from mfpolaron.choquard import ChoquardState, choquard_energy, choquard_integrate, choquard_step
from mfpolaron.fields import make_grid, mass, norm_sobolev, norm_y
from mfpolaron.initdata import (
    ConvergenceError,
    gaussian_amplitude_for_mass,
    gaussian_wave,
    normalize_mass,
    pekar_ground_state,
    potential_rate,
    prepared_polaron_data,
    random_bandlimited_field,
    trig_perturbation,
)
from mfpolaron.operators import hartree_potential

from helpers import unit_gaussian

TWO_PI = 2 * np.pi


def test_gaussian_wave_basics(grid16):
    assert np.all(gaussian_wave(grid16, 1.0, amplitude=0.0) == 0)
    f = gaussian_wave(grid16, 1.0)
    assert np.max(np.abs(f.imag)) == 0 and f.real.min() > 0
    assert f.real.max() == 1.0 and f[16, 16, 16] == 1.0
    assert mass(f, grid16) == pytest.approx(np.pi**1.5, rel=1e-8)
    A = gaussian_amplitude_for_mass(1.0, 1.0)
    assert mass(A * f, grid16) == pytest.approx(1.0, rel=1e-8)


def test_gaussian_wave_guards(grid16):
    with pytest.raises(ValueError, match="truncation"):
        gaussian_wave(grid16, 1.5)
    with pytest.raises(ValueError, match="grid point"):
        gaussian_wave(grid16, 1.0, center=(0.25, 0.0, 0.0))
    with pytest.raises(ValueError):
        gaussian_wave(grid16, -1.0)
    off = gaussian_wave(grid16, 1.0, center=(1.0, -2.0, 0.0))
    assert off[18, 12, 16] == 1.0


def test_normalize_mass(grid16, rng):
    f = gaussian_wave(grid16, 1.0)
    g = normalize_mass(f, grid16, mass(f, grid16))
    assert np.max(np.abs(g - f)) <= 1e-15
    assert np.max(np.abs(normalize_mass(2 * f, grid16, mass(f, grid16)) - f)) <= 1e-15
    r = rng.standard_normal(grid16.shape) + 1j * rng.standard_normal(grid16.shape)
    assert mass(normalize_mass(r, grid16, 3.0), grid16) == pytest.approx(3.0, rel=1e-12)
    with pytest.raises(ValueError):
        normalize_mass(np.zeros(grid16.shape), grid16, 1.0)


def test_perturbation_shapes(grid16, rng):
    c = trig_perturbation(grid16)
    assert np.isrealobj(c) and np.max(np.abs(c)) == pytest.approx(1.0)
    f = random_bandlimited_field(grid16, rng, kmax=1.0)
    assert np.iscomplexobj(f) and np.max(np.abs(f)) == pytest.approx(1.0)
    assert np.isrealobj(random_bandlimited_field(grid16, rng, kmax=1.0, complex_valued=False))


def test_zero_perturbation_well_prepared():
    g, U0 = unit_gaussian(momentum=(1.0, 0.0, 0.0))
    d = prepared_polaron_data(U0, g, 0.1)
    # w0 / eps - V0' only vanishes up to the rounding of the division
    assert d.deficits[:2] == (0.0, 0.0) and d.deficits[2] <= 1e-13
    assert np.max(np.abs(d.w0 - 0.1 * potential_rate(U0, g))) == 0.0
    assert np.max(np.abs(d.v0 - hartree_potential(U0, g))) == 0.0
    assert d.composite_deficit <= 1e-14


def test_ill_prepared_deficit_independent_of_eps():
    g = make_grid(32, TWO_PI)
    U0 = normalize_mass(gaussian_wave(g, 0.5), g, 1.0)
    dv = 0.5 * np.cos(g.coords[0]) + 0 * g.r2
    expected = 0.5 * norm_y(np.cos(g.coords[0]) + 0 * g.r2, 0, g)
    for eps in (0.1, 0.05):
        d = prepared_polaron_data(U0, g, eps, mode="ill", delta_v=dv)
        assert d.deficits[1] == pytest.approx(expected, rel=1e-12)


def test_well_prepared_deficits_linear_in_eps(rng):
    g, U0 = unit_gaussian(momentum=(1.0, 0.0, 0.0))
    # a localized shape orthogonal to U0 in the real pairing
    du = 1j * np.sin(g.coords[0] * 2 * np.pi / g.L) * U0
    dv = trig_perturbation(g, mode=(0, 1, 0))
    a = prepared_polaron_data(U0, g, 0.05, delta_u=du, delta_v=dv)
    b = prepared_polaron_data(U0, g, 0.1, delta_u=du, delta_v=dv)
    assert b.deficits[1] / a.deficits[1] == pytest.approx(2.0, abs=1e-6)
    # mass renormalization makes the u deficit affine only to first order
    assert b.deficits[0] / a.deficits[0] == pytest.approx(2.0, rel=1e-2)
    for d in (a, b):
        assert mass(d.u0, g) == pytest.approx(mass(U0, g), rel=1e-14)


def test_w0_rule_zero():
    g, U0 = unit_gaussian(momentum=(1.0, 0.0, 0.0))
    d = prepared_polaron_data(U0, g, 0.1, w0_rule="zero")
    assert np.all(d.w0 == 0)
    assert d.deficits[2] == pytest.approx(norm_y(potential_rate(U0, g), 0, g))


def test_prepared_data_errors(grid16):
    U0 = gaussian_wave(grid16, 1.0)
    with pytest.raises(ValueError):
        prepared_polaron_data(U0, grid16, 0.0)
    with pytest.raises(ValueError):
        prepared_polaron_data(U0, grid16, 0.1, mode="medium")
    with pytest.raises(ValueError, match="shape"):
        prepared_polaron_data(U0, grid16, 0.1, delta_u=np.zeros((8, 8, 8)))
    with pytest.raises(ValueError, match="real"):
        prepared_polaron_data(U0, grid16, 0.1, delta_v=np.zeros(grid16.shape, complex))


def test_potential_rate_matches_time_difference():
    g, U0 = unit_gaussian(momentum=(1.0, 0.0, 0.0), target_mass=20.0)
    rate = potential_rate(U0, g)
    V0 = hartree_potential(U0, g)
    scale = norm_y(rate, 0, g)
    one_sided, centred = [], []
    for h in (2e-3, 1e-3):
        fwd = ChoquardState(U0, 0.0, g)
        bwd = ChoquardState(U0, 0.0, g)
        for _ in range(8):
            fwd = choquard_step(fwd, h / 8)
            bwd = choquard_step(bwd, -h / 8)
        Vf, Vb = hartree_potential(fwd.U, g), hartree_potential(bwd.U, g)
        one_sided.append(norm_y(rate - (Vf - V0) / h, 0, g))
        centred.append(norm_y(rate - (Vf - Vb) / (2 * h), 0, g))
    # O(h) forward difference, O(h^2) centred difference
    assert 1.8 <= one_sided[0] / one_sided[1] <= 2.2
    assert centred[0] / centred[1] >= 3.0
    assert centred[1] <= 1e-4 * scale


@pytest.fixture(scope="module")
def ground_state_pair():
    a = pekar_ground_state(make_grid(32, 16.0), 60.0, tol=1e-9)
    b = pekar_ground_state(make_grid(64, 16.0), 60.0, tol=1e-9)
    return a, b


def test_ground_state_properties(ground_state_pair):
    gs, _ = ground_state_pair
    g = make_grid(32, 16.0)
    U = gs.U
    assert np.max(np.abs(U.imag)) == 0 and U.real.min() > 0
    assert mass(U, g) == pytest.approx(60.0, rel=1e-12)
    assert np.all(np.diff(gs.energies) <= 0)
    assert gs.energies[-1] < gs.energies[0]
    c = g.n // 2
    for profile in (U.real[c:, c, c], U.real[c, c:, c], U.real[c, c, c:]):
        assert np.all(np.diff(profile) < 0)
    assert gs.energy == pytest.approx(choquard_energy(ChoquardState(U, 0.0, g)), rel=1e-14)


def test_ground_state_grid_refinement(ground_state_pair):
    a, b = ground_state_pair
    assert abs(a.energy - b.energy) <= 1e-4 * abs(b.energy)


def test_ground_state_is_stationary(ground_state_pair):
    gs, _ = ground_state_pair
    g = make_grid(32, 16.0)
    # a stationary state only rotates its phase under the Choquard flow
    traj = choquard_integrate(gs.U, g, 0.05, 0.001, observer_stride=50)
    U1 = traj.fields["U"][-1]
    phase = np.vdot(gs.U, U1) / np.vdot(gs.U, gs.U)
    drift = norm_sobolev(U1 - phase * gs.U, 0, g) / norm_sobolev(gs.U, 0, g)
    assert drift <= 1e-5


def test_ground_state_nonconvergence_reported():
    with pytest.raises(ConvergenceError) as info:
        pekar_ground_state(make_grid(16, 16.0), 60.0, tol=1e-12, max_iters=2)
    assert info.value.residual > 1e-12
    with pytest.raises(ValueError):
        pekar_ground_state(make_grid(16, 16.0), 0.0)
