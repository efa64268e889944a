import numpy as np
import pytest

from mfpolaron.choquard import (
    ChoquardState,
    choquard_energy,
    choquard_integrate,
    choquard_step,
    default_dt,
    mild_residual_choquard,
)
from mfpolaron.fields import make_grid, mass, norm_sobolev
from mfpolaron.operators import hartree_potential
from mfpolaron.trajectory import BlowupError

from helpers import observed_order, unit_gaussian, xs

TWO_PI = 2 * np.pi


def final(U0, g, T, dt):
    return choquard_integrate(U0, g, T, dt, observer_stride=int(round(T / dt))).fields["U"][-1]


def test_default_dt():
    assert default_dt(make_grid(32, TWO_PI)) == pytest.approx(1e-3)
    assert default_dt(make_grid(32, 16.0)) == pytest.approx(1e-3 * (16 / TWO_PI) ** 2)


def test_plane_wave_exact_for_any_dt(grid2pi):
    f = (2 * np.exp(1j * grid2pi.coords[0]) + 0 * grid2pi.r2).astype(complex)
    for dt in (0.5, 0.1):
        traj = choquard_integrate(f, grid2pi, 1.0, dt)
        assert np.max(np.abs(traj.fields["U"][-1] - np.exp(-1j) * f)) <= 1e-12
        assert np.ptp(traj.series["Xs_norm"]) <= 1e-12 * traj.series["Xs_norm"][0]
    assert choquard_energy(ChoquardState(f, 0.0, grid2pi)) == pytest.approx(4 * TWO_PI**3, rel=1e-12)


def test_zero_data_is_fixed(grid2pi):
    z = np.zeros(grid2pi.shape, complex)
    traj = choquard_integrate(z, grid2pi, 0.2, 0.05)
    assert np.all(traj.fields["U"] == 0)
    assert choquard_energy(ChoquardState(z, 0.0, grid2pi)) == 0.0
    assert mild_residual_choquard(traj) == 0.0


def test_step_advances_time_and_keeps_mass():
    g, U0 = unit_gaussian()
    st = choquard_step(ChoquardState(U0, 0.0, g), 0.01)
    assert st.t == pytest.approx(0.01)
    assert abs(mass(st.U, g) - mass(U0, g)) <= 1e-13 * mass(U0, g)


def test_nonfinite_field_raises(grid2pi):
    bad = np.ones(grid2pi.shape, complex)
    bad[0, 0, 0] = np.nan
    with pytest.raises(BlowupError):
        choquard_step(ChoquardState(bad, 0.0, grid2pi), 0.1)


def test_ceiling_reports_partial_trajectory(grid2pi):
    f = (np.exp(1j * grid2pi.coords[0]) + 0 * grid2pi.r2).astype(complex)
    with pytest.raises(BlowupError) as info:
        choquard_integrate(f, grid2pi, 1.0, 0.1, ceiling=1.0)
    assert info.value.t == pytest.approx(0.1)
    assert len(info.value.trajectory.times) == 2


def test_self_convergence_order():
    g, U0 = unit_gaussian(momentum=(1.0, 0.0, 0.0), target_mass=20.0)
    T, dt = 0.4, 0.04
    a, b, c = (final(U0, g, T, h) for h in (dt, dt / 2, dt / 4))
    p = observed_order(a, b, c, xs(g))
    assert 1.8 <= p <= 2.2, p


def test_conservation_at_default_dt():
    g, U0 = unit_gaussian()
    drifts = []
    for dt in (default_dt(g), default_dt(g) / 2):
        n = int(round(1.0 / dt))
        traj = choquard_integrate(U0, g, 1.0, 1.0 / n, observer_stride=n // 10 if n % 10 == 0 else 1, store_fields=False)
        M, E = traj.series["mass"], traj.series["energy"]
        assert np.max(np.abs(M - M[0])) <= 1e-9 * M[0]
        drifts.append(np.max(np.abs(E - E[0])) / abs(E[0]))
    assert drifts[0] <= 1e-6
    assert drifts[0] >= 3 * drifts[1]


def test_energy_drift_at_millisecond_step():
    g, U0 = unit_gaussian()
    traj = choquard_integrate(U0, g, 1.0, 1e-3, observer_stride=50, store_fields=False)
    E = traj.series["energy"]
    assert np.max(np.abs(E - E[0])) / abs(E[0]) <= 1e-6


def test_time_reversibility():
    g, U0 = unit_gaussian(momentum=(0.5, 0.0, 0.0), target_mass=20.0)
    st = ChoquardState(U0, 0.0, g)
    for _ in range(50):
        st = choquard_step(st, 0.02)
    for _ in range(50):
        st = choquard_step(st, -0.02)
    assert np.max(np.abs(st.U - U0)) <= 1e-8


def test_gauge_covariance():
    g, U0 = unit_gaussian(target_mass=20.0)
    phase = np.exp(0.7j)
    a = choquard_integrate(U0, g, 0.2, 0.02)
    b = choquard_integrate(phase * U0, g, 0.2, 0.02)
    assert np.max(np.abs(b.fields["U"] - phase * a.fields["U"])) <= 1e-12
    for key in ("mass", "Xs_norm", "energy"):
        assert np.allclose(a.series[key], b.series[key], rtol=1e-12, atol=0)


def test_mild_residual_linear_run():
    # the X_2 weights amplify transform round-off in the top modes, so the
    # absolute bound is checked on a coarse grid
    g = make_grid(16, TWO_PI)
    f = (np.exp(1j * g.coords[0]) + 0 * g.r2).astype(complex)
    traj = choquard_integrate(f, g, 1.0, 0.05)
    assert mild_residual_choquard(traj) <= 1e-12


def test_mild_residual_order_two():
    g, U0 = unit_gaussian(target_mass=20.0)
    res = []
    for h in (0.02, 0.01, 0.005):
        # integrator steps four times finer than the sampling step
        traj = choquard_integrate(U0, g, 0.4, h / 4, observer_stride=4)
        res.append(mild_residual_choquard(traj))
    assert res[0] / res[1] >= 3.5 and res[1] / res[2] >= 3.5, res


def test_mild_residual_rejects_sparse_sampling():
    g, U0 = unit_gaussian()
    traj = choquard_integrate(U0, g, 1.0, 0.25)
    with pytest.raises(ValueError, match="too sparse"):
        mild_residual_choquard(traj)


def test_hartree_of_run_is_mean_zero():
    g, U0 = unit_gaussian()
    traj = choquard_integrate(U0, g, 0.1, 0.05)
    for U in traj.fields["U"]:
        assert abs(hartree_potential(U, g).mean()) <= 1e-15
    assert traj.is_uniform() and norm_sobolev(traj.fields["U"][-1], 2, g) > 0
