"""Strang split-step integrator for i U_t = -Lap U + (inv_laplacian |U|^2) U."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .fields import Grid, forward, mass, norm_sobolev
from .operators import free_flow, hartree_potential, phase_kick
from .trajectory import BlowupError, Trajectory, step_count

__all__ = [
    "ChoquardState",
    "choquard_step",
    "choquard_integrate",
    "choquard_energy",
    "mild_residual_choquard",
    "default_dt",
    "effective_bandwidth",
]

DEFAULT_CEILING = 1e6


@dataclass(frozen=True)
class ChoquardState:
    U: np.ndarray
    t: float
    grid: Grid


def default_dt(grid: Grid) -> float:
    """Base step 1e-3 (L / 2 pi)^2."""
    return 1e-3 * (grid.L / (2 * np.pi)) ** 2


def choquard_step(state: ChoquardState, dt: float, dealiased: bool = False) -> ChoquardState:
    """One Strang step: half free flow, potential kick over dt, half free flow.

    The potential is evaluated once, on the field after the first half step;
    the kick leaves |U| unchanged so it is the exact flow of that substep.
    A negative ``dt`` steps backwards.
    """
    if dt == 0:
        raise ValueError("time step must be nonzero")
    grid = state.grid
    U = free_flow(state.U, grid, dt / 2)
    V = hartree_potential(U, grid, dealiased)
    U = phase_kick(U, V, dt)
    U = free_flow(U, grid, dt / 2)
    t = state.t + dt
    if not np.all(np.isfinite(U)):
        raise BlowupError(f"blowup/instability detected at t={t:.6g}", t=t)
    return ChoquardState(U=U, t=t, grid=grid)


def choquard_energy(state: ChoquardState) -> float:
    """Conserved functional int |grad U|^2 + 1/2 int V |U|^2."""
    grid = state.grid
    U = state.U
    kinetic = grid.volume * np.sum(grid.k2 * np.abs(forward(U)) ** 2)
    V = hartree_potential(U, grid)
    potential = 0.5 * grid.cell_volume * np.sum(V * np.abs(U) ** 2)
    return float(kinetic + potential)


def choquard_integrate(
    U0: np.ndarray,
    grid: Grid,
    T: float,
    dt: float,
    observer_stride: int = 1,
    s: float = 2.0,
    ceiling: float = DEFAULT_CEILING,
    dealiased: bool = False,
    store_fields: bool = True,
) -> Trajectory:
    """Integrate to time ``T`` with step ``dt``, sampling every ``observer_stride`` steps.

    Records ``mass``, ``Xs_norm`` and ``energy`` at every sample. Raises
    :class:`BlowupError` (with the partial trajectory attached) on nonfinite
    values or when the X_s norm exceeds ``ceiling``.
    """
    nsteps = step_count(T, dt)
    if observer_stride < 1 or nsteps % observer_stride:
        raise ValueError(f"observer_stride={observer_stride} must divide the step count {nsteps}")
    state = ChoquardState(U=np.asarray(U0, dtype=complex), t=0.0, grid=grid)
    times, snaps = [], []
    series = {"mass": [], "Xs_norm": [], "energy": []}

    def observe(st):
        times.append(st.t)
        if store_fields:
            snaps.append(st.U)
        series["mass"].append(mass(st.U, grid))
        series["Xs_norm"].append(norm_sobolev(st.U, s, grid))
        series["energy"].append(choquard_energy(st))

    def partial():
        return _pack(grid, times, snaps, series, dt, s)

    observe(state)
    for i in range(1, nsteps + 1):
        try:
            state = choquard_step(state, dt, dealiased)
        except BlowupError as exc:
            exc.trajectory = partial()
            raise
        # exact sample times, free of accumulated round-off
        state = replace(state, t=i * dt)
        if i % observer_stride == 0:
            observe(state)
            if series["Xs_norm"][-1] > ceiling:
                raise BlowupError(
                    f"norm ceiling {ceiling:g} exceeded at t={state.t:.6g}", t=state.t, trajectory=partial()
                )
    return partial()


def _pack(grid, times, snaps, series, dt, s) -> Trajectory:
    fields = {"U": np.array(snaps)} if snaps else {}
    return Trajectory(
        grid=grid,
        times=np.array(times),
        fields=fields,
        series={k: np.array(v) for k, v in series.items()},
        dt=dt,
        s=s,
    )


def effective_bandwidth(f_hat: np.ndarray, grid: Grid, rel: float = 1e-10) -> float:
    """Largest |k|^2 among modes carrying more than ``rel`` of the peak amplitude."""
    amp = np.abs(f_hat)
    peak = amp.max()
    if peak == 0:
        return 0.0
    return float(grid.k2[amp > rel * peak].max())


def _check_sampling(traj: Trajectory, rate: float) -> float:
    if len(traj) < 3:
        raise ValueError("mild residual needs at least 3 samples")
    if not traj.is_uniform():
        raise ValueError("mild residual needs uniformly spaced samples")
    h = traj.sample_step
    if h * rate > np.pi:
        raise ValueError(
            f"sampling step {h:g} too sparse: fastest resolved phase advances {h * rate:.3g} rad per sample"
        )
    return h


def mild_residual_choquard(traj: Trajectory, s: float | None = None) -> float:
    """Max over samples of the X_s norm of the Duhamel-formula residual.

    U(t) - e^{i Lap t} U0 + i int_0^t e^{i Lap (t-r)} U(r) V(r) dr, with the
    integral done by the trapezoid rule in the interaction picture.
    """
    grid = traj.grid
    s = traj.s if s is None else s
    U = traj.fields["U"]
    t = traj.times
    U_hat = np.array([forward(Uj) for Uj in U])
    if not np.any(U_hat[0]):
        return 0.0
    _check_sampling(traj, effective_bandwidth(U_hat[0], grid))
    k2 = grid.k2
    g = np.empty_like(U_hat)
    for j, Uj in enumerate(U):
        g[j] = np.exp(1j * k2 * t[j]) * forward(Uj * hartree_potential(Uj, grid))
    integral = cumulative_trapezoid(g, t, axis=0, initial=0)
    weight = grid.volume * (1.0 + k2) ** s
    worst = 0.0
    for j in range(len(t)):
        phase = np.exp(-1j * k2 * t[j])
        res = U_hat[j] - phase * U_hat[0] + 1j * phase * integral[j]
        worst = max(worst, float(np.sqrt(np.sum(weight * np.abs(res) ** 2))))
    return worst
