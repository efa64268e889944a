"""Scaled approximation errors, epsilon sweeps and empirical estimate constants."""

from __future__ import annotations

import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .choquard import choquard_integrate
from .config import ExperimentConfig
from .fields import Grid, make_grid, norm_l1, norm_sobolev, norm_y
from .initdata import (
    gaussian_amplitude_for_mass,
    gaussian_wave,
    normalize_mass,
    pekar_ground_state,
    potential_rate,
    prepared_polaron_data,
    random_bandlimited_field,
    trig_perturbation,
)
from .operators import hartree_potential, inv_laplacian
from .polaron import polaron_integrate, resolve_dt
from .trajectory import BlowupError, Trajectory

__all__ = [
    "ErrorSeries",
    "SweepRecord",
    "SweepResult",
    "SlopeFit",
    "ResonanceGap",
    "ProductConstants",
    "scaled_errors",
    "error_forcings",
    "forcing_constants",
    "sweep_epsilon",
    "fit_slope",
    "resonance_gap",
    "product_constant_probe",
    "build_initial_field",
    "build_prepared_data",
    "choquard_reference",
]

log = logging.getLogger(__name__)


@dataclass
class ErrorSeries:
    """Per-sample norms of R_u, R_v, R_w and their running suprema."""

    eps: float
    times: np.ndarray
    Ru: np.ndarray
    Rv: np.ndarray
    Rw: np.ndarray
    S_u: np.ndarray
    S_vw: np.ndarray
    S: np.ndarray
    composite: np.ndarray

    @property
    def sup_composite(self) -> float:
        return float(self.composite.max())

    @property
    def sup_S(self) -> float:
        return float(self.S[-1])


def _check_pair(ptraj: Trajectory, ctraj: Trajectory) -> None:
    if ptraj.grid != ctraj.grid:
        raise ValueError("trajectories live on different grids")
    if len(ptraj.times) != len(ctraj.times) or not np.allclose(ptraj.times, ctraj.times, rtol=0, atol=1e-9):
        raise ValueError("trajectories must share their sample times")


def scaled_errors(ptraj: Trajectory, ctraj: Trajectory, eps: float, s: float = 2.0) -> ErrorSeries:
    """R_u = (u-U)/eps in X_s, R_v = (v-V)/eps and R_w = w/eps - V' in Y_{s-2}."""
    _check_pair(ptraj, ctraj)
    grid = ptraj.grid
    n = len(ptraj.times)
    Ru, Rv, Rw = np.empty(n), np.empty(n), np.empty(n)
    for j in range(n):
        U = ctraj.fields["U"][j]
        V = hartree_potential(U, grid)
        Vrate = potential_rate(U, grid)
        Ru[j] = norm_sobolev(ptraj.fields["u"][j] - U, s, grid) / eps
        Rv[j] = norm_y(ptraj.fields["v"][j] - V, s - 2, grid) / eps
        Rw[j] = norm_y(ptraj.fields["w"][j] / eps - Vrate, s - 2, grid)
    S_u = np.maximum.accumulate(Ru)
    S_vw = np.maximum.accumulate(Rv + Rw)
    return ErrorSeries(
        eps=eps,
        times=np.array(ptraj.times),
        Ru=Ru,
        Rv=Rv,
        Rw=Rw,
        S_u=S_u,
        S_vw=S_vw,
        S=S_u + S_vw,
        composite=eps * (Ru + Rv + Rw),
    )


def error_forcings(u, v, U, eps: float, grid: Grid, s: float = 2.0) -> tuple[float, float]:
    """Norms of the error forcings.

    f_u = R_u V + U R_v + eps R_u R_v in X_s and
    f_v = inv_laplacian(R_u conj(U) + conj(R_u) U + eps |R_u|^2) in Y_{s-2}.
    """
    V = hartree_potential(U, grid)
    Ru = (u - U) / eps
    Rv = (v - V) / eps
    f_u = Ru * V + U * Rv + eps * Ru * Rv
    f_v = inv_laplacian(2.0 * np.real(Ru * np.conj(U)) + eps * np.abs(Ru) ** 2, grid)
    return norm_sobolev(f_u, s, grid), norm_y(f_v, s - 2, grid)


def forcing_constants(ptraj: Trajectory, ctraj: Trajectory, eps: float, s: float = 2.0) -> dict:
    """Smallest constants making the two forcing estimates hold along a run.

    ``C_u`` bounds ||f_u|| by ||R_u|| ||V||_Y + ||U|| ||R_v||_Y + eps ||R_u|| ||R_v||_Y;
    ``C_v`` bounds ||f_v||_Y by ||R_u|| ||U|| + eps ||R_u||^2. Samples with a
    vanishing right-hand side are skipped.
    """
    _check_pair(ptraj, ctraj)
    grid = ptraj.grid
    C_u = C_v = 0.0
    for j in range(len(ptraj.times)):
        u, v = ptraj.fields["u"][j], ptraj.fields["v"][j]
        U = ctraj.fields["U"][j]
        V = hartree_potential(U, grid)
        fu, fv = error_forcings(u, v, U, eps, grid, s)
        ru = norm_sobolev(u - U, s, grid) / eps
        rv = norm_y(v - V, s - 2, grid) / eps
        nU = norm_sobolev(U, s, grid)
        rhs_u = ru * norm_y(V, s - 2, grid) + nU * rv + eps * ru * rv
        rhs_v = ru * nU + eps * ru**2
        if rhs_u > 0:
            C_u = max(C_u, fu / rhs_u)
        if rhs_v > 0:
            C_v = max(C_v, fv / rhs_v)
    return {"C_u": C_u, "C_v": C_v}


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepRecord:
    eps: float
    sup_composite_error: float
    sup_S: float
    completed: bool
    dt: float
    seconds: float
    blowup_time: float | None = None


@dataclass
class SweepResult:
    records: list
    series: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    reference: Trajectory | None = None


def build_initial_field(cfg: ExperimentConfig, grid: Grid) -> np.ndarray:
    init = cfg.initial
    if init.kind == "gaussian":
        amp = init.amplitude if init.amplitude is not None else gaussian_amplitude_for_mass(init.sigma, init.mass)
        U0 = gaussian_wave(grid, init.sigma, momentum=init.k0, amplitude=amp)
        if init.amplitude is None:
            # match the discrete mass exactly
            U0 = normalize_mass(U0, grid, init.mass)
        return U0
    return pekar_ground_state(grid, init.mass, tol=cfg.gs_tol, max_iters=cfg.gs_max_iters).U


def _perturbation(kind: str, scale: float, grid: Grid, rng, real: bool, s: float, norm_kind: str):
    if kind == "none":
        return None
    if kind == "trig":
        shape = trig_perturbation(grid, complex_valued=not real)
    else:
        shape = random_bandlimited_field(grid, rng, kmax=4 * 2 * np.pi / grid.L, complex_valued=not real)
    size = norm_sobolev(shape, s, grid) if norm_kind == "X" else norm_y(shape, s - 2, grid)
    return shape * (scale / size)


def build_prepared_data(cfg: ExperimentConfig, grid: Grid, U0: np.ndarray, eps: float):
    """Prepared data for one eps; perturbation shapes have norm ``*_scale``."""
    p = cfg.preparation
    rng = np.random.default_rng(cfg.seed)
    du = _perturbation(p.delta_u, p.delta_u_scale, grid, rng, False, cfg.s, "X")
    dv = _perturbation(p.delta_v, p.delta_v_scale, grid, rng, True, cfg.s, "Y")
    return prepared_polaron_data(U0, grid, eps, p.mode, du, dv, p.w0, cfg.s)


def _common_stride(dt: float, interval: float) -> int:
    k = int(round(interval / dt))
    if k < 1 or abs(k * dt - interval) > 1e-9 * interval:
        raise ValueError(f"dt={dt} does not divide the sample interval {interval}")
    return k


def choquard_reference(cfg: ExperimentConfig, grid: Grid, U0: np.ndarray, dt: float) -> Trajectory:
    stride = _common_stride(dt, cfg.sample_interval)
    return choquard_integrate(
        U0, grid, cfg.T0, dt, observer_stride=stride, s=cfg.s, ceiling=cfg.ceiling, dealiased=cfg.dealias
    )


def _run_one(cfg, grid, U0, reference, eps, with_constants):
    dt = resolve_dt(eps, cfg.dt_base, cfg.dt_ratio, cfg.sample_interval)
    data = build_prepared_data(cfg, grid, U0, eps)
    start = time.perf_counter()
    try:
        traj = polaron_integrate(
            data.u0,
            data.v0,
            data.w0,
            eps,
            grid,
            cfg.T0,
            dt,
            observer_stride=_common_stride(dt, cfg.sample_interval),
            s=cfg.s,
            ceiling=cfg.ceiling,
            kick=cfg.kick,
            dealiased=cfg.dealias,
        )
    except BlowupError as exc:
        log.warning("eps=%g: %s", eps, exc)
        partial = exc.trajectory
        n = len(partial.times)
        ref = _truncate(reference, n)
        series = scaled_errors(partial, ref, eps, cfg.s) if n else None
        rec = SweepRecord(
            eps=eps,
            sup_composite_error=series.sup_composite if series else float("inf"),
            sup_S=series.sup_S if series else float("inf"),
            completed=False,
            dt=dt,
            seconds=time.perf_counter() - start,
            blowup_time=exc.t,
        )
        return rec, series, None
    series = scaled_errors(traj, reference, eps, cfg.s)
    constants = forcing_constants(traj, reference, eps, cfg.s) if with_constants else None
    rec = SweepRecord(
        eps=eps,
        sup_composite_error=series.sup_composite,
        sup_S=series.sup_S,
        completed=True,
        dt=dt,
        seconds=time.perf_counter() - start,
    )
    return rec, series, constants


def _truncate(traj: Trajectory, n: int) -> Trajectory:
    return Trajectory(
        grid=traj.grid,
        times=traj.times[:n],
        fields={k: a[:n] for k, a in traj.fields.items()},
        series={k: a[:n] for k, a in traj.series.items()},
        dt=traj.dt,
        eps=traj.eps,
        s=traj.s,
    )


def sweep_epsilon(
    cfg: ExperimentConfig,
    threads: int = 1,
    with_constants: bool = False,
    reference: Trajectory | None = None,
) -> SweepResult:
    """Run the coupled solver for every eps against one shared limit trajectory.

    The limit equation is integrated once, with the finest step used by any
    eps (or ``cfg.choquard_dt``). Blowups are recorded, not raised.
    """
    eps_list = list(cfg.eps)
    if len(set(eps_list)) != len(eps_list):
        raise ValueError(f"duplicate eps values in {eps_list}")
    if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError(f"eps values must be strictly decreasing, got {eps_list}")
    grid = make_grid(cfg.grid.n, cfg.grid.L)
    U0 = build_initial_field(cfg, grid)
    if reference is None:
        dts = [resolve_dt(e, cfg.dt_base, cfg.dt_ratio, cfg.sample_interval) for e in eps_list]
        ref_dt = cfg.choquard_dt if cfg.choquard_dt is not None else min(dts)
        reference = choquard_reference(cfg, grid, U0, ref_dt)

    def job(eps):
        return _run_one(cfg, grid, U0, reference, eps, with_constants)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(job, eps_list))
    else:
        outcomes = [job(e) for e in eps_list]
    result = SweepResult(records=[], reference=reference)
    for eps, (rec, series, constants) in zip(eps_list, outcomes):
        result.records.append(rec)
        result.series[eps] = series
        if constants is not None:
            result.constants[eps] = constants
    return result


# ---------------------------------------------------------------- slope fit


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    residual: float
    eps: np.ndarray
    errors: np.ndarray
    excluded: list = field(default_factory=list)


def fit_slope(records, key: str = "sup_composite_error") -> SlopeFit:
    """Least-squares line through (log eps, log error) over completed records.

    ``residual`` is the root-mean-square misfit in log space.
    """
    used, excluded = [], []
    for r in records:
        (used if r.completed else excluded).append(r)
    if excluded:
        warnings.warn(f"excluding non-completed eps values {[r.eps for r in excluded]} from the fit", stacklevel=2)
    if len(used) < 3:
        raise ValueError(f"slope fit needs at least 3 completed records, got {len(used)}")
    eps = np.array([r.eps for r in used], dtype=float)
    err = np.array([getattr(r, key) for r in used], dtype=float)
    if np.any(eps <= 0) or np.any(err <= 0):
        raise ValueError("slope fit needs positive eps and errors")
    x, y = np.log(eps), np.log(err)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return SlopeFit(
        slope=float(slope),
        intercept=float(intercept),
        residual=float(np.sqrt(np.mean(resid**2))),
        eps=eps,
        errors=err,
        excluded=[r.eps for r in excluded],
    )


# ---------------------------------------------------------------- resonance


@dataclass
class ResonanceGap:
    gap: float
    k: tuple
    l: tuple
    sign: int


def _lattice(K: float, spacing: float) -> np.ndarray:
    m = int(np.floor(K / spacing + 1e-12))
    r = np.arange(-m, m + 1)
    pts = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3) * spacing
    return pts[np.einsum("ij,ij->i", pts, pts) <= K**2 * (1 + 1e-12)]


def resonance_gap(eps: float, K: float, spacing: float = 1.0) -> ResonanceGap:
    """min over lattice vectors |k|, |l| <= K and signs of |+-1/eps + |k-l|^2 - |l|^2|.

    The lattice is ``spacing * Z^3``. Returns the gap and an attaining triple.
    """
    if K < 1:
        raise ValueError(f"lattice bound K must be >= 1, got {K}")
    if spacing <= 0 or eps <= 0:
        raise ValueError("spacing and eps must be positive")
    pts = _lattice(K, spacing)
    l2 = np.einsum("ij,ij->i", pts, pts)
    inv = 1.0 / eps
    best = (np.inf, 0, 0, 1)
    # row block i: k = pts[i], columns: l
    for i0 in range(0, len(pts), 256):
        k = pts[i0 : i0 + 256]
        diff = k[:, None, :] - pts[None, :, :]
        phase = np.einsum("ijk,ijk->ij", diff, diff) - l2[None, :]
        for sign in (1, -1):
            vals = np.abs(sign * inv + phase)
            idx = np.unravel_index(np.argmin(vals), vals.shape)
            if vals[idx] < best[0]:
                best = (float(vals[idx]), i0 + idx[0], idx[1], sign)
    gap, ik, il, sign = best
    return ResonanceGap(gap=gap, k=tuple(float(x) for x in pts[ik]), l=tuple(float(x) for x in pts[il]), sign=sign)


# ---------------------------------------------------------------- product estimates


@dataclass
class ProductConstants:
    """Max ratios over the sample; ``ratios`` keeps the per-pair values."""

    xs_product: float
    mixed_product: float
    potential_product: float
    ratios: np.ndarray
    skipped: int


def product_constant_probe(pairs, grid: Grid, s: float = 2.0) -> ProductConstants:
    """Empirical constants of three product estimates over sample pairs (f, g).

    Ratios per pair:
      ||fg||_{X_s cap L1} / (||f||_{X_s} ||g||_{X_s}),
      ||fg||_{X_{s-2} cap L1} / (||f||_{X_{s-2}} ||g||_{X_s}),
      ||f inv_laplacian(g)||_{X_s} / (||f||_{X_s} (||g||_{X_{s-2}} + ||g||_{L1})).
    Pairs with a vanishing denominator are skipped.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("product probe needs at least one pair")
    rows = []
    skipped = 0
    for f, g in pairs:
        fs, gs = norm_sobolev(f, s, grid), norm_sobolev(g, s, grid)
        fs2, gs2 = norm_sobolev(f, s - 2, grid), norm_sobolev(g, s - 2, grid)
        gl1 = norm_l1(g, grid)
        if min(fs, gs, fs2) == 0 or gs2 + gl1 == 0:
            skipped += 1
            continue
        fg = f * g
        l1 = norm_l1(fg, grid)
        r1 = (norm_sobolev(fg, s, grid) + l1) / (fs * gs)
        r2 = (norm_sobolev(fg, s - 2, grid) + l1) / (fs2 * gs)
        r3 = norm_sobolev(f * inv_laplacian(g, grid), s, grid) / (fs * (gs2 + gl1))
        rows.append((r1, r2, r3))
    ratios = np.array(rows).reshape(-1, 3)
    if not np.all(np.isfinite(ratios)):
        raise FloatingPointError("nonfinite product ratio")
    top = ratios.max(axis=0) if len(ratios) else np.zeros(3)
    return ProductConstants(float(top[0]), float(top[1]), float(top[2]), ratios, skipped)
