"""Command-line entry point: run, compare, sweep, selftest, groundstate.

Exit codes: 0 ok, 1 usage or config error, 2 blowup detected,
3 acceptance failure (sweep slope outside the configured window).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    SweepRecord,
    build_initial_field,
    build_prepared_data,
    choquard_reference,
    fit_slope,
    scaled_errors,
    sweep_epsilon,
)
from .choquard import choquard_integrate
from .config import ConfigError, ExperimentConfig, load_config
from .fields import make_grid
from .initdata import ConvergenceError, pekar_ground_state
from .io import COMPARE_HEADER, RUN_HEADER, SWEEP_HEADER, write_csv, write_snapshot
from .polaron import polaron_integrate, resolve_dt
from .selftest import run_selftest
from .trajectory import BlowupError, Trajectory

log = logging.getLogger("mfpolaron")

EXIT_OK, EXIT_USAGE, EXIT_BLOWUP, EXIT_ACCEPTANCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _eps_tag(eps: float) -> str:
    return format(eps, ".17g")


def _prepare_out(cfg: ExperimentConfig, out: str | None) -> Path:
    path = Path(out if out is not None else cfg.output_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"output directory {path} is not writable: {exc.strerror}") from None
    return path


def _write_report(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _run_rows(traj: Trajectory):
    s = traj.series
    return zip(traj.times, s["mass"], s["Xs_norm_u"], s["Y_norm_v"], s["Y_norm_w"], s["energy"])


def cmd_run(cfg: ExperimentConfig, eps: float, out: str | None = None, snapshots: bool = False) -> int:
    """Integrate the coupled system for one eps; writes the time-series CSV."""
    if not eps > 0:
        raise UsageError(f"--eps must be positive, got {eps}")
    outdir = _prepare_out(cfg, out)
    grid = make_grid(cfg.grid.n, cfg.grid.L)
    U0 = build_initial_field(cfg, grid)
    data = build_prepared_data(cfg, grid, U0, eps)
    dt = resolve_dt(eps, cfg.dt_base, cfg.dt_ratio, cfg.sample_interval)
    stride = int(round(cfg.sample_interval / dt))
    tag = _eps_tag(eps)
    csv_path = outdir / f"run_eps{tag}.csv"
    report = {"eps": eps, "dt": dt, "T0": cfg.T0, "deficits": list(data.deficits)}
    try:
        traj = polaron_integrate(
            data.u0, data.v0, data.w0, eps, grid, cfg.T0, dt, stride, cfg.s, cfg.ceiling, cfg.kick, cfg.dealias,
            store_fields=snapshots,
        )
    except BlowupError as exc:
        write_csv(csv_path, RUN_HEADER, _run_rows(exc.trajectory))
        report.update(completed=False, blowup_time=exc.t, message=str(exc))
        _write_report(outdir / f"run_eps{tag}.json", report)
        print(f"blowup detected at t={exc.t:.17g} (eps={eps:g})", file=sys.stderr)
        return EXIT_BLOWUP
    write_csv(csv_path, RUN_HEADER, _run_rows(traj))
    if snapshots:
        last = traj.at(-1)
        write_snapshot(outdir / f"snapshot_eps{tag}_final.bin", grid, traj.times[-1], eps, last)
    report.update(completed=True)
    _write_report(outdir / f"run_eps{tag}.json", report)
    print(f"wrote {csv_path}")
    return EXIT_OK


def _reference_key(cfg: ExperimentConfig, dt: float) -> str:
    relevant = {
        "grid": cfg.to_dict()["grid"],
        "initial": cfg.to_dict()["initial"],
        "T0": cfg.T0,
        "s": cfg.s,
        "sample_interval": cfg.sample_interval,
        "dealias": cfg.dealias,
        "dt": dt,
        "gs": [cfg.gs_tol, cfg.gs_max_iters],
    }
    return hashlib.sha256(json.dumps(relevant, sort_keys=True).encode()).hexdigest()[:16]


def load_or_build_reference(cfg: ExperimentConfig, outdir: Path, dt: float, grid, U0) -> Trajectory:
    """Cached limit trajectory under ``outdir``; regenerated when missing or stale."""
    key = _reference_key(cfg, dt)
    path = outdir / f"choquard_reference_{key}.npz"
    if path.exists():
        with np.load(path) as data:
            return Trajectory(grid=grid, times=data["times"], fields={"U": data["U"]}, dt=dt, s=cfg.s)
    log.info("limit reference %s missing; integrating", path.name)
    ref = choquard_reference(cfg, grid, U0, dt)
    np.savez(path, times=ref.times, U=ref.fields["U"])
    return ref


def cmd_compare(cfg: ExperimentConfig, eps: float, out: str | None = None) -> int:
    """Run both solvers for one eps and write the scaled-error series."""
    if not eps > 0:
        raise UsageError(f"--eps must be positive, got {eps}")
    outdir = _prepare_out(cfg, out)
    grid = make_grid(cfg.grid.n, cfg.grid.L)
    U0 = build_initial_field(cfg, grid)
    dt = resolve_dt(eps, cfg.dt_base, cfg.dt_ratio, cfg.sample_interval)
    ref_dt = cfg.choquard_dt if cfg.choquard_dt is not None else dt
    try:
        ref = load_or_build_reference(cfg, outdir, ref_dt, grid, U0)
    except BlowupError as exc:
        print(f"limit solution blew up at t={exc.t:.17g}", file=sys.stderr)
        return EXIT_BLOWUP
    data = build_prepared_data(cfg, grid, U0, eps)
    stride = int(round(cfg.sample_interval / dt))
    tag = _eps_tag(eps)
    code = EXIT_OK
    try:
        traj = polaron_integrate(
            data.u0, data.v0, data.w0, eps, grid, cfg.T0, dt, stride, cfg.s, cfg.ceiling, cfg.kick, cfg.dealias
        )
    except BlowupError as exc:
        traj = exc.trajectory
        code = EXIT_BLOWUP
        print(f"blowup detected at t={exc.t:.17g} (eps={eps:g})", file=sys.stderr)
    n = len(traj.times)
    ref_n = Trajectory(grid=grid, times=ref.times[:n], fields={"U": ref.fields["U"][:n]}, s=cfg.s)
    series = scaled_errors(traj, ref_n, eps, cfg.s)
    rows = zip(series.times, series.Ru, series.Rv, series.Rw, series.S, series.composite)
    path = write_csv(outdir / f"compare_eps{tag}.csv", COMPARE_HEADER, rows)
    print(f"wrote {path}")
    return code


def cmd_sweep(cfg: ExperimentConfig, out: str | None = None, threads: int = 1, synthetic_power: float | None = None) -> int:
    """Run the eps sweep, write the summary CSV and the slope report."""
    if len(cfg.eps) < 3:
        raise UsageError(f"sweep needs at least 3 eps values, got {len(cfg.eps)}")
    outdir = _prepare_out(cfg, out)
    if synthetic_power is not None:
        # test hook: exact power-law errors, no simulation
        records = [SweepRecord(e, 0.5 * e**synthetic_power, 1.0, True, 0.0, 0.0) for e in cfg.eps]
        series = {}
    else:
        result = sweep_epsilon(cfg, threads=threads)
        records, series = result.records, result.series
        for eps, ser in series.items():
            if ser is None:
                continue
            rows = zip(ser.times, ser.Ru, ser.Rv, ser.Rw, ser.S, ser.composite)
            write_csv(outdir / f"compare_eps{_eps_tag(eps)}.csv", COMPARE_HEADER, rows)
    write_csv(
        outdir / "sweep.csv",
        SWEEP_HEADER,
        [(r.eps, r.sup_composite_error, r.sup_S, r.completed, r.dt, r.seconds) for r in records],
    )
    lo, hi = cfg.slope_window
    try:
        fit = fit_slope(records)
    except ValueError as exc:
        _write_report(outdir / "sweep_report.json", {"passed": False, "error": str(exc)})
        print(f"slope fit failed: {exc}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    passed = lo <= fit.slope <= hi and fit.residual <= cfg.max_fit_residual
    report = {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "residual": fit.residual,
        "slope_window": [lo, hi],
        "max_fit_residual": cfg.max_fit_residual,
        "excluded_eps": fit.excluded,
        "passed": passed,
    }
    _write_report(outdir / "sweep_report.json", report)
    verdict = "PASS" if passed else "FAIL"
    print(f"slope {fit.slope:.4f} (window [{lo}, {hi}]), residual {fit.residual:.3g}: {verdict}")
    return EXIT_OK if passed else EXIT_ACCEPTANCE


def cmd_selftest(corrupt=()) -> int:
    results = run_selftest(corrupt=corrupt)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name}: {r.detail}")
    failed = [r.name for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_ACCEPTANCE


def cmd_groundstate(cfg: ExperimentConfig, out: str | None = None) -> int:
    outdir = _prepare_out(cfg, out)
    grid = make_grid(cfg.grid.n, cfg.grid.L)
    try:
        gs = pekar_ground_state(grid, cfg.initial.mass, tol=cfg.gs_tol, max_iters=cfg.gs_max_iters)
    except ConvergenceError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    write_snapshot(outdir / "ground_state.bin", grid, 0.0, None, {"U": gs.U})
    _write_report(
        outdir / "ground_state.json",
        {"energy": gs.energy, "residual": gs.residual, "iterations": gs.iterations, "mass": cfg.initial.mass},
    )
    print(f"ground state energy {gs.energy:.12g} after {gs.iterations} iterations")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfpolaron", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    def common(p, eps=False):
        p.add_argument("--config", required=True, help="YAML experiment file")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="parallel eps runs")
        if eps:
            p.add_argument("--eps", type=float, required=True)

    p = sub.add_parser("run", help="integrate the coupled system for one eps")
    common(p, eps=True)
    p.add_argument("--snapshots", action="store_true", help="write the final fields")
    common(sub.add_parser("compare", help="scaled errors against the limit solution"), eps=True)
    p = sub.add_parser("sweep", help="eps sweep with slope verdict")
    common(p)
    p.add_argument("--synthetic-power", type=float, help=argparse.SUPPRESS)
    sub.add_parser("selftest", help="analytic-oracle checks").add_argument(
        "--corrupt", action="append", default=[], help=argparse.SUPPRESS
    )
    common(sub.add_parser("groundstate", help="Pekar ground state at the configured mass"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if args.command == "selftest":
        return cmd_selftest(args.corrupt)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        if args.command == "run":
            return cmd_run(cfg, args.eps, args.out, args.snapshots)
        if args.command == "compare":
            return cmd_compare(cfg, args.eps, args.out)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.threads, args.synthetic_power)
        return cmd_groundstate(cfg, args.out)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
