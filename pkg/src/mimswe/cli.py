"""Batch simulation driver.

A run consumes a configuration (flags, optionally layered over a flat
key=value file; flags win) and writes a self-contained run directory:

    config.txt      resolved configuration, reusable via --config
    monitors.csv    step, t_seconds, mass_rel_err, vorticity_integral,
                    energy_rel_err, potential_enstrophy_rel_err,
                    divergence_L2, solver_iters_momentum, solver_iters_flux
    errors.csv      L1/L2/Linf of depth, velocity, absolute vorticity
                    against the analytic solution (cases that have one)
    snap_<n>.csv    lon_deg, lat_deg, h, u_zonal, u_merid, vorticity at
                    the element nodes (duplicates on shared edges kept
                    unless dedup_snapshots is set)
    run.json        summary: resolved parameters, final conservation
                    numbers, wall time
    orders.csv      sweep mode only: log2 error ratios between meshes

Solver iteration columns accumulate CG iterations since the previous
monitor row.  All CSV numbers carry 17 significant digits, and a rerun
with an identical configuration reproduces monitors.csv bit for bit.

Numerical failure (non-finite fields, a stalled solver, or depth
staying non-positive for 10 consecutive steps) leaves the artifacts in
place, adds a FAILED marker file with the reason, and exits with status
3.  Configuration errors exit with status 2, naming the offending key.

--sweep ne=4,8,16 runs the case on each mesh with the time step scaled
inversely to the resolution (the given --dt applies to the first entry)
and writes per-mesh runs into subdirectories plus a combined orders.csv.

--report <run_dir> renders the CSV artifacts of a finished run into PNG
figures alongside the data files; no simulation is performed.
"""

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .assembly import SolverError, build_operators
from .geometry import GeometryError, build_mesh
from .swe import Model, coriolis_field, default_viscosity
from .testcases import (
    HILL_AMPLITUDE,
    TestCaseError,
    has_reference,
    init_state,
    solution_errors,
    testcase,
)

MONITOR_COLUMNS = [
    "step",
    "t_seconds",
    "mass_rel_err",
    "vorticity_integral",
    "energy_rel_err",
    "potential_enstrophy_rel_err",
    "divergence_L2",
    "solver_iters_momentum",
    "solver_iters_flux",
]
ERROR_COLUMNS = [
    "step",
    "t_seconds",
    "h_L1",
    "h_L2",
    "h_Linf",
    "u_L1",
    "u_L2",
    "u_Linf",
    "absvort_L1",
    "absvort_L2",
    "absvort_Linf",
]
SNAPSHOT_COLUMNS = ["lon_deg", "lat_deg", "h", "u_zonal", "u_merid", "vorticity"]

THREADS_ENV = "MIMSWE_THREADS"


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class _NumericsError(RuntimeError):
    """Raised by the run loop when the solution is no longer usable."""


@dataclass
class SimConfig:
    testcase: str = "tc2"
    p: int = 3
    ne: int = 4
    dt: float = 240.0
    days: float = 1.0
    alpha: float = 0.0
    c0: str = "case"
    hill_amplitude: float = HILL_AMPLITUDE
    out: str = ""
    snapshot_interval: int = 0
    monitor_interval: int = 10
    solver_tol: float = 1e-12
    solver_maxiter: int = 1000
    threads: int = 0
    dedup_snapshots: bool = False
    sweep: str = ""


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean, got %r" % text)


_COERCE = {
    "testcase": str,
    "p": int,
    "ne": int,
    "dt": float,
    "days": float,
    "alpha": float,
    "c0": str,
    "hill_amplitude": float,
    "out": str,
    "snapshot_interval": int,
    "monitor_interval": int,
    "solver_tol": float,
    "solver_maxiter": int,
    "threads": int,
    "dedup_snapshots": _parse_bool,
    "sweep": str,
}


def _read_config_file(path):
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError("cannot read config file %s: %s" % (path, exc))
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("%s:%d: expected key = value" % (path, lineno))
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _COERCE:
            raise ConfigError("%s:%d: unknown key %r" % (path, lineno, key))
        try:
            values[key] = _COERCE[key](value)
        except ValueError as exc:
            raise ConfigError("%s:%d: bad value for %r: %s" % (path, lineno, key, exc))
    return values


def _parse_sweep(text):
    if not text.startswith("ne="):
        raise ConfigError("sweep: expected the form ne=4,8,16")
    try:
        nes = [int(part) for part in text[3:].split(",") if part]
    except ValueError:
        raise ConfigError("sweep: mesh counts must be integers")
    if len(nes) < 2 or any(n < 1 for n in nes) or sorted(nes) != nes:
        raise ConfigError("sweep: need at least two increasing mesh counts")
    return nes


def _resolve_c0(raw, spec, mesh):
    """Dissipation coefficient policy.

    "case" follows the benchmark convention (off for the steady cases,
    the mesh-dependent default otherwise); "auto" always uses the
    mesh-dependent default; a number is taken as-is.
    """
    if raw == "case":
        return default_viscosity(mesh) if spec.viscous else 0.0
    if raw == "auto":
        return default_viscosity(mesh)
    return float(raw)


def validate_config(config):
    if not 1 <= config.p <= 16:
        raise ConfigError("p: must be between 1 and 16")
    if config.ne < 1:
        raise ConfigError("ne: must be at least 1")
    if not config.dt > 0.0:
        raise ConfigError("dt: must be positive")
    if not config.days > 0.0:
        raise ConfigError("days: must be positive")
    if config.monitor_interval < 1:
        raise ConfigError("monitor_interval: must be at least 1")
    if config.snapshot_interval < 0:
        raise ConfigError("snapshot_interval: must not be negative")
    if not config.solver_tol > 0.0:
        raise ConfigError("solver_tol: must be positive")
    if config.solver_maxiter < 1:
        raise ConfigError("solver_maxiter: must be at least 1")
    if config.threads < 0:
        raise ConfigError("threads: must not be negative")
    try:
        spec = testcase(config.testcase, alpha=config.alpha, hill_amplitude=config.hill_amplitude)
    except TestCaseError as exc:
        raise ConfigError(str(exc))
    if config.c0 not in ("case", "auto"):
        try:
            value = float(config.c0)
        except ValueError:
            raise ConfigError("c0: expected a number, 'auto', or 'case'")
        if value < 0.0:
            raise ConfigError("c0: must not be negative")
    if config.sweep:
        _parse_sweep(config.sweep)
        if not has_reference(spec):
            raise ConfigError("sweep: %s has no analytic reference" % spec.id)
    return config


def parse_config(file=None, overrides=None):
    """Layer defaults, an optional key=value file, and explicit overrides."""
    values = {}
    if file:
        values.update(_read_config_file(file))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _COERCE:
            raise ConfigError("unknown key %r" % key)
        values[key] = _COERCE[key](value) if isinstance(value, str) else value
    return validate_config(SimConfig(**values))


def _default_out(config):
    return os.path.join("runs", "%s_p%d_ne%d" % (config.testcase, config.p, config.ne))


def _apply_threads(count):
    """Best-effort thread pinning; honoured by BLAS pools spawned later."""
    if count <= 0:
        count = int(os.environ.get(THREADS_ENV, "1") or 1)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(count))
    return count


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return "%d" % value
    return "%.17g" % value


def _write_config_echo(path, config):
    lines = ["%s = %s" % (key, value) for key, value in asdict(config).items()]
    path.write_text("\n".join(lines) + "\n")


def _write_snapshot(path, ops, model, state, dedup):
    mesh = ops.mesh
    lon = np.degrees(mesh.lon.ravel())
    lat = np.degrees(mesh.lat.ravel())
    h = ops.h_at_quad(state.h).ravel()
    u_phys = ops.u_at_quad(state.u).reshape(-1, 2)
    vort = model.diagnose_vorticity(state.u)[mesh.map_w.ravel()]
    keep = slice(None)
    if dedup:
        _, keep = np.unique(mesh.map_w.ravel(), return_index=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOT_COLUMNS)
        for i in np.arange(lon.size)[keep]:
            writer.writerow(
                [_fmt(v) for v in (lon[i], lat[i], h[i], u_phys[i, 0], u_phys[i, 1], vort[i])]
            )
    return path


def _monitor_row(step, t, row, iters_m, iters_f):
    return [
        _fmt(step),
        _fmt(t),
        _fmt(row["mass_rel_err"]),
        _fmt(row["vorticity_integral"]),
        _fmt(row["energy_rel_err"]),
        _fmt(row["potential_enstrophy_rel_err"]),
        _fmt(row["divergence_l2"]),
        _fmt(iters_m),
        _fmt(iters_f),
    ]


def _snapshot_due(step, n_steps, interval):
    return step == n_steps or (interval > 0 and step % interval == 0)


def run(config):
    """Execute one configured simulation; returns the process exit code."""
    wall_start = time.perf_counter()
    out = Path(config.out or _default_out(config))
    out.mkdir(parents=True, exist_ok=True)
    failed_marker = out / "FAILED"
    if failed_marker.exists():
        failed_marker.unlink()
    config = replace(config, out=str(out))
    _write_config_echo(out / "config.txt", config)

    status, detail, exit_code = "ok", "", 0
    summary = {"status": status, "config": asdict(config)}
    last_row = None
    final_errors = None
    c0 = None
    n_steps = max(1, round(config.days * 86400.0 / config.dt))
    mon_file = err_file = None
    try:
        spec = testcase(config.testcase, alpha=config.alpha, hill_amplitude=config.hill_amplitude)
        mesh = build_mesh(config.ne, config.p)
        ops = build_operators(mesh)
        c0 = _resolve_c0(config.c0, spec, mesh)
        model = Model(
            ops,
            coriolis_field(mesh, spec.alpha),
            c0=c0,
            solver_tol=config.solver_tol,
            solver_maxiter=config.solver_maxiter,
        )
        state = init_state(spec, mesh)

        cfl = model.max_wave_speed(state.h) * config.dt / mesh.average_equatorial_spacing()
        if cfl > 1.0:
            print(
                "warning: wave CFL number %.2f exceeds 1; expect instability" % cfl,
                file=sys.stderr,
            )

        mon_file = open(out / "monitors.csv", "w", newline="")
        mon = csv.writer(mon_file)
        mon.writerow(MONITOR_COLUMNS)
        row, reference = model.monitors(state)
        mon.writerow(_monitor_row(0, 0.0, row, 0, 0))

        track_errors = has_reference(spec)
        if track_errors:
            err_file = open(out / "errors.csv", "w", newline="")
            err = csv.writer(err_file)
            err.writerow(ERROR_COLUMNS)
            final_errors = solution_errors(ops, state, spec)
            err.writerow([_fmt(0), _fmt(0.0)] + [_fmt(final_errors[k]) for k in ERROR_COLUMNS[2:]])

        _write_snapshot(out / "snap_0.csv", ops, model, state, config.dedup_snapshots)

        negative_streak = 0
        acc_m = acc_f = 0
        for step in range(1, n_steps + 1):
            state, info = model.rk2_step(state, config.dt)
            acc_m += info["iters_momentum"]
            acc_f += info["iters_flux"]
            if not (np.isfinite(state.u).all() and np.isfinite(state.h).all()):
                raise _NumericsError("non-finite fields at step %d" % step)
            if info["min_h"] <= 0.0:
                negative_streak += 1
                print(
                    "warning: min depth %.6g at step %d" % (info["min_h"], step),
                    file=sys.stderr,
                )
                if negative_streak >= 10:
                    raise _NumericsError(
                        "depth non-positive for %d consecutive steps" % negative_streak
                    )
            else:
                negative_streak = 0

            if step % config.monitor_interval == 0 or step == n_steps:
                row, _ = model.monitors(state, reference)
                mon.writerow(_monitor_row(step, state.t, row, acc_m, acc_f))
                print(
                    "step %d/%d  t=%.4f d  energy_rel=%.3e  min_h=%.6g  iters=%d/%d"
                    % (
                        step,
                        n_steps,
                        state.t / 86400.0,
                        row["energy_rel_err"],
                        info["min_h"],
                        acc_m,
                        acc_f,
                    ),
                    file=sys.stderr,
                )
                acc_m = acc_f = 0
                last_row = dict(row, step=step, t_seconds=state.t)
                if not all(math.isfinite(v) for v in row.values()):
                    raise _NumericsError("non-finite monitor at step %d" % step)
                if track_errors:
                    final_errors = solution_errors(ops, state, spec)
                    err.writerow(
                        [_fmt(step), _fmt(state.t)]
                        + [_fmt(final_errors[k]) for k in ERROR_COLUMNS[2:]]
                    )
            if _snapshot_due(step, n_steps, config.snapshot_interval):
                _write_snapshot(out / ("snap_%d.csv" % step), ops, model, state, config.dedup_snapshots)
    except (SolverError, GeometryError, _NumericsError) as exc:
        status, detail, exit_code = "failed", str(exc), 3
        failed_marker.write_text(detail + "\n")
        print("numerical failure: %s" % detail, file=sys.stderr)
    finally:
        for fh in (mon_file, err_file):
            if fh is not None:
                fh.close()

    summary.update(
        status=status,
        detail=detail,
        steps=n_steps,
        c0=c0,
        final=last_row,
        final_errors=final_errors,
        wall_seconds=time.perf_counter() - wall_start,
    )
    (out / "run.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return exit_code


def run_sweep(config):
    """Run the case across meshes and tabulate convergence orders."""
    nes = _parse_sweep(config.sweep)
    out = Path(config.out or _default_out(config) + "_sweep")
    out.mkdir(parents=True, exist_ok=True)
    finals = []
    for ne in nes:
        sub = replace(
            config,
            ne=ne,
            dt=config.dt * nes[0] / ne,
            out=str(out / ("ne%d" % ne)),
            sweep="",
        )
        code = run(sub)
        if code != 0:
            print("sweep member ne=%d failed" % ne, file=sys.stderr)
            return code
        with open(out / ("ne%d" % ne) / "run.json") as fh:
            finals.append(json.load(fh)["final_errors"])

    with open(out / "orders.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["quantity", "norm", "ne_coarse", "ne_fine", "error_coarse", "error_fine", "order"]
        )
        for i in range(len(nes) - 1):
            for quantity in ("h", "u", "absvort"):
                for norm in ("L1", "L2", "Linf"):
                    key = "%s_%s" % (quantity, norm)
                    e_c, e_f = finals[i][key], finals[i + 1][key]
                    order = math.log2(e_c / e_f) if e_c > 0 and e_f > 0 else float("nan")
                    writer.writerow(
                        [quantity, norm, _fmt(nes[i]), _fmt(nes[i + 1]),
                         _fmt(e_c), _fmt(e_f), _fmt(order)]
                    )
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="mimswe",
        description="Mimetic spectral element shallow water runs on the cubed sphere.",
    )
    parser.add_argument("--testcase", help="tc2, tc6, galewsky, or rest")
    parser.add_argument("--p", type=int, help="polynomial degree (1..16)")
    parser.add_argument("--ne", type=int, help="elements per cube edge")
    parser.add_argument("--dt", type=float, help="time step in seconds")
    parser.add_argument("--days", type=float, help="simulated duration in days")
    parser.add_argument("--alpha", type=float, help="flow angle for tc2 (radians)")
    parser.add_argument(
        "--c0", help="dissipation coefficient: a number, 'auto', or 'case' (default)"
    )
    parser.add_argument("--hill-amplitude", dest="hill_amplitude", type=float,
                        help="galewsky perturbation amplitude in metres")
    parser.add_argument("--out", help="output directory (default runs/<case>_p<p>_ne<ne>)")
    parser.add_argument("--snapshot-interval", dest="snapshot_interval", type=int,
                        help="steps between snapshots (0: first and last only)")
    parser.add_argument("--monitor-interval", dest="monitor_interval", type=int,
                        help="steps between monitor rows")
    parser.add_argument("--solver-tol", dest="solver_tol", type=float,
                        help="relative CG tolerance")
    parser.add_argument("--solver-maxiter", dest="solver_maxiter", type=int,
                        help="CG iteration cap")
    parser.add_argument("--threads", type=int,
                        help="BLAS thread count (else $%s, else 1)" % THREADS_ENV)
    parser.add_argument("--dedup-snapshots", dest="dedup_snapshots", action="store_const",
                        const=True, help="write shared-edge points once")
    parser.add_argument("--sweep", help="convergence driver, e.g. ne=4,8,16")
    parser.add_argument("--config", help="flat key=value config file; flags override")
    parser.add_argument("--report", metavar="RUN_DIR",
                        help="render figures for a finished run directory and exit")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.report is not None:
        from . import report

        try:
            written = report.render_run(args.report)
        except (OSError, ValueError) as exc:
            print("report error: %s" % exc, file=sys.stderr)
            return 2
        for path in written:
            print(path)
        return 0

    overrides = {
        key: getattr(args, key) for key in _COERCE if getattr(args, key, None) is not None
    }
    try:
        config = parse_config(file=args.config, overrides=overrides)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    _apply_threads(config.threads)
    if config.sweep:
        return run_sweep(config)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
