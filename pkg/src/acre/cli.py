"""Command-line entry point ``acre``.

Exit codes: 0 success, 2 configuration or usage error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import PRESETS, ConfigError, ScenarioConfig, initial_condition, load_config, preset, with_overrides
from .coupling import ConvergenceFailure, run_simulation, dt_guidance
from .diagnostics import conservation_audit, mineral_volume
from .output import DiagnosticsWriter, write_fields

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 2, 3

SWEEP_HEADER = [
    "dt",
    "stabilization",
    "stabilization_value",
    "status",
    "exit_code",
    "steps",
    "failed_step",
    "mean_lscheme_iters",
    "mean_coupling_iters",
    "mean_newton_iters",
    "volume_change",
    "max_conservation_residual",
]


def execute(cfg: ScenarioConfig, out_dir=None, snapshot_every: int | None = None, log=print):
    """Run a configured scenario, streaming diagnostics and snapshots to ``out_dir``.

    Returns ``(state, history)``; raises :class:`ConvergenceFailure` on failure
    after flushing everything written so far.
    """
    problem = cfg.problem()
    mesh = problem.mesh
    state = initial_condition(cfg, mesh)
    every = cfg.output.snapshot_every if snapshot_every is None else snapshot_every
    times = cfg.snapshot_times()
    dt = problem.cfg.dt
    writer = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        writer = DiagnosticsWriter(out_dir / cfg.output.diagnostics)
        write_fields(state, mesh, out_dir / "fields_000000.vtk")

    def sink(diag, st):
        if writer is not None:
            writer.write(diag)
            if (every and st.step % every == 0) or any(abs(st.t - ts) < dt / 2 for ts in times):
                write_fields(st, mesh, out_dir / f"fields_{st.step:06d}.vtk")

    v0 = mineral_volume(mesh, state.phi)
    try:
        state, history = run_simulation(state, problem, sink=sink)
    finally:
        if writer is not None:
            writer.close()
    audit = conservation_audit(history, v0)
    if log is not None:
        log(f"scenario {cfg.scenario.name}, approach {problem.cfg.approach}: {audit.n_steps} steps to t={state.t:g}")
        log(f"  stabilization L = {problem.cfg.stabilization:g} (M_G = {cfg.mg():g})")
        log(f"  mineral volume change {audit.volume_change:.6e}")
        log(f"  max |delta phi_int - R^n| {audit.max_residual:.3e}")
        if problem.cfg.approach == "coupled":
            per = ", ".join(f"{v:.2f}" for v in audit.lscheme_per_coupling[:5])
            log(f"  mean coupling iterations {audit.mean_coupling:.4f}; L-scheme per coupling iteration: {per}")
        elif problem.cfg.approach == "lscheme":
            log(f"  mean L-scheme iterations {audit.mean_lscheme:.4f}")
        else:
            log(f"  mean Newton iterations {audit.mean_newton:.4f}")
    return state, history


def _sweep_cell(args):
    cfg, dt, l_spec = args
    cfg = with_overrides(cfg, solver=dict(dt=dt, stabilization=l_spec))
    row = {"dt": repr(dt), "stabilization": l_spec}
    try:
        row["stabilization_value"] = repr(cfg.stabilization())
        problem = cfg.problem()
        state = initial_condition(cfg, problem.mesh)
        v0 = mineral_volume(problem.mesh, state.phi)
        _, history = run_simulation(state, problem)
    except ConvergenceFailure as exc:
        row.update(status="not converged", exit_code=EXIT_NONCONVERGENCE, failed_step=exc.step)
        return row
    except ConfigError as exc:
        row.update(status=f"config error: {exc}", exit_code=EXIT_CONFIG)
        return row
    a = conservation_audit(history, v0)
    row.update(
        status="ok",
        exit_code=EXIT_OK,
        steps=a.n_steps,
        mean_lscheme_iters=repr(a.mean_lscheme),
        mean_coupling_iters=repr(a.mean_coupling),
        mean_newton_iters=repr(a.mean_newton),
        volume_change=repr(a.volume_change),
        max_conservation_residual=repr(a.max_residual),
    )
    return row


def sweep(cfg: ScenarioConfig, dts, l_specs, workers: int | None = None) -> list[dict]:
    """Run every ``(dt, L)`` combination; rows come back in input order."""
    jobs = [(cfg, dt, l) for dt in dts for l in l_specs]
    if workers is None:
        workers = thread_limit()
    if workers <= 1 or len(jobs) == 1:
        return [_sweep_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_sweep_cell, jobs))


def thread_limit() -> int:
    value = os.environ.get("ACRE_THREADS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acre", description="Phase-field reactive transport simulations.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configuration file")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (default: [output] directory)")
    run.add_argument("--snapshot-every", type=int, help="write a VTK snapshot every K steps (0 disables)")

    sc = sub.add_parser("scenario", help="run a built-in scenario")
    sc.add_argument("name", choices=[n for n in PRESETS if n != "custom"])
    sc.add_argument("--approach", choices=["i", "ii", "iii", "coupled"])
    sc.add_argument("--dt", type=float)
    sc.add_argument("--t-end", type=float)
    sc.add_argument("--lscheme-l", help="stabilization: number, MG, MG/2, MG/4, MG/8, ...")
    sc.add_argument("--lcoup", type=float, help="coupling stabilization")
    sc.add_argument("--grid", type=int, help="cells per axis")
    sc.add_argument("--tol-l", type=float)
    sc.add_argument("--tol-coup", type=float)
    sc.add_argument("--out")
    sc.add_argument("--snapshot-every", type=int)

    sw = sub.add_parser("sweep", help="run a grid of time steps and stabilizations, write a summary CSV")
    sw.add_argument("config")
    sw.add_argument("--dt-list", type=_float_list, help="comma-separated time steps")
    sw.add_argument("--l-list", type=_str_list, help="comma-separated stabilizations, e.g. MG,MG/2,MG/4")
    sw.add_argument("--out", help="summary CSV path (default: stdout)")

    ck = sub.add_parser("check", help="validate a configuration and print guidance")
    ck.add_argument("config")
    return parser


def _scenario_config(ns) -> ScenarioConfig:
    cfg = preset(ns.name)
    solver = {}
    if ns.dt is not None:
        solver["dt"] = ns.dt
    if ns.t_end is not None:
        solver["t_end"] = ns.t_end
    if ns.lscheme_l is not None:
        solver["stabilization"] = ns.lscheme_l
    if ns.lcoup is not None:
        solver["coupling_stabilization"] = ns.lcoup
    if ns.tol_l is not None:
        solver["tol_l"] = ns.tol_l
    if ns.tol_coup is not None:
        solver["tol_coup"] = ns.tol_coup
    over = {"solver": solver}
    if ns.approach is not None:
        over["scenario"] = {"approach": ns.approach}
    if ns.grid is not None:
        over["mesh"] = {"nx": ns.grid, "ny": ns.grid}
    cfg = with_overrides(cfg, **over)
    cfg.validate()
    return cfg


def _check(cfg: ScenarioConfig) -> None:
    p = cfg.params()
    lhs, rhs, ok = p.gamma_constraint()
    status = "satisfied" if ok else "violated"
    print(f"configuration ok: scenario {cfg.scenario.name}, approach {cfg.scenario.approach}")
    print(f"gamma constraint 4*gamma <= lam*k0/m_m: {lhs:g} <= {rhs:g} ({status})")
    print(f"M_G = {cfg.mg():g}; stabilization L = {cfg.stabilization():g}")
    sc = cfg.solver_config()
    if sc.approach == "coupled":
        print(dt_guidance(p, cfg.mg(), dt=sc.dt, l_coup=sc.coupling_stabilization))
    else:
        print("phase-field-only approach: no coupling iterations, coupling guidance not applicable")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda msg, *a, **k: print(f"warning: {msg}", file=sys.stderr)
            if ns.command == "check":
                _check(load_config(ns.config))
                return EXIT_OK
            if ns.command == "run":
                cfg = load_config(ns.config)
                execute(cfg, ns.out or cfg.output.directory, ns.snapshot_every)
                return EXIT_OK
            if ns.command == "scenario":
                cfg = _scenario_config(ns)
                execute(cfg, ns.out, ns.snapshot_every)
                return EXIT_OK
            if ns.command == "sweep":
                cfg = load_config(ns.config)
                dts = ns.dt_list or [cfg.solver.dt]
                ls = ns.l_list or [cfg.solver.stabilization]
                rows = sweep(cfg, dts, ls)
                fh = open(ns.out, "w", newline="") if ns.out else sys.stdout
                try:
                    w = csv.DictWriter(fh, fieldnames=SWEEP_HEADER, lineterminator="\n", restval="")
                    w.writeheader()
                    w.writerows(rows)
                finally:
                    if ns.out:
                        fh.close()
                codes = [r["exit_code"] for r in rows]
                if EXIT_CONFIG in codes:
                    return EXIT_CONFIG
                return EXIT_NONCONVERGENCE if EXIT_NONCONVERGENCE in codes else EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceFailure as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
