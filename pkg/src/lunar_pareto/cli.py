"""Command-line entry point.

Exit codes: 0 success, 1 invalid input or usage, 2 solver did not converge
(or a verification failed), 3 file I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as tables
from .config import ConfigError, RunConfig, load_config_file
from .dynamics import PropagationAbort
from .engines import EngineCharacterization, resolve_cluster
from .nlp import check_gradients
from .oracle import repropagate, verify_solution
from .pareto import (ENGINE_COUNT, MAX_THRUST, ParetoResult, SweepFailure, SweepSpec,
                     refine_maximum, sweep)
from .transcription import (TrajectorySolution, extract_solution, initial_guess,
                            solve_scenario, transcribe)

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("lunar_pareto")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default="default",
                   help="TOML run configuration, or 'default' for built-in values")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    p.add_argument("--planar", action="store_true", help="solve the planar problem")
    p.add_argument("--nodes", type=int, default=None, help="collocation node count")
    p.add_argument("--parallel", type=int, default=None, help="concurrent sweep solves")
    p.add_argument("--no-plots", action="store_true", help="skip SVG output")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="lunar-pareto",
                     description="Minimum-fuel lunar descent and engine-sizing sweeps.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", parents=[common], help="solve one descent problem")
    p.add_argument("--thrust", type=float, default=12000.0,
                   help="max thrust in N for the quadratic engine (default 12000)")

    p = sub.add_parser("pareto", parents=[common], help="sweep the quadratic engine's thrust")
    p.add_argument("--no-refine", action="store_true", help="skip golden-section refinement")

    sub.add_parser("engines", parents=[common], help="sweep the cluster's engine count")

    p = sub.add_parser("propagate", parents=[common],
                       help="re-integrate a stored trajectory's controls")
    p.add_argument("trajectory", help="trajectory CSV")
    p.add_argument("--isp", type=float, default=None,
                   help="specific impulse in s (default: from the configured engine)")

    p = sub.add_parser("check", parents=[common],
                       help="gradient, defect and oracle checks on one solve")
    p.add_argument("--thrust", type=float, default=12000.0)
    p.add_argument("--trajectory", default=None,
                   help="check a stored trajectory CSV instead of solving")

    p = sub.add_parser("plot", parents=[common], help="re-render SVGs from CSV files")
    p.add_argument("--trajectory", default=None, help="trajectory CSV")
    p.add_argument("--pareto", default=None, help="Pareto CSV")
    return parser


# --------------------------------------------------------------------------
# helpers


def _setup(args) -> tuple[RunConfig, Path]:
    cfg = load_config_file(args.config)
    scenario = cfg.scenario
    changes = {}
    if args.planar:
        changes["planar"] = True
    if args.nodes is not None:
        changes["nodes"] = args.nodes
    if changes:
        try:
            scenario = dataclasses.replace(scenario, **changes)
        except ValueError as exc:
            raise ConfigError(f"scenario: {exc}") from None
    sweep_cfg = cfg.sweep
    if args.parallel is not None:
        if args.parallel < 1:
            raise ConfigError("--parallel must be >= 1")
        sweep_cfg = dataclasses.replace(sweep_cfg, parallel=args.parallel)
    output = cfg.output
    if args.no_plots:
        output = dataclasses.replace(output, plots=False)
    cfg = dataclasses.replace(cfg, scenario=scenario, sweep=sweep_cfg, output=output)
    out = Path(args.out if args.out is not None else cfg.output.directory)
    return cfg, out


def _engine(cfg: RunConfig, thrust: float) -> EngineCharacterization:
    if cfg.engine_case == 1:
        return resolve_cluster(cfg.cluster)
    try:
        return cfg.quadratic.characterize(thrust)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _solution_lines(sol: TrajectorySolution, cfg: RunConfig, engine) -> list[str]:
    last = sol.states[-1]
    rep = sol.report
    lines = [
        f"status={sol.status}",
        f"max_thrust_N={engine.max_thrust:.9g}",
        f"isp_s={engine.isp:.9g}",
        f"engine_mass_kg={engine.dry_mass:.9g}",
        f"t_f_s={sol.tf:.9g}",
        f"final_mass_kg={sol.final_mass:.9g}",
        f"propellant_kg={sol.states[0, 6] - sol.final_mass:.9g}",
        f"effective_payload_kg={sol.final_mass - engine.dry_mass:.9g}",
        f"final_altitude_m={last[0] - cfg.constants.radius:.9g}",
        f"final_speed_ms={float(np.linalg.norm(last[3:6])):.9g}",
        f"max_defect={sol.max_defect:.3e}",
        f"outer_iterations={sol.iterations}",
    ]
    if rep is not None:
        lines += [f"inner_iterations={rep.inner_iterations}",
                  f"violation={rep.violation:.3e}",
                  f"stationarity={rep.stationarity:.3e}"]
        if rep.message:
            lines.append(f"message={rep.message}")
    return lines


def _emit(lines):
    for line in lines:
        print(line)


def _plot_trajectory(cfg, out, table):
    if cfg.output.plots:
        from .plotting import plot_trajectory
        plot_trajectory(table, out)


def _plot_pareto(cfg, out, result, name):
    if cfg.output.plots:
        from .plotting import plot_pareto
        plot_pareto(result, out, name)


# --------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    cfg, out = _setup(args)
    engine = _engine(cfg, args.thrust)
    sol = solve_scenario(cfg.scenario, engine, cfg.constants, cfg.solver)
    table = tables.trajectory_table(sol, cfg.constants.radius)
    tables.write_trajectory(table, out / "trajectory.csv")
    lines = _solution_lines(sol, cfg, engine)
    tables.write_report(out / "report.txt", lines)
    _plot_trajectory(cfg, out, table)
    _emit(lines)
    return EXIT_OK if sol.converged else EXIT_SOLVER


def _sweep_report(result: ParetoResult) -> list[str]:
    lines = [f"points={len(result.points)}",
             f"converged={len(result.converged_points)}"]
    best = result.best
    if best is not None:
        lines += [f"maximizer_t_max_N={best.t_max:.9g}",
                  f"maximizer_n_engines={best.n}",
                  f"maximizer_thrust_to_mass0_ms2={best.thrust_to_mass0:.9g}",
                  f"maximizer_effective_payload_kg={best.effective_payload:.9g}",
                  f"boundary_maximizer={str(result.boundary).lower()}",
                  f"adjacent_failure={str(result.adjacent_failure).lower()}"]
    if result.bracket is not None:
        lines.append(f"refined_bracket_N={result.bracket[0]:.9g},{result.bracket[1]:.9g}")
    for p in result.points:
        if not p.converged:
            lines.append(f"failed {p.label}: {p.status} {p.message}".rstrip())
    return lines


def _run_sweep(spec: SweepSpec, out: Path, cfg: RunConfig, name: str,
               refine: bool) -> int:
    try:
        result = sweep(spec)
    except SweepFailure as exc:
        tables.write_pareto(exc.result, out / f"{name}.csv")
        lines = _sweep_report(exc.result)
        tables.write_report(out / f"{name}_report.txt", lines)
        _emit(lines)
        print(str(exc), file=sys.stderr)
        return EXIT_SOLVER
    if refine and not result.boundary and cfg.sweep.refine_iterations > 0:
        result = refine_maximum(result, spec, cfg.sweep.refine_iterations)
    tables.write_pareto(result, out / f"{name}.csv")
    lines = _sweep_report(result)
    tables.write_report(out / f"{name}_report.txt", lines)
    _plot_pareto(cfg, out, result, name)
    _emit(lines)
    return EXIT_OK


def cmd_pareto(args) -> int:
    cfg, out = _setup(args)
    s = cfg.sweep
    try:
        spec = SweepSpec(MAX_THRUST, s.thrust_grid, cfg.scenario, cfg.quadratic, cfg.constants,
                         cfg.solver, s.warm_start, s.parallel)
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}") from None
    return _run_sweep(spec, out, cfg, "pareto", s.refine and not args.no_refine)


def cmd_engines(args) -> int:
    cfg, out = _setup(args)
    s = cfg.sweep
    try:
        spec = SweepSpec(ENGINE_COUNT, s.count_grid, cfg.scenario, cfg.cluster, cfg.constants,
                         cfg.solver, s.warm_start, s.parallel)
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}") from None
    return _run_sweep(spec, out, cfg, "engines", refine=False)


def _stored_isp(cfg: RunConfig, table, isp) -> float:
    if isp is not None:
        if not isp > 0:
            raise ConfigError("--isp must be positive")
        return isp
    if cfg.engine_case == 1:
        return cfg.cluster.per_engine_isp
    # a fuel-optimal profile reaches full thrust, so the peak identifies the engine
    return _engine(cfg, float(np.max(table["T_N"]))).isp


def cmd_propagate(args) -> int:
    cfg, out = _setup(args)
    table = tables.read_trajectory(args.trajectory)
    isp = _stored_isp(cfg, table, args.isp)
    consts = cfg.scenario.constants_for(cfg.constants)
    try:
        traj = repropagate(table.times, table.states, table.controls, isp, consts)
    except PropagationAbort as exc:
        print(f"propagation aborted: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    # sample at the node times for a like-for-like table
    dense = np.column_stack([np.interp(table.times, traj.times, traj.states[:, j])
                             for j in range(7)])
    dense[-1] = traj.states[-1]
    s, c = dense, table.controls
    R = cfg.constants.radius
    prop = tables.TrajectoryTable(dict(zip(tables.TRAJECTORY_COLUMNS, (
        table.times, s[:, 0], s[:, 0] - R, s[:, 1], s[:, 2], s[:, 3], s[:, 4], s[:, 5],
        s[:, 6], c[:, 0], c[:, 1], c[:, 2]))))
    tables.write_trajectory(prop, out / "propagated.csv")
    d = traj.states[-1] - table.states[-1]
    lines = [f"isp_s={isp:.9g}",
             f"terminal_altitude_error_m={abs(d[0]):.6g}",
             f"terminal_velocity_error_ms={float(np.linalg.norm(d[3:6])):.6g}",
             f"propellant_difference_kg={-d[6]:.6g}"]
    _emit(lines)
    return EXIT_OK


def cmd_check(args) -> int:
    cfg, out = _setup(args)
    sc = cfg.scenario
    if args.trajectory is not None:
        table = tables.read_trajectory(args.trajectory)
        isp = _stored_isp(cfg, table, None)
        t_max = (cfg.cluster.total_max_thrust if cfg.engine_case == 1
                 else float(np.max(table["T_N"])))
        engine = _engine(cfg, t_max)
        if len(table) != sc.nodes:
            sc = dataclasses.replace(sc, nodes=len(table))
        engine = EngineCharacterization(engine.max_thrust, isp, engine.dry_mass)
        problem = transcribe(sc, engine, cfg.constants)
        sol = extract_solution(problem, problem.pack(
            table.states, table.controls, float(table.times[-1] - table.times[0])))
        solver_ok = True
    else:
        engine = _engine(cfg, args.thrust)
        problem = transcribe(sc, engine, cfg.constants)
        sol = solve_scenario(sc, engine, cfg.constants, cfg.solver)
        solver_ok = sol.converged
    nlp = problem.nlp()
    grad = check_gradients(nlp, initial_guess(problem, sc))
    lines = [f"gradient_check_rel_error={grad.worst:.3e}",
             f"gradient_check_pass={str(grad.worst < 1e-4).lower()}",
             f"solver_status={sol.status}",
             f"max_defect={sol.max_defect:.3e}",
             f"defect_pass={str(sol.max_defect <= cfg.solver.constraint_tol).lower()}"]
    ok = solver_ok and grad.worst < 1e-4 and sol.max_defect <= cfg.solver.constraint_tol
    if sol.converged:
        report = verify_solution(sol, sc, engine, cfg.constants)
        lines += report.lines()
        ok = ok and report.passed
    tables.write_report(out / "check.txt", lines)
    _emit(lines)
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_plot(args) -> int:
    cfg, out = _setup(args)
    traj = args.trajectory
    par = args.pareto
    if traj is None and par is None:
        traj = out / "trajectory.csv"
        par = out / "pareto.csv"
        if not Path(traj).exists() and not Path(par).exists():
            raise OSError(f"no trajectory.csv or pareto.csv in {out}")
        traj = traj if Path(traj).exists() else None
        par = par if Path(par).exists() else None
    from .plotting import plot_pareto, plot_trajectory
    written = []
    if traj is not None:
        written += plot_trajectory(tables.read_trajectory(traj), out)
    if par is not None:
        result = tables.read_pareto(par)
        written.append(plot_pareto(result, out, Path(par).stem))
    _emit(f"wrote {p}" for p in written)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "pareto": cmd_pareto, "engines": cmd_engines,
            "propagate": cmd_propagate, "check": cmd_check, "plot": cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_INVALID
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, tables.TableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
