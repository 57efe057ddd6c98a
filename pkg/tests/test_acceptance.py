"""End-to-end acceptance checks at their stated tolerances.

Each test records a one-line verdict, printed in the pytest terminal summary.
The sweeps are slow (tens of minutes in total on one core).
"""

import math
import time

import numpy as np
import pytest

from lunar_pareto.cli import main
from lunar_pareto.dynamics import MoonConstants
from lunar_pareto.engines import ClusterEngineModel, QuadraticEngineModel, engine_isp, engine_mass
from lunar_pareto.nlp import solve
from lunar_pareto.oracle import (VerticalScenario, solve_vertical_bangbang, verify_solution,
                                 vertical_scenario_spec)
from lunar_pareto.pareto import ENGINE_COUNT, SweepSpec, refine_maximum, sweep
from lunar_pareto.transcription import ScenarioSpec, solve_scenario

GRID_SPACING = 2000.0


def test_criterion_1_engine_model_regression(criterion):
    q = QuadraticEngineModel()
    m, isp = engine_mass(q, 900.0), engine_isp(q, 900.0)
    ok = 7.76 <= m <= 8.24 and 308.5 <= isp <= 311.5
    criterion(1, ok, f"engine_mass(900)={m:.4f} kg engine_isp(900)={isp:.3f} s")
    assert ok


def test_criterion_2_inner_solver_feasibility(criterion):
    scenario = ScenarioSpec(planar=True, nodes=60)
    engine = QuadraticEngineModel().characterize(12000.0)
    consts = MoonConstants()
    t0 = time.perf_counter()
    sol = solve_scenario(scenario, engine, consts)
    elapsed = time.perf_counter() - t0
    last = sol.states[-1]
    alt = last[0] - consts.radius
    terminal = bool(np.all(np.abs(last[3:6]) < 0.01)) and abs(alt - 800.0) <= 1.0
    rep = verify_solution(sol, scenario, engine, consts) if sol.converged else None
    oracle_ok = rep is not None and rep.altitude_error < 1e-3 * 29200.0
    ok = sol.converged and sol.max_defect <= 1e-6 and terminal and oracle_ok and elapsed < 30
    criterion(2, ok, (f"status={sol.status} defect={sol.max_defect:.2e} alt={alt:.3f} m "
                      f"|w,u,v|max={np.max(np.abs(last[3:6])):.2e} m/s "
                      f"oracle_alt_err={rep.altitude_error if rep else math.nan:.3f} m "
                      f"time={elapsed:.1f} s"))
    assert ok


def test_criterion_3_bangbang_equivalence(criterion):
    scn = VerticalScenario(h0=2000.0, v0=0.0, g=1.62, t_max=12000.0, isp=305.0, m0=4000.0)
    spec, consts, engine = vertical_scenario_spec(scn)
    t0 = time.perf_counter()
    sol = solve_scenario(spec, engine, consts)
    elapsed = time.perf_counter() - t0
    ref = solve_vertical_bangbang(scn).propellant
    burned = scn.m0 - sol.final_mass
    rel = abs(burned - ref) / ref
    ok = sol.converged and rel < 0.01 and elapsed < 30
    criterion(3, ok, (f"collocation={burned:.3f} kg bang-bang={ref:.3f} kg "
                      f"rel_diff={rel:.2e} time={elapsed:.1f} s"))
    assert ok


@pytest.fixture(scope="module")
def case2_sweep():
    spec = SweepSpec(scenario=ScenarioSpec(planar=True, nodes=60), parallel=4)
    t0 = time.perf_counter()
    result = sweep(spec)
    elapsed = time.perf_counter() - t0
    return spec, result, elapsed


def test_criterion_4_final_mass_saturation(criterion, case2_sweep):
    _, result, elapsed = case2_sweep
    pts = result.converged_points
    t = np.array([p.t_max for p in pts])
    m = np.array([p.final_mass for p in pts])
    drops = np.diff(m)
    worst_drop = float(-np.min(drops)) if drops.size else 0.0
    monotone = len(pts) == len(result.points) and worst_drop <= 0.2
    mass = dict(zip(t, m))
    early = mass.get(12000.0, math.nan) - mass.get(4000.0, math.nan)
    late = mass.get(32000.0, math.nan) - mass.get(24000.0, math.nan)
    saturating = late < 0.2 * early
    ok = monotone and saturating and elapsed < 600
    peak = float(t[np.argmax(m)]) if m.size else math.nan
    criterion(4, ok, (f"converged={len(pts)}/{len(result.points)} "
                      f"largest_decrease={worst_drop:.2f} kg (peak at {peak:g} N) "
                      f"gain_4to12={early:.2f} kg gain_24to32={late:.2f} kg "
                      f"sweep_time={elapsed:.0f} s"))
    assert monotone, f"final mass decreases by {worst_drop:.2f} kg beyond {peak:g} N"
    assert saturating
    assert elapsed < 600


def _sign_changes(values):
    smooth = np.convolve(values, np.ones(3) / 3, mode="valid")
    s = np.sign(np.diff(smooth))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def test_criterion_5_interior_payload_maximum(criterion, case2_sweep):
    spec, result, _ = case2_sweep
    pts = result.converged_points
    payload = np.array([p.effective_payload for p in pts])
    changes = _sign_changes(payload)
    rise_fall = changes == 1 and not result.boundary
    refined = refine_maximum(result, spec)
    a, b = refined.bracket
    width_ok = b - a <= 0.01 * GRID_SPACING
    ratio = refined.best.thrust_to_mass0
    ok = rise_fall and 2.0 <= ratio <= 4.5 and width_ok
    criterion(5, ok, (f"sign_changes={changes} maximizer={refined.best.t_max:.1f} N "
                      f"thrust_to_mass={ratio:.3f} m/s^2 "
                      f"payload={refined.best.effective_payload:.2f} kg "
                      f"bracket_width={b - a:.2f} N"))
    assert ok


def test_criterion_6_engine_count_optimum(criterion):
    spec = SweepSpec(mode=ENGINE_COUNT, grid=tuple(range(5, 31)),
                     scenario=ScenarioSpec(planar=True, nodes=60),
                     engine=ClusterEngineModel(), parallel=4)
    t0 = time.perf_counter()
    result = sweep(spec)
    elapsed = time.perf_counter() - t0
    i = result.maximizer
    best = result.best
    nbrs = [result.points[j] for j in (i - 1, i + 1) if 0 <= j < len(result.points)]
    beats = all(p.converged and best.effective_payload >= p.effective_payload for p in nbrs)
    ratio = best.n * 900.0 / 4000.0
    ok = (not result.boundary and len(nbrs) == 2 and beats and 2.0 <= ratio <= 4.5
          and elapsed < 900)
    criterion(6, ok, (f"n*={best.n} thrust_to_mass={ratio:.3f} m/s^2 "
                      f"payload={best.effective_payload:.2f} kg "
                      f"converged={len(result.converged_points)}/{len(result.points)} "
                      f"time={elapsed:.0f} s"))
    assert ok


def test_criterion_7_property_suites(criterion):
    from test_dynamics import C, C0, _fd_jacobian, _random_states
    from test_nlp import (_rosenbrock_circle_oracle, bound_active, circle_rosenbrock,
                          line_quadratic)
    from test_transcription import _observed_order

    from lunar_pareto.dynamics import dynamics_jacobian, propagate

    R = C.radius
    x0 = np.array([R + 30000, 0.1, 0.2, 0.0, 1700.0, 50.0, 4000.0])
    traj = propagate(x0, lambda t: (0, 0, 0), 310, C0, 3000.0, rtol=1e-10)
    s = traj.states
    e = 0.5 * (s[:, 3] ** 2 + s[:, 4] ** 2 + s[:, 5] ** 2) - C.mu / s[:, 0]
    drift = float(np.max(np.abs(e - e[0])) / abs(e[0]))

    rng = np.random.default_rng(2024)
    jac_err = 0.0
    for x, c in _random_states(rng, 100):
        J = dynamics_jacobian(x, c, 305.0, C)
        fd = _fd_jacobian(x, c, 305.0, C)
        scale = np.maximum(np.abs(fd).max(axis=1, keepdims=True), 1e-12)
        jac_err = max(jac_err, float(np.max(np.abs(J - fd) / scale)))

    trap = float(np.min(_observed_order("trapezoidal")))
    hs = float(np.min(_observed_order("hermite_simpson")))

    nlp_err = max(abs(solve(bound_active(), [5.0])[1].objective - 1.0),
                  abs(solve(line_quadratic(), [0.0, 0.0])[1].objective - 2.0),
                  abs(solve(circle_rosenbrock(), [0.5, 0.5])[1].objective
                      - _rosenbrock_circle_oracle()))

    ok = drift < 1e-8 and jac_err < 1e-4 and trap >= 1.9 and hs >= 3.5 and nlp_err < 1e-6
    criterion(7, ok, (f"energy_drift={drift:.1e} jacobian_err={jac_err:.1e} "
                      f"order_trap={trap:.3f} order_hs={hs:.3f} nlp_err={nlp_err:.1e}"))
    assert ok


def test_criterion_8_determinism(criterion, tmp_path):
    cfg = tmp_path / "small.toml"
    cfg.write_text("[sweep]\nthrust_min = 10000\nthrust_max = 14000\nrefine = false\n")
    runs = {}
    for name in ("a", "b"):
        out = tmp_path / f"solve_{name}"
        assert main(["solve", "--planar", "--no-plots", "--out", str(out)]) == 0
        runs[name] = (out / "trajectory.csv").read_bytes()
    same_traj = runs["a"] == runs["b"]
    tables = {}
    for k in (1, 4):
        out = tmp_path / f"pareto_{k}"
        assert main(["pareto", "--config", str(cfg), "--planar", "--no-plots",
                     "--parallel", str(k), "--out", str(out)]) == 0
        tables[k] = (out / "pareto.csv").read_bytes()
    same_pareto = tables[1] == tables[4]
    ok = same_traj and same_pareto
    criterion(8, ok, (f"trajectory_identical={str(same_traj).lower()} "
                      f"pareto_parallel1_vs_4_identical={str(same_pareto).lower()}"))
    assert ok
