import dataclasses
import math

import numpy as np
import pytest

from lunar_pareto.dynamics import MoonConstants, propagate
from lunar_pareto.engines import EngineCharacterization
from lunar_pareto.nlp import Status
from lunar_pareto.oracle import (NoSolutionError, VerticalScenario, repropagate,
                                 solve_vertical_bangbang, verify_solution,
                                 vertical_scenario_spec)
from lunar_pareto.transcription import (ScenarioSpec, extract_solution, solve_scenario,
                                        transcribe)


def _forward_euler_landing(scn, coast, dt=1e-4):
    """Brute-force fixed-step simulation: free fall, then full thrust until v = 0."""
    h, v, m, t = scn.h0, scn.v0, scn.m0, 0.0
    mdot = scn.mass_flow
    # closed-form coast, then semi-implicit steps through the burn
    h -= scn.v0 * coast + 0.5 * scn.g * coast**2
    v += scn.g * coast
    while v > 0:
        a = scn.g - scn.t_max / (m - 0.5 * mdot * dt)
        v_new = v + a * dt
        if v_new <= 0:
            frac = v / (v - v_new)
            h -= 0.5 * (v + 0) * frac * dt
            t += frac * dt
            break
        h -= 0.5 * (v + v_new) * dt
        v = v_new
        m -= mdot * dt
        t += dt
    return t * mdot, h


def test_bangbang_reaches_pad_at_rest():
    sol = solve_vertical_bangbang(VerticalScenario())
    assert abs(sol.residual_altitude) < 1e-6
    assert abs(sol.residual_velocity) < 1e-6
    assert sol.coast_duration > 0 and sol.burn_duration > 0
    assert sol.bracket[1] - sol.bracket[0] <= 1e-12


def test_bangbang_matches_fine_fixed_step_simulation():
    scn = VerticalScenario()
    sol = solve_vertical_bangbang(scn)
    prop, h_end = _forward_euler_landing(scn, sol.coast_duration)
    assert prop == pytest.approx(sol.propellant, abs=0.01)
    assert abs(h_end) < 0.05


def test_bangbang_tends_to_rocket_equation_without_gravity():
    scn = VerticalScenario(h0=5000.0, v0=100.0, g=1e-9)
    sol = solve_vertical_bangbang(scn)
    ideal = scn.m0 * (1 - math.exp(-scn.v0 / (scn.isp * scn.g0)))
    assert sol.propellant == pytest.approx(ideal, rel=1e-6)


def test_bangbang_bisection_is_converged():
    scn = VerticalScenario(v0=20.0)
    a = solve_vertical_bangbang(scn, tol=1e-9)
    b = solve_vertical_bangbang(scn, tol=1e-10)
    assert abs(a.propellant - b.propellant) < 1e-3


def test_hover_incapable_engine_rejected():
    with pytest.raises(ValueError, match="cannot brake"):
        VerticalScenario(t_max=6000.0, m0=4000.0)


def test_unreachable_pad_raises():
    with pytest.raises(NoSolutionError):
        solve_vertical_bangbang(VerticalScenario(h0=10.0, v0=100.0))


def test_vertical_collocation_matches_bangbang():
    scn = VerticalScenario()
    spec, consts, engine = vertical_scenario_spec(scn)
    sol = solve_scenario(spec, engine, consts)
    assert sol.converged
    burned = scn.m0 - sol.final_mass
    assert burned == pytest.approx(solve_vertical_bangbang(scn).propellant, rel=0.01)


# --------------------------------------------------------------------------
# re-propagation oracle


def _orbit_solution(nodes=40, tf=600.0):
    """A thrust-free circular orbit packed as though it were a converged solution."""
    consts = MoonConstants().non_rotating()
    scenario = ScenarioSpec(nodes=nodes)
    engine = EngineCharacterization(12000.0, 305.0, 60.0)
    r = consts.radius + 30000
    x0 = [r, 0.0, 0.0, 0.0, math.sqrt(consts.mu / r), 0.0, 4000.0]
    t = np.linspace(0, tf, nodes)
    traj = propagate(x0, lambda s: (0, 0, 0), engine.isp, consts, tf, rtol=1e-12,
                     breakpoints=t[1:-1])
    idx = [int(np.argmin(np.abs(traj.times - s))) for s in t]
    problem = transcribe(scenario, engine, consts)
    z = problem.pack(traj.states[idx], np.zeros((nodes, 3)), tf)
    return extract_solution(problem, z), scenario, engine, consts


def test_oracle_agrees_with_exact_orbit():
    sol, scenario, engine, consts = _orbit_solution()
    rep = verify_solution(sol, scenario, engine, consts)
    assert rep.altitude_error < 1e-3
    assert rep.velocity_error < 1e-6
    assert rep.propellant_difference == 0.0
    assert np.max(rep.segment_errors) < 1e-3


def test_oracle_localises_corrupted_node():
    sol, scenario, engine, consts = _orbit_solution()
    states = sol.states.copy()
    states[17, 0] += 200.0
    bad = dataclasses.replace(sol, states=states)
    rep = verify_solution(bad, scenario, engine, consts)
    assert rep.worst_segment in (16, 17)
    assert rep.segment_errors[rep.worst_segment] > 100.0


def test_oracle_refuses_unconverged_solution():
    sol, scenario, engine, consts = _orbit_solution()
    with pytest.raises(ValueError):
        verify_solution(dataclasses.replace(sol, status=Status.MAX_ITERATIONS), scenario,
                        engine, consts)


def test_propagation_abort_gives_failing_report():
    sol, scenario, engine, consts = _orbit_solution()
    states = sol.states.copy()
    states[0, 3] = -600.0  # plunge straight into the ground from the first node
    rep = verify_solution(dataclasses.replace(sol, states=states), scenario, engine, consts,
                          per_segment=False)
    assert not rep.passed
    assert "aborted" in rep.message


def test_baseline_solution_passes_oracle(baseline_planar):
    scenario, engine, consts, _, sol = baseline_planar
    rep = verify_solution(sol, scenario, engine, consts)
    assert rep.altitude_tol == pytest.approx(29.2, rel=1e-12)
    assert rep.passed, rep.lines()
    traj = repropagate(sol.times, sol.states, sol.controls, engine.isp,
                       scenario.constants_for(consts))
    assert traj.times[-1] == pytest.approx(sol.tf, rel=1e-12)
