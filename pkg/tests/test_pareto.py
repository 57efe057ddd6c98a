import math

import numpy as np
import pytest

from lunar_pareto.engines import ClusterEngineModel, QuadraticEngineModel, engine_mass
from lunar_pareto.nlp import Status
from lunar_pareto.pareto import (ENGINE_COUNT, PARETO_COLUMNS, InnerOutcome, ParetoPoint,
                                 ParetoResult, SweepFailure, SweepSpec, parse_table,
                                 refine_maximum, sweep, tabulate)

Q = QuadraticEngineModel()
OK = str(Status.CONVERGED)


def saturating(scenario, engine, consts, config, guess):
    """Stand-in whose final mass saturates like the descent problem's."""
    return InnerOutcome(2300.0 - 3e9 / engine.max_thrust**2, 600.0, OK)


def increasing(scenario, engine, consts, config, guess):
    return InnerOutcome(1000.0 + engine.max_thrust, 600.0, OK)


def failing(scenario, engine, consts, config, guess):
    return InnerOutcome(math.nan, math.nan, str(Status.INFEASIBLE), "no feasible descent")


def weak_engines_fail(scenario, engine, consts, config, guess):
    if engine.max_thrust / scenario.initial_mass <= 1.62:
        raise ValueError("cannot hover")
    return InnerOutcome(2300.0 - 1e9 / engine.max_thrust**2, 600.0, OK)


def _payload(t):
    return 2300.0 - 3e9 / t**2 - (Q.m0_eng + Q.c1 * t + Q.c2 * t**2)


def _dense_argmax():
    t = np.linspace(4000, 32000, 2_800_001)
    return float(t[np.argmax(_payload(t))])


def test_stub_sweep_maximum_matches_brute_force():
    res = sweep(SweepSpec(inner=saturating))
    assert len(res.points) == 15
    t_star = _dense_argmax()
    grid = np.array([p.t_max for p in res.points])
    assert res.best.t_max == grid[np.argmin(np.abs(grid - t_star))]
    assert not res.boundary and not res.adjacent_failure
    for p in res.points:
        assert p.effective_payload == pytest.approx(_payload(p.t_max), rel=1e-12)
        assert p.engine_dry_mass == engine_mass(Q, p.t_max)


def test_refinement_finds_vertex_within_half_percent():
    spec = SweepSpec(inner=saturating)
    res = refine_maximum(sweep(spec), spec)
    t_star = _dense_argmax()
    assert abs(res.best.t_max - t_star) / t_star < 0.005
    a, b = res.bracket
    assert b - a <= 0.01 * 2000 + 1e-9
    assert a <= t_star <= b
    assert len(res.points) > 15


def test_refinement_refuses_edge_maximum():
    spec = SweepSpec(inner=increasing)
    res = sweep(spec)
    assert res.boundary and res.best.t_max == 32000
    with pytest.raises(ValueError, match="edge"):
        refine_maximum(res, spec)


def test_single_point_grid_is_boundary():
    res = sweep(SweepSpec(grid=(12000.0,), inner=saturating))
    assert res.maximizer == 0 and res.boundary


def test_zero_refinement_is_noop():
    spec = SweepSpec(inner=saturating)
    res = sweep(spec)
    assert refine_maximum(res, spec, iterations=0) is res


def test_ties_resolve_to_smallest_engine():
    pts = [ParetoPoint(t, 1, 300.0, 50.0, 2100.0, 2050.0, t / 4000, OK, 600.0)
           for t in (16000.0, 8000.0, 12000.0)]
    res = ParetoResult(pts)
    assert res.best.t_max == 8000.0
    assert res.boundary


def test_constant_offset_does_not_move_maximizer():
    base = sweep(SweepSpec(inner=saturating))

    def shifted(*args):
        o = saturating(*args)
        return InnerOutcome(o.final_mass + 500.0, o.t_f, o.status)
    assert sweep(SweepSpec(inner=shifted)).best.t_max == base.best.t_max


def test_parallel_sweep_equals_serial():
    serial = sweep(SweepSpec(inner=saturating))
    par = sweep(SweepSpec(inner=saturating, parallel=3))
    assert tabulate(par) == tabulate(serial)


def test_all_failures_raise_with_diagnostics():
    with pytest.raises(SweepFailure) as info:
        sweep(SweepSpec(grid=(4000.0, 8000.0), inner=failing))
    assert len(info.value.result.points) == 2
    assert "no feasible descent" in str(info.value)


def test_engine_count_sweep_marks_weak_clusters_failed():
    res = sweep(SweepSpec(mode=ENGINE_COUNT, grid=tuple(range(1, 31)),
                          engine=ClusterEngineModel(1), inner=weak_engines_fail))
    first = res.points[0]
    assert first.n == 1 and not first.converged
    assert first.status == str(Status.NUMERICAL_FAILURE)
    assert "cannot hover" in first.message
    assert math.isnan(first.effective_payload)
    assert res.best.n > 7
    assert all(p.isp_used == 310 for p in res.points)


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(grid=(8000.0, 4000.0))
    with pytest.raises(ValueError):
        SweepSpec(mode=ENGINE_COUNT)
    with pytest.raises(ValueError):
        SweepSpec(grid=(4000.0, 50000.0))
    with pytest.raises(ValueError):
        SweepSpec(parallel=0)


def test_table_roundtrip():
    res = sweep(SweepSpec(inner=saturating))
    rows = tabulate(res)
    assert tuple(rows[0]) == PARETO_COLUMNS
    assert len(rows) == 16
    assert sum(r[-1] == "true" for r in rows[1:]) == 1
    back = parse_table(rows)
    assert back.maximizer == res.maximizer
    assert tabulate(back) == rows


def test_table_rejects_wrong_maximizer_flag():
    rows = tabulate(sweep(SweepSpec(inner=saturating)))
    for r in rows[1:]:
        r[-1] = "false"
    rows[1][-1] = "true"
    with pytest.raises(ValueError):
        parse_table(rows)


def test_empty_result_tabulates_header_only():
    assert tabulate(ParetoResult([])) == [list(PARETO_COLUMNS)]


def test_failed_point_formats_as_nan():
    p = ParetoPoint(900.0, 1, 310.0, 8.0, math.nan, math.nan, 0.225, "infeasible", math.nan)
    rows = tabulate(ParetoResult([p], ENGINE_COUNT))
    assert rows[1][4] == "nan" and rows[1][-1] == "false"
