import math

import numpy as np
import pytest

from lunar_pareto import io as tables
from lunar_pareto.cli import main
from lunar_pareto.config import ConfigError, RunConfig, load_config, load_config_file
from lunar_pareto.dynamics import MoonConstants
from lunar_pareto.engines import ClusterEngineModel, QuadraticEngineModel
from lunar_pareto.nlp import Status
from lunar_pareto.pareto import ParetoPoint, ParetoResult
from lunar_pareto.plotting import ground_track, plot_pareto, plot_trajectory

GOLDEN_HEADER = "t_s,r_m,alt_m,theta_rad,phi_rad,w_ms,u_ms,v_ms,m_kg,T_N,alpha_rad,beta_rad"


# --------------------------------------------------------------------------
# configuration


def test_empty_document_gives_defaults():
    cfg = load_config("")
    assert cfg == RunConfig()
    assert load_config_file("default") == cfg
    assert cfg.engine_case == 2
    assert cfg.scenario.initial_altitude == 30000 and cfg.scenario.initial_mass == 4000
    assert cfg.sweep.thrust_grid == tuple(float(t) for t in range(4000, 32001, 2000))
    assert cfg.sweep.count_grid == tuple(range(5, 31))


def test_default_engine_tables():
    cfg = RunConfig()
    assert cfg.quadratic == QuadraticEngineModel(2.229, 0.006288, -7.109e-8, 311.3, -5.976e-4,
                                                 4.755e-9)
    c = cfg.cluster
    assert (c.per_engine_max_thrust, c.per_engine_isp, c.per_engine_dry_mass) == (900, 310, 8)


def test_full_document():
    cfg = load_config("""
[constants]
omega = 0.0
[scenario]
planar = true
nodes = 40
tf_bounds = [60, 1500]
[engine]
case = 1
[engine.cluster]
n = 12
[solver]
max_outer = 30
[sweep]
count_min = 8
count_max = 12
parallel = 2
[output]
directory = "out"
plots = false
""")
    assert cfg.constants == MoonConstants(omega=0.0)
    assert cfg.scenario.planar and cfg.scenario.nodes == 40
    assert cfg.scenario.tf_bounds == (60.0, 1500.0)
    assert cfg.engine == ClusterEngineModel(12)
    assert cfg.solver.max_outer == 30
    assert cfg.sweep.count_grid == (8, 9, 10, 11, 12)
    assert cfg.output.directory == "out" and not cfg.output.plots


@pytest.mark.parametrize("text, match", [
    ("[engine.cluster]\nn = 3\n[engine.quadratic]\nc1 = 0.01\n", "exactly one"),
    ("[engine]\ncase = 2\n[engine.cluster]\nn = 3\n", "conflicts"),
    ("[engine]\ncase = 3\n", "case"),
    ("[scenario]\nnodez = 40\n", "unknown key"),
    ("[solver]\nmax_outer = 2.5\n", "integer"),
    ("[scenario]\nplanar = 1\n", "true or false"),
    ("[scenery]\n", "unknown section"),
    ("[scenario]\nnodes = 5\n", "nodes"),
    ("[sweep]\nthrust_min = 50000\n", "thrust_min"),
])
def test_invalid_documents(text, match):
    with pytest.raises(ConfigError, match=match):
        load_config(text)


def test_parse_error_reports_line():
    with pytest.raises(ConfigError, match="line 3"):
        load_config("[scenario]\nnodes = 40\nplanar = = true\n")


# --------------------------------------------------------------------------
# CSV tables


def test_trajectory_csv_header_and_roundtrip(tmp_path, baseline_planar):
    *_, consts, _, sol = baseline_planar
    path = tables.write_trajectory(sol, tmp_path / "t.csv", consts.radius)
    assert path.read_text().splitlines()[0] == GOLDEN_HEADER
    back = tables.read_trajectory(path)
    assert len(back) == 60
    np.testing.assert_allclose(back.states, sol.states, rtol=1e-8)
    np.testing.assert_allclose(back.controls, sol.controls, rtol=1e-8, atol=1e-9)
    assert back.moon_radius == pytest.approx(consts.radius, rel=1e-9)


@pytest.mark.parametrize("content", ["", "t_s,r_m\n1,2\n", GOLDEN_HEADER + "\n",
                                     GOLDEN_HEADER + "\n" + ",".join(["1"] * 11) + "\n",
                                     GOLDEN_HEADER + "\n" + ",".join(["x"] * 12) + "\n"])
def test_malformed_trajectory_csv(tmp_path, content):
    p = tmp_path / "bad.csv"
    p.write_text(content)
    with pytest.raises(tables.TableError):
        tables.read_trajectory(p)


def test_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError, match="nope.csv"):
        tables.read_trajectory(tmp_path / "nope.csv")


def _point(t, payload, status=str(Status.CONVERGED)):
    ok = status == str(Status.CONVERGED)
    return ParetoPoint(t, 1, 300.0, 50.0, payload + 50.0 if ok else math.nan,
                       payload if ok else math.nan, t / 4000.0, status, 900.0 if ok else math.nan)


def test_pareto_csv_roundtrip(tmp_path):
    res = ParetoResult([_point(4000, 1700.123456789), _point(8000, 2100.5),
                        _point(12000, 2000, "infeasible")])
    path = tables.write_pareto(res, tmp_path / "p.csv")
    text = path.read_text().splitlines()
    assert text[0] == ("t_max_N,n_engines,isp_s,engine_mass_kg,final_mass_kg,"
                       "effective_payload_kg,thrust_to_mass0_ms2,t_f_s,status,is_maximizer")
    assert text[1].split(",")[5] == "1700.12346"
    back = tables.read_pareto(path)
    assert back.maximizer == 1
    assert tables.write_pareto(back, tmp_path / "q.csv").read_text() == path.read_text()


# --------------------------------------------------------------------------
# plots


def test_trajectory_plots_are_deterministic(tmp_path, baseline_planar):
    *_, consts, _, sol = baseline_planar
    table = tables.trajectory_table(sol, consts.radius)
    a = plot_trajectory(table, tmp_path / "a")
    b = plot_trajectory(table, tmp_path / "b")
    assert len(a) == 6
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
        assert pa.read_bytes().startswith(b"<?xml")


def test_planar_ground_track_has_no_crossrange(baseline_planar):
    *_, consts, _, sol = baseline_planar
    down, cross = ground_track(tables.trajectory_table(sol, consts.radius))
    assert np.max(np.abs(cross)) < 1e-3
    assert abs(down[0]) < 1e-6 and down[-1] > 100e3
    assert np.all(np.diff(down) >= -1e-6)


def test_single_point_pareto_plot(tmp_path):
    res = ParetoResult([_point(12000, 2137.0)])
    path = plot_pareto(res, tmp_path)
    assert path.exists() and b"<svg" in path.read_bytes()


# --------------------------------------------------------------------------
# command line


def test_plot_on_missing_csv_exits_3(tmp_path, capsys):
    code = main(["plot", "--out", str(tmp_path), "--trajectory", str(tmp_path / "none.csv")])
    assert code == 3
    assert "none.csv" in capsys.readouterr().err


def test_plot_without_inputs_exits_3(tmp_path):
    assert main(["plot", "--out", str(tmp_path)]) == 3


@pytest.mark.parametrize("argv", [["solve", "--bogus"], ["fly"], [], ["solve", "--nodes", "x"]])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "usage" in capsys.readouterr().err


def test_invalid_config_exits_1(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[scenario]\nnodez = 3\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "nodez" in capsys.readouterr().err


def test_pareto_with_no_converged_point_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[solver]\nmax_outer = 1\nmax_inner = 2\n"
                   "[sweep]\nthrust_min = 8000\nthrust_max = 10000\n"
                   "[scenario]\nnodes = 12\n")
    code = main(["pareto", "--config", str(cfg), "--planar", "--out", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    assert "t_max=8000 N" in err and "t_max=10000 N" in err
    assert (tmp_path / "o" / "pareto.csv").exists()


def test_plot_rerenders_from_csv(tmp_path, baseline_planar):
    *_, consts, _, sol = baseline_planar
    tables.write_trajectory(sol, tmp_path / "trajectory.csv", consts.radius)
    tables.write_pareto(ParetoResult([_point(4000, 1700.0), _point(8000, 2100.0),
                                      _point(12000, 2000.0)]), tmp_path / "pareto.csv")
    assert main(["plot", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "pareto.svg").exists() and (tmp_path / "altitude.svg").exists()


def test_propagate_stored_trajectory(tmp_path, baseline_planar, capsys):
    _, engine, consts, _, sol = baseline_planar
    path = tables.write_trajectory(sol, tmp_path / "trajectory.csv", consts.radius)
    assert main(["propagate", str(path), "--planar", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "propagated.csv").exists()
    out = capsys.readouterr().out
    assert "altitude_error_m=" in out
