import pytest

from lunar_pareto.dynamics import MoonConstants
from lunar_pareto.engines import QuadraticEngineModel
from lunar_pareto.transcription import ScenarioSpec, solve_scenario, transcribe


@pytest.fixture(scope="session")
def baseline_planar():
    """Converged planar descent with the quadratic engine sized at 12 kN."""
    scenario = ScenarioSpec(planar=True, nodes=60)
    engine = QuadraticEngineModel().characterize(12000.0)
    consts = MoonConstants()
    sol = solve_scenario(scenario, engine, consts)
    return scenario, engine, consts, transcribe(scenario, engine, consts), sol


_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion's verdict for the end-of-run summary."""
    def record(k: int, ok: bool, detail: str) -> bool:
        _CRITERIA[k] = (bool(ok), detail)
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, 9):
        if k not in _CRITERIA:
            terminalreporter.write_line(f"criterion {k}: NOT RUN")
            continue
        ok, detail = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}")
