"""Outer engine-sizing layer.

Each grid point fixes the propulsion system (a thrust level for the
quadratic single-engine model, or an engine count for a cluster), solves
the minimum-fuel descent for it, and scores it by effective payload: final
mass minus engine dry mass.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dynamics import MoonConstants
from .engines import (ClusterEngineModel, EngineCharacterization, QuadraticEngineModel,
                      effective_payload, resolve_cluster)
from .nlp import SolverConfig, Status
from .transcription import ScenarioSpec, solve_scenario

log = logging.getLogger(__name__)

MAX_THRUST = "max_thrust"
ENGINE_COUNT = "engine_count"
MODES = (MAX_THRUST, ENGINE_COUNT)

DEFAULT_THRUST_GRID = tuple(float(t) for t in range(4000, 32001, 2000))
DEFAULT_COUNT_GRID = tuple(range(5, 31))

PARETO_COLUMNS = ("t_max_N", "n_engines", "isp_s", "engine_mass_kg", "final_mass_kg",
                  "effective_payload_kg", "thrust_to_mass0_ms2", "t_f_s", "status",
                  "is_maximizer")


class SweepFailure(RuntimeError):
    """Every grid point failed; ``result`` carries the per-point diagnostics."""

    def __init__(self, result: "ParetoResult"):
        lines = [f"  {p.label}: {p.status} {p.message}".rstrip() for p in result.points]
        super().__init__("no grid point converged:\n" + "\n".join(lines))
        self.result = result


@dataclass(frozen=True)
class InnerOutcome:
    """What the sweep needs back from one inner solve."""

    final_mass: float
    t_f: float
    status: str
    message: str = ""
    decision: np.ndarray | None = field(default=None, repr=False, compare=False)


InnerSolver = Callable[[ScenarioSpec, EngineCharacterization, MoonConstants, SolverConfig,
                        "np.ndarray | None"], InnerOutcome]


def collocation_inner(scenario: ScenarioSpec, engine: EngineCharacterization,
                      consts: MoonConstants, config: SolverConfig, guess=None) -> InnerOutcome:
    """Default inner solver: the collocation NLP."""
    sol = solve_scenario(scenario, engine, consts, config, guess)
    msg = sol.report.message if sol.report is not None else ""
    return InnerOutcome(sol.final_mass, sol.tf, str(sol.status), msg, sol.decision)


@dataclass(frozen=True)
class SweepSpec:
    """One outer sweep.

    ``grid`` holds thrust levels in newtons for ``max_thrust`` mode or engine
    counts for ``engine_count`` mode. ``inner`` replaces the collocation
    solver, which tests use to sweep closed-form stand-ins; it must be a
    module-level function when ``parallel > 1``.
    """

    mode: str = MAX_THRUST
    grid: tuple = DEFAULT_THRUST_GRID
    scenario: ScenarioSpec = field(default_factory=lambda: ScenarioSpec(planar=True))
    engine: QuadraticEngineModel | ClusterEngineModel = field(
        default_factory=QuadraticEngineModel)
    consts: MoonConstants = field(default_factory=MoonConstants)
    solver: SolverConfig = field(default_factory=SolverConfig)
    warm_start: bool = False
    parallel: int = 1
    inner: InnerSolver | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        grid = tuple(self.grid)
        if not grid:
            raise ValueError("grid must not be empty")
        if any(not b > a for a, b in zip(grid[:-1], grid[1:])):
            raise ValueError("grid must be strictly increasing")
        if self.mode == ENGINE_COUNT:
            if not isinstance(self.engine, ClusterEngineModel):
                raise ValueError("engine_count mode needs a ClusterEngineModel")
            if any(isinstance(n, bool) or int(n) != n or n < 1 for n in grid):
                raise ValueError("engine counts must be positive integers")
            grid = tuple(int(n) for n in grid)
        else:
            if not isinstance(self.engine, QuadraticEngineModel):
                raise ValueError("max_thrust mode needs a QuadraticEngineModel")
            if not grid[0] > 0:
                raise ValueError("thrust grid must be positive")
            grid = tuple(float(t) for t in grid)
            for t in (grid[0], grid[-1]):
                self.engine._check(t)
        object.__setattr__(self, "grid", grid)
        if int(self.parallel) != self.parallel or self.parallel < 1:
            raise ValueError("parallel must be a positive integer")

    def characterize(self, value) -> tuple[EngineCharacterization, int]:
        """Engine seen by the trajectory problem at one grid value, and its count."""
        if self.mode == ENGINE_COUNT:
            n = int(value)
            return resolve_cluster(self.engine.with_count(n)), n
        return self.engine.characterize(float(value)), 1


@dataclass(frozen=True)
class ParetoPoint:
    t_max: float
    n: int
    isp_used: float
    engine_dry_mass: float
    final_mass: float
    effective_payload: float
    thrust_to_mass0: float
    status: str
    t_f: float
    message: str = field(default="", compare=False)

    @property
    def converged(self) -> bool:
        return self.status == str(Status.CONVERGED)

    @property
    def label(self) -> str:
        return f"n={self.n} ({self.t_max:g} N)" if self.n != 1 else f"t_max={self.t_max:g} N"


def make_point(engine: EngineCharacterization, n: int, m0: float,
               outcome: InnerOutcome) -> ParetoPoint:
    ok = outcome.status == str(Status.CONVERGED) and math.isfinite(outcome.final_mass)
    final = outcome.final_mass if ok else math.nan
    payload = effective_payload(final, engine.dry_mass) if ok else math.nan
    return ParetoPoint(engine.max_thrust, n, engine.isp, engine.dry_mass, final, payload,
                       engine.max_thrust / m0, outcome.status,
                       outcome.t_f if ok else math.nan, outcome.message)


@dataclass
class ParetoResult:
    """Sweep points ordered by thrust, plus the effective-payload maximizer.

    ``maximizer`` indexes ``points`` and is ``None`` when nothing converged.
    ``boundary`` is set when no converged point lies on one side of the
    maximizer, ``adjacent_failure`` when a neighbouring point did not
    converge; either means the optimum needs a closer look.
    """

    points: list[ParetoPoint]
    mode: str = MAX_THRUST
    maximizer: int | None = None
    boundary: bool = False
    adjacent_failure: bool = False
    bracket: tuple[float, float] | None = None

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: (p.t_max, p.n))
        self.maximizer, self.boundary, self.adjacent_failure = _locate_maximum(self.points)

    @property
    def best(self) -> ParetoPoint | None:
        return None if self.maximizer is None else self.points[self.maximizer]

    @property
    def converged_points(self) -> list[ParetoPoint]:
        return [p for p in self.points if p.converged]


def _locate_maximum(points: Sequence[ParetoPoint]):
    best = None
    for i, p in enumerate(points):
        # strict comparison keeps the smallest engine on ties
        if p.converged and (best is None or p.effective_payload > points[best].effective_payload):
            best = i
    if best is None:
        return None, False, False
    below = any(p.converged for p in points[:best])
    above = any(p.converged for p in points[best + 1:])
    nbrs = [points[j] for j in (best - 1, best + 1) if 0 <= j < len(points)]
    return best, not (below and above), any(not p.converged for p in nbrs)


# --------------------------------------------------------------------------
# sweeping


def _evaluate(spec: SweepSpec, value, guess=None) -> tuple[ParetoPoint, np.ndarray | None]:
    engine, n = spec.characterize(value)
    inner = spec.inner or collocation_inner
    try:
        outcome = inner(spec.scenario, engine, spec.consts, spec.solver, guess)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        outcome = InnerOutcome(math.nan, math.nan, str(Status.NUMERICAL_FAILURE),
                               f"{type(exc).__name__}: {exc}")
    point = make_point(engine, n, spec.scenario.initial_mass, outcome)
    log.info("%s: %s final_mass=%.6g payload=%.6g", point.label, point.status,
             point.final_mass, point.effective_payload)
    return point, (outcome.decision if point.converged else None)


def _evaluate_point(args) -> ParetoPoint:
    spec, value = args
    return _evaluate(spec, value)[0]


def _evaluate_many(spec: SweepSpec, values: Sequence) -> list[ParetoPoint]:
    if spec.warm_start:
        points, guess = [], None
        for v in values:
            p, z = _evaluate(spec, v, guess)
            points.append(p)
            if z is not None:
                guess = z
        return points
    if spec.parallel > 1 and len(values) > 1:
        workers = min(spec.parallel, len(values))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map preserves submission order, so the merge is deterministic
            return list(pool.map(_evaluate_point, [(spec, v) for v in values]))
    return [_evaluate(spec, v)[0] for v in values]


def sweep(spec: SweepSpec) -> ParetoResult:
    """Solve every grid point and locate the effective-payload maximizer.

    Raises :class:`SweepFailure` when no point converges.
    """
    if spec.warm_start and spec.parallel > 1:
        log.warning("warm start chains the grid points; running them sequentially")
    result = ParetoResult(_evaluate_many(spec, spec.grid), spec.mode)
    if result.maximizer is None:
        raise SweepFailure(result)
    if result.boundary:
        log.warning("maximizer %s lies on the edge of the converged grid", result.best.label)
    if result.adjacent_failure:
        log.warning("maximizer %s neighbours a failed point; review manually", result.best.label)
    return result


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def refine_maximum(result: ParetoResult, spec: SweepSpec, iterations: int = 20,
                   rel_width: float = 0.01) -> ParetoResult:
    """Golden-section search for the payload maximum between the grid neighbours.

    Stops once the bracket is narrower than ``rel_width`` times the smallest
    grid spacing around the incumbent, or after ``iterations`` new solves
    (at least two: the search opens with two interior probes).
    Evaluated points are merged into the returned result; failed solves
    count as infinitely bad.
    """
    if spec.mode != MAX_THRUST:
        raise ValueError("refinement applies to the continuous thrust sweep only")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if result.maximizer is None:
        raise ValueError("nothing converged; there is no maximum to refine")
    if result.boundary:
        raise ValueError(f"maximizer {result.best.label} is on the grid edge; extend the grid "
                         "instead of refining")
    if iterations == 0:
        return result

    i = result.maximizer
    pts = result.points
    a, x, b = pts[i - 1].t_max, pts[i].t_max, pts[i + 1].t_max
    target = rel_width * min(x - a, b - x)
    new: list[ParetoPoint] = []

    def f(t):
        p = _evaluate(spec, t)[0]
        new.append(p)
        return p.effective_payload if p.converged else -math.inf

    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    used = 2
    while b - a > target and used < iterations:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
        used += 1
    return ParetoResult(list(pts) + new, result.mode, bracket=(a, b))


# --------------------------------------------------------------------------
# tables


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.9g" % x
    return str(x)


def tabulate(result: ParetoResult) -> list[list[str]]:
    """Rows in the Pareto CSV schema, header first; every point is listed."""
    rows = [list(PARETO_COLUMNS)]
    for i, p in enumerate(result.points):
        rows.append([_fmt(v) for v in (
            p.t_max, p.n, p.isp_used, p.engine_dry_mass, p.final_mass, p.effective_payload,
            p.thrust_to_mass0, p.t_f, p.status, i == result.maximizer)])
    return rows


def parse_table(rows: Sequence[Sequence[str]], mode: str | None = None) -> ParetoResult:
    """Inverse of :func:`tabulate`.

    The maximizer is recomputed from the points; a row marked as maximizer
    that disagrees raises ``ValueError``. ``mode`` defaults to engine-count
    whenever any row has more than one engine.
    """
    rows = [list(r) for r in rows]
    if not rows or tuple(rows[0]) != PARETO_COLUMNS:
        raise ValueError(f"Pareto table header must be {','.join(PARETO_COLUMNS)}")
    points, marked = [], []
    for k, r in enumerate(rows[1:], start=2):
        if len(r) != len(PARETO_COLUMNS):
            raise ValueError(f"row {k}: expected {len(PARETO_COLUMNS)} fields, got {len(r)}")
        try:
            t, n, isp, dry, fm, pay, ttm, tf = (float(r[0]), int(r[1]), *map(float, r[2:8]))
        except ValueError as exc:
            raise ValueError(f"row {k}: {exc}") from None
        if r[9] not in ("true", "false"):
            raise ValueError(f"row {k}: is_maximizer must be true or false")
        points.append(ParetoPoint(t, n, isp, dry, fm, pay, ttm, r[8], tf))
        marked.append(r[9] == "true")
    if mode is None:
        mode = ENGINE_COUNT if any(p.n != 1 for p in points) else MAX_THRUST
    result = ParetoResult(points, mode)
    flagged = [i for i, m in enumerate(marked) if m]
    expected = [] if result.maximizer is None else [result.maximizer]
    if flagged != expected:
        raise ValueError("is_maximizer column disagrees with the tabulated payloads")
    return result
