"""Run configuration read from TOML.

Every section and key is optional; absent keys take the defaults below.
Unknown keys are rejected so that a typo cannot silently fall back to a
default. Layout::

    [constants]   mu, radius, omega, g0
    [scenario]    any ScenarioSpec field (tf_bounds as a two-element array)
    [engine]      case = 1 | 2, then at most one of the sub-tables
    [engine.cluster]    n, per_engine_max_thrust, per_engine_isp, per_engine_dry_mass
    [engine.quadratic]  m0_eng, c1, c2, isp0, d1, d2, valid_thrust_range
    [solver]      any SolverConfig field
    [sweep]       thrust_min, thrust_max, thrust_step, count_min, count_max,
                  warm_start, parallel, refine, refine_iterations
    [output]      directory, plots
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import MoonConstants
from .engines import ClusterEngineModel, QuadraticEngineModel
from .nlp import SolverConfig
from .transcription import ScenarioSpec


class ConfigError(ValueError):
    """Malformed or invalid configuration document."""


@dataclass(frozen=True)
class SweepSettings:
    thrust_min: float = 4000.0
    thrust_max: float = 32000.0
    thrust_step: float = 2000.0
    count_min: int = 5
    count_max: int = 30
    warm_start: bool = False
    parallel: int = 1
    refine: bool = True
    refine_iterations: int = 20

    def __post_init__(self):
        if not 0 < self.thrust_min <= self.thrust_max:
            raise ValueError("need 0 < thrust_min <= thrust_max")
        if not self.thrust_step > 0:
            raise ValueError("thrust_step must be positive")
        if not 1 <= self.count_min <= self.count_max:
            raise ValueError("need 1 <= count_min <= count_max")
        if self.parallel < 1:
            raise ValueError("parallel must be >= 1")
        if self.refine_iterations < 0:
            raise ValueError("refine_iterations must be >= 0")

    @property
    def thrust_grid(self) -> tuple[float, ...]:
        n = int(round((self.thrust_max - self.thrust_min) / self.thrust_step))
        grid = [self.thrust_min + k * self.thrust_step for k in range(n + 1)]
        return tuple(t for t in grid if t <= self.thrust_max * (1 + 1e-12))

    @property
    def count_grid(self) -> tuple[int, ...]:
        return tuple(range(self.count_min, self.count_max + 1))


@dataclass(frozen=True)
class OutputSettings:
    directory: str = "results"
    plots: bool = True


@dataclass(frozen=True)
class RunConfig:
    constants: MoonConstants = field(default_factory=MoonConstants)
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    engine_case: int = 2
    cluster: ClusterEngineModel = field(default_factory=ClusterEngineModel)
    quadratic: QuadraticEngineModel = field(default_factory=QuadraticEngineModel)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    @property
    def engine(self) -> ClusterEngineModel | QuadraticEngineModel:
        return self.cluster if self.engine_case == 1 else self.quadratic


_SECTIONS = ("constants", "scenario", "engine", "solver", "sweep", "output")
_CONSTANT_KEYS = ("mu", "radius", "omega", "g0")
_TUPLE_FIELDS = {"tf_bounds", "valid_thrust_range"}


def _types(cls) -> dict[str, type]:
    out = {}
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else None
        out[f.name] = type(default) if default is not None else float
    return out


def _coerce(section: str, key: str, value, kind: type):
    where = f"{section}.{key}"
    if key in _TUPLE_FIELDS:
        if (not isinstance(value, list) or len(value) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                           for v in value)):
            raise ConfigError(f"{where}: expected an array of two numbers")
        return (float(value[0]), float(value[1]))
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    return value


def _build(cls, section: str, table: dict, allowed=None, exclude=()):
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}] must be a table")
    types = _types(cls)
    allowed = set(allowed or types) - set(exclude)
    kwargs = {}
    for key, value in table.items():
        if key not in allowed:
            raise ConfigError(f"{section}.{key}: unknown key (allowed: {', '.join(sorted(allowed))})")
        kind = types[key]
        if key == "seed":
            kind = int
        kwargs[key] = _coerce(section, key, value, kind)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def load_config(text: str) -> RunConfig:
    """Parse and validate a configuration document; pure in ``text``."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None
    for key in doc:
        if key not in _SECTIONS:
            raise ConfigError(f"{key}: unknown section (allowed: {', '.join(_SECTIONS)})")

    consts = _build(MoonConstants, "constants", doc.get("constants", {}), _CONSTANT_KEYS)
    scenario = _build(ScenarioSpec, "scenario", doc.get("scenario", {}))
    solver = _build(SolverConfig, "solver", doc.get("solver", {}))
    sweep = _build(SweepSettings, "sweep", doc.get("sweep", {}))
    output = _build(OutputSettings, "output", doc.get("output", {}))

    eng = doc.get("engine", {})
    if not isinstance(eng, dict):
        raise ConfigError("[engine] must be a table")
    for key in eng:
        if key not in ("case", "cluster", "quadratic"):
            raise ConfigError(f"engine.{key}: unknown key (allowed: case, cluster, quadratic)")
    if "cluster" in eng and "quadratic" in eng:
        raise ConfigError("engine: both [engine.cluster] and [engine.quadratic] are set; "
                          "exactly one engine case may be active")
    implied = 1 if "cluster" in eng else 2 if "quadratic" in eng else None
    case = eng.get("case", implied or 2)
    if case not in (1, 2) or isinstance(case, bool):
        raise ConfigError(f"engine.case: must be 1 (cluster) or 2 (quadratic), got {case!r}")
    if implied is not None and case != implied:
        raise ConfigError(f"engine.case = {case} conflicts with the "
                          f"[engine.{'cluster' if implied == 1 else 'quadratic'}] table")
    cluster = _build(ClusterEngineModel, "engine.cluster", eng.get("cluster", {}))
    quadratic = _build(QuadraticEngineModel, "engine.quadratic", eng.get("quadratic", {}))
    return RunConfig(consts, scenario, case, cluster, quadratic, solver, sweep, output)


def load_config_file(path: str | Path) -> RunConfig:
    """Read ``path``; the literal ``"default"`` yields the built-in defaults."""
    if str(path) == "default":
        return RunConfig()
    text = Path(path).read_text(encoding="utf-8")
    return load_config(text)
