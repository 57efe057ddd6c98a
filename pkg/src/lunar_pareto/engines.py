"""Engine sizing models: identical-engine clusters and a single engine whose
dry mass and specific impulse are quadratic in its maximum thrust."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class EngineCharacterization:
    """What the trajectory problem needs to know about the propulsion system."""

    max_thrust: float
    isp: float
    dry_mass: float

    def __post_init__(self):
        for name in ("max_thrust", "isp", "dry_mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class ClusterEngineModel:
    """``n`` identical engines throttled together."""

    n: int = 13
    per_engine_max_thrust: float = 900.0
    per_engine_isp: float = 310.0
    per_engine_dry_mass: float = 8.0

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ValueError(f"engine count must be an integer >= 1, got {self.n!r}")
        for name in ("per_engine_max_thrust", "per_engine_isp", "per_engine_dry_mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def total_max_thrust(self) -> float:
        return self.n * self.per_engine_max_thrust

    @property
    def total_dry_mass(self) -> float:
        return self.n * self.per_engine_dry_mass

    def with_count(self, n: int) -> "ClusterEngineModel":
        return ClusterEngineModel(n, self.per_engine_max_thrust, self.per_engine_isp,
                                  self.per_engine_dry_mass)


@dataclass(frozen=True)
class QuadraticEngineModel:
    """Single engine with dry mass and Isp fitted as quadratics in max thrust.

    The default coefficients put the dry-mass parabola's vertex near 44.2 kN,
    so the valid range stops at 40 kN to stay on the increasing branch.
    """

    m0_eng: float = 2.229
    c1: float = 0.006288
    c2: float = -7.109e-08
    isp0: float = 311.3
    d1: float = -0.0005976
    d2: float = 4.755e-09
    valid_thrust_range: tuple[float, float] = (0.0, 40000.0)

    def __post_init__(self):
        lo, hi = self.valid_thrust_range
        if not (0.0 <= lo < hi):
            raise ValueError("valid_thrust_range must satisfy 0 <= low < high")
        # both are quadratics, so positivity at the ends plus the vertex suffices
        probes = [lo, hi]
        for a, b in ((self.c1, self.c2), (self.d1, self.d2)):
            if b != 0.0:
                vertex = -a / (2.0 * b)
                if lo < vertex < hi:
                    probes.append(vertex)
        for t in probes:
            if not self._mass(t) > 0 or not self._isp(t) > 0:
                raise ValueError(f"engine mass/Isp not positive at {t} N")
        for t in (lo, hi):
            if self.c1 + 2.0 * self.c2 * t < 0:
                raise ValueError(
                    f"engine mass decreases at {t} N; shrink valid_thrust_range "
                    "below the quadratic's vertex")

    def _mass(self, t: float) -> float:
        return self.m0_eng + self.c1 * t + self.c2 * t * t

    def _isp(self, t: float) -> float:
        return self.isp0 + self.d1 * t + self.d2 * t * t

    def _check(self, t_max: float) -> None:
        lo, hi = self.valid_thrust_range
        if not lo <= t_max <= hi:
            raise ValueError(f"t_max={t_max} N outside valid range [{lo}, {hi}]")

    def characterize(self, t_max: float) -> EngineCharacterization:
        return EngineCharacterization(t_max, engine_isp(self, t_max), engine_mass(self, t_max))


def resolve_cluster(model: ClusterEngineModel) -> EngineCharacterization:
    return EngineCharacterization(model.total_max_thrust, model.per_engine_isp,
                                  model.total_dry_mass)


def engine_mass(model: QuadraticEngineModel, t_max: float) -> float:
    """Dry mass in kg of an engine sized for ``t_max`` newtons."""
    model._check(t_max)
    return model._mass(t_max)


def engine_isp(model: QuadraticEngineModel, t_max: float) -> float:
    """Specific impulse in seconds of an engine sized for ``t_max`` newtons."""
    model._check(t_max)
    return model._isp(t_max)


def effective_payload(final_mass: float, engine_dry_mass: float) -> float:
    if not final_mass > 0:
        raise ValueError("final_mass must be positive")
    return final_mass - engine_dry_mass
