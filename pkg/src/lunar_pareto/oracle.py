"""Independent checks for the inner solver.

Two oracles live here. :func:`solve_vertical_bangbang` gives the classical
free-fall-then-full-thrust landing for a 1-D vertical drop in constant
gravity. :func:`verify_solution` re-integrates a collocation solution's
control schedule with an adaptive high-order integrator and compares the
result with the solver's own nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import MoonConstants, PropagationAbort, Trajectory, propagate, rates
from .engines import EngineCharacterization
from .transcription import ScenarioSpec, TrajectorySolution

ORACLE_RTOL = 1e-10


class NoSolutionError(ValueError):
    """The vertical scenario cannot be landed even with immediate ignition."""


@dataclass(frozen=True)
class VerticalScenario:
    """1-D vertical drop. ``v0`` is the downward speed, ``h0`` the height above the pad."""

    h0: float = 2000.0
    v0: float = 0.0
    g: float = 1.62
    t_max: float = 12000.0
    isp: float = 305.0
    m0: float = 4000.0
    g0: float = 9.81

    def __post_init__(self):
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        if not self.g >= 0:
            raise ValueError("g must be non-negative")
        if not (self.t_max > 0 and self.isp > 0 and self.m0 > 0):
            raise ValueError("t_max, isp and m0 must be positive")
        if not self.t_max / self.m0 > self.g:
            raise ValueError(
                f"thrust-to-mass {self.t_max / self.m0:.6g} m/s^2 does not exceed "
                f"gravity {self.g} m/s^2; the lander cannot brake")

    @property
    def mass_flow(self) -> float:
        return self.t_max / (self.isp * self.g0)


@dataclass(frozen=True)
class BangBangSolution:
    coast_duration: float
    burn_duration: float
    propellant: float
    ignition_speed: float
    residual_velocity: float
    residual_altitude: float
    bracket: tuple[float, float]


def _burn_to_stop(scn: VerticalScenario, coast: float):
    """Full-thrust burn after ``coast`` seconds of free fall.

    Returns ``(burn_duration, altitude_at_stop, speed_at_ignition, speed_at_stop)``. The
    altitude may be negative when ignition came too late.
    """
    v_i = scn.v0 + scn.g * coast
    h_i = scn.h0 - scn.v0 * coast - 0.5 * scn.g * coast**2
    mdot = scn.mass_flow
    # stop before the tanks run dry in the model's sense
    t_dry = 0.999 * scn.m0 / mdot

    def f(t, y):
        m = scn.m0 - mdot * t
        return [-y[1], scn.g - scn.t_max / m]

    def stopped(t, y):
        return y[1]
    stopped.terminal = True
    stopped.direction = -1

    sol = solve_ivp(f, (0.0, t_dry), [h_i, v_i], method="DOP853", rtol=1e-13, atol=1e-12,
                    events=stopped)
    if sol.status != 1:
        raise NoSolutionError("burn cannot null the descent speed before the mass runs out")
    t_b = float(sol.t_events[0][0])
    h_b, v_b = (float(v) for v in sol.y_events[0][0])
    return t_b, h_b, v_i, v_b


def solve_vertical_bangbang(scn: VerticalScenario, tol: float = 1e-12,
                            max_iter: int = 200) -> BangBangSolution:
    """Coast then full thrust so that speed and height reach zero together.

    Bisection on the ignition time: igniting earlier stops the lander above
    the pad, later below it. ``tol`` is the bracket width in seconds.
    """
    _, h_lo, _, _ = _burn_to_stop(scn, 0.0)
    if h_lo < 0:
        raise NoSolutionError(
            f"immediate ignition still reaches the pad moving (stops {-h_lo:.3g} m below)")
    # latest sensible ignition: free fall all the way to the pad
    hi = (-scn.v0 + math.sqrt(scn.v0**2 + 2 * scn.g * scn.h0)) / scn.g if scn.g > 0 \
        else scn.h0 / max(scn.v0, 1e-300)
    lo = 0.0
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        _, h_mid, _, _ = _burn_to_stop(scn, mid)
        if h_mid > 0:
            lo = mid
        else:
            hi = mid
    coast = 0.5 * (lo + hi)
    burn, h_end, v_i, v_end = _burn_to_stop(scn, coast)
    return BangBangSolution(coast, burn, scn.mass_flow * burn, v_i, v_end, h_end, (lo, hi))


def vertical_scenario_spec(scn: VerticalScenario, nodes: int = 60,
                           pad_altitude: float = 100.0) -> tuple[ScenarioSpec, MoonConstants,
                                                                 EngineCharacterization]:
    """Express a vertical drop as a planar descent problem with flat gravity.

    The pad sits ``pad_altitude`` above the reference radius; with flat
    gravity and no horizontal motion that offset has no effect.
    """
    free_fall = math.sqrt(2 * scn.h0 / scn.g) if scn.g > 0 else scn.h0 / max(scn.v0, 1.0)
    spec = ScenarioSpec(
        initial_altitude=pad_altitude + scn.h0, initial_vertical_velocity=-scn.v0,
        initial_horizontal_velocity=0.0, initial_mass=scn.m0,
        longitude_free=False, latitude_free=False, final_altitude=pad_altitude,
        planar=True, nodes=nodes, tf_bounds=(1.0, 4.0 * free_fall + 60.0),
        length_unit=scn.h0)
    consts = MoonConstants(omega=0.0, g0=scn.g0, flat_gravity=scn.g)
    # dry mass does not enter the trajectory problem
    engine = EngineCharacterization(scn.t_max, scn.isp, 1.0)
    return spec, consts, engine


# --------------------------------------------------------------------------
# re-propagation


def linear_control(times, controls):
    """Piecewise-linear control schedule through the node values."""
    times = np.asarray(times, dtype=float)
    controls = np.asarray(controls, dtype=float)

    def u(t):
        return np.array([np.interp(t, times, controls[:, j]) for j in range(controls.shape[1])])
    return u


def repropagate(times, states, controls, isp: float, consts: MoonConstants,
                rtol: float = ORACLE_RTOL) -> Trajectory:
    """Integrate from the first node under the interpolated node controls."""
    times = np.asarray(times, dtype=float)
    return propagate(states[0], linear_control(times, controls), isp, consts,
                     float(times[-1] - times[0]), rtol=rtol, breakpoints=times[1:-1])


@dataclass
class OracleReport:
    """Terminal mismatch between the solver's last node and the re-integrated state.

    Errors are absolute, in metres, m/s and kg. ``segment_errors`` holds the
    position mismatch at each node after integrating only that segment from
    the previous node, so a single bad node shows up as a local spike.
    """

    altitude_error: float
    velocity_error: float
    downrange_error: float
    propellant_difference: float
    altitude_tol: float
    velocity_tol: float
    propellant_tol: float
    segment_errors: np.ndarray = field(default_factory=lambda: np.zeros(0))
    message: str = ""

    @property
    def worst_segment(self) -> int:
        return int(np.argmax(self.segment_errors)) if self.segment_errors.size else -1

    @property
    def passed(self) -> bool:
        return (math.isfinite(self.altitude_error)
                and self.altitude_error < self.altitude_tol
                and self.velocity_error < self.velocity_tol
                and abs(self.propellant_difference) < self.propellant_tol)

    def lines(self) -> list[str]:
        return [
            f"altitude_error_m={self.altitude_error:.6g}",
            f"velocity_error_ms={self.velocity_error:.6g}",
            f"downrange_error_m={self.downrange_error:.6g}",
            f"propellant_difference_kg={self.propellant_difference:.6g}",
            f"worst_segment={self.worst_segment}",
            f"oracle_pass={str(self.passed).lower()}",
        ] + ([f"message={self.message}"] if self.message else [])


def _segment_errors(times, states, controls, isp, consts, rtol):
    u = linear_control(times, controls)
    errs = np.empty(len(times) - 1)
    for k in range(len(times) - 1):
        t0, t1 = float(times[k]), float(times[k + 1])
        sol = solve_ivp(lambda t, x: rates(x, u(t), isp, consts), (t0, t1), states[k],
                        method="DOP853", rtol=rtol, atol=rtol * 1e-3)
        xe = sol.y[:, -1]
        r = states[k + 1, 0]
        errs[k] = math.hypot(xe[0] - r, r * (xe[1] - states[k + 1, 1]))
    return errs


def verify_solution(sol: TrajectorySolution, scenario: ScenarioSpec,
                    engine: EngineCharacterization, consts: MoonConstants, *,
                    rtol: float = ORACLE_RTOL, velocity_tol: float = 1.0,
                    propellant_tol: float = 0.5, altitude_rel_tol: float = 1e-3,
                    per_segment: bool = True) -> OracleReport:
    """Re-integrate ``sol`` and compare with its terminal node.

    The altitude tolerance is ``altitude_rel_tol`` times the commanded
    altitude drop. A propagation abort yields a failing report carrying the
    abort message.
    """
    if not sol.converged:
        raise ValueError("verify_solution needs a converged solution")
    c = scenario.constants_for(consts)
    drop = scenario.initial_altitude - scenario.final_altitude
    alt_tol = altitude_rel_tol * drop
    isp = engine.isp
    seg = (_segment_errors(sol.times, sol.states, sol.controls, isp, c, rtol)
           if per_segment else np.zeros(0))
    try:
        traj = repropagate(sol.times, sol.states, sol.controls, isp, c, rtol)
    except PropagationAbort as exc:
        return OracleReport(math.inf, math.inf, math.inf, math.inf, alt_tol, velocity_tol,
                            propellant_tol, seg, f"propagation aborted: {exc}")
    xe, xs = traj.states[-1], sol.states[-1]
    alt_err = abs(xe[0] - xs[0])
    vel_err = float(np.linalg.norm(xe[3:6] - xs[3:6]))
    down_err = abs(xs[0] * (xe[1] - xs[1]))
    prop = (sol.states[0, 6] - xs[6]) - (sol.states[0, 6] - xe[6])
    return OracleReport(alt_err, vel_err, down_err, float(prop), alt_tol, velocity_tol,
                        propellant_tol, seg)
