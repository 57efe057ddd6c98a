"""Translational lander dynamics in the moon-centred rotating spherical frame.

State ordering used throughout the package is ``(r, theta, phi, w, u, v, m)``:
radius, longitude, latitude, radial / east / north velocity and mass.
Controls are ``(T, alpha, beta)``: thrust magnitude, in-plane pointing angle
measured from the local east axis toward north, and elevation of the thrust
vector above the local horizontal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import solve_ivp

POLE_GUARD = 1e-6

STATE_NAMES = ("r", "theta", "phi", "w", "u", "v", "m")
CONTROL_NAMES = ("T", "alpha", "beta")


class DomainError(ValueError):
    """Raised when a state lies on a singularity of the spherical equations."""


class PropagationAbort(RuntimeError):
    """Propagation stopped early (surface impact or a singularity guard)."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time:.6g} s")
        self.time = time


@dataclass(frozen=True)
class MoonConstants:
    """Physical constants for the lunar problem (SI units).

    ``flat_gravity`` replaces the inverse-square term ``mu/r**2`` with a
    constant acceleration when set; it exists for the 1-D verification
    scenarios and is off by default.
    """

    mu: float = 4.9028e12
    omega: float = 2.6617e-6
    radius: float = 1.7374e6
    g0: float = 9.81
    flat_gravity: float | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.omega >= 0:
            raise ValueError("omega must be non-negative")
        if not self.g0 > 0:
            raise ValueError("g0 must be positive")
        if self.flat_gravity is not None and not self.flat_gravity > 0:
            raise ValueError("flat_gravity must be positive when set")

    @property
    def surface_gravity(self) -> float:
        return self.mu / self.radius**2

    def non_rotating(self) -> "MoonConstants":
        return replace(self, omega=0.0)


class LanderState(NamedTuple):
    r: float
    theta: float
    phi: float
    w: float
    u: float
    v: float
    m: float


class ThrustCommand(NamedTuple):
    T: float
    alpha: float
    beta: float


class StateDerivative(NamedTuple):
    r_dot: float
    theta_dot: float
    phi_dot: float
    w_dot: float
    u_dot: float
    v_dot: float
    m_dot: float


def rates(x, c, isp, consts: MoonConstants) -> np.ndarray:
    """Vectorised equations of motion.

    ``x`` has shape ``(7, ...)`` and ``c`` shape ``(3, ...)``; ``isp`` may be
    a scalar or broadcastable array. No singularity checks are made here.
    """
    r, _, phi, w, u, v, m = x
    T, alpha, beta = c
    mu, om = consts.mu, consts.omega
    sp, cp = np.sin(phi), np.cos(phi)
    tp = sp / cp
    sa, ca = np.sin(alpha), np.cos(alpha)
    sb, cb = np.sin(beta), np.cos(beta)
    grav = consts.flat_gravity if consts.flat_gravity is not None else mu / r**2

    r_dot = w
    theta_dot = u / (r * cp)
    phi_dot = v / r
    w_dot = (T * sb / m - grav + (u * u + v * v) / r
             + (-2.0 * u * om * cp + r * om * om * cp * cp))
    u_dot = (T * ca * cb / m + (-u * w + u * v * tp) / r
             + (-2.0 * w * om * cp + 2.0 * v * om * sp))
    v_dot = (T * sa * cb / m + (-v * w - u * u * tp) / r
             + (-2.0 * u * om * sp - r * om * om * sp * cp))
    m_dot = -T / (isp * consts.g0)
    return np.array(np.broadcast_arrays(r_dot, theta_dot, phi_dot, w_dot,
                                        u_dot, v_dot, m_dot), dtype=float)


def rates_jacobian(x, c, isp, consts: MoonConstants) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of :func:`rates`.

    Returns ``(A, B)`` with shapes ``(7, 7, ...)`` and ``(7, 3, ...)`` holding
    d(rates)/d(state) and d(rates)/d(control).
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    r, _, phi, w, u, v, m = x
    T, alpha, beta = c
    mu, om = consts.mu, consts.omega
    shape = np.broadcast(r, T).shape
    A = np.zeros((7, 7) + shape)
    B = np.zeros((7, 3) + shape)

    sp, cp = np.sin(phi), np.cos(phi)
    tp = sp / cp
    sec2 = 1.0 / (cp * cp)
    sa, ca = np.sin(alpha), np.cos(alpha)
    sb, cb = np.sin(beta), np.cos(beta)
    r2 = r * r
    dgrav_dr = 0.0 if consts.flat_gravity is not None else 2.0 * mu / (r2 * r)

    A[0, 3] = 1.0

    A[1, 0] = -u / (r2 * cp)
    A[1, 2] = u * sp / (r * cp * cp)
    A[1, 4] = 1.0 / (r * cp)

    A[2, 0] = -v / r2
    A[2, 5] = 1.0 / r

    A[3, 0] = dgrav_dr - (u * u + v * v) / r2 + om * om * cp * cp
    A[3, 2] = 2.0 * u * om * sp - 2.0 * r * om * om * cp * sp
    A[3, 4] = 2.0 * u / r - 2.0 * om * cp
    A[3, 5] = 2.0 * v / r
    A[3, 6] = -T * sb / (m * m)
    B[3, 0] = sb / m
    B[3, 2] = T * cb / m

    A[4, 0] = -(-u * w + u * v * tp) / r2
    A[4, 2] = u * v * sec2 / r + 2.0 * w * om * sp + 2.0 * v * om * cp
    A[4, 3] = -u / r - 2.0 * om * cp
    A[4, 4] = (-w + v * tp) / r
    A[4, 5] = u * tp / r + 2.0 * om * sp
    A[4, 6] = -T * ca * cb / (m * m)
    B[4, 0] = ca * cb / m
    B[4, 1] = -T * sa * cb / m
    B[4, 2] = -T * ca * sb / m

    A[5, 0] = -(-v * w - u * u * tp) / r2 - om * om * sp * cp
    A[5, 2] = -u * u * sec2 / r - 2.0 * u * om * cp - r * om * om * (cp * cp - sp * sp)
    A[5, 3] = -v / r
    A[5, 4] = -2.0 * u * tp / r - 2.0 * om * sp
    A[5, 5] = -w / r
    A[5, 6] = -T * sa * cb / (m * m)
    B[5, 0] = sa * cb / m
    B[5, 1] = T * ca * cb / m
    B[5, 2] = -T * sa * sb / m

    B[6, 0] = -1.0 / (isp * consts.g0)
    return A, B


def _guard(state: Sequence[float], consts: MoonConstants) -> None:
    r, phi = state[0], state[2]
    if not r > 0:
        raise DomainError(f"radius must be positive, got r={r}")
    if abs(phi) >= math.pi / 2 - POLE_GUARD:
        raise DomainError(f"latitude {phi} too close to a pole")


def state_derivative(state, cmd, isp: float, consts: MoonConstants) -> StateDerivative:
    """Time derivative of a single lander state under a thrust command."""
    state = LanderState(*state)
    cmd = ThrustCommand(*cmd)
    _guard(state, consts)
    if not isp > 0:
        raise ValueError("isp must be positive")
    return StateDerivative(*rates(np.array(state), np.array(cmd), isp, consts))


def dynamics_jacobian(state, cmd, isp: float, consts: MoonConstants) -> np.ndarray:
    """Jacobian of :func:`state_derivative` w.r.t. ``(state, cmd)``, shape (7, 10)."""
    state = LanderState(*state)
    cmd = ThrustCommand(*cmd)
    _guard(state, consts)
    if not isp > 0:
        raise ValueError("isp must be positive")
    A, B = rates_jacobian(np.array(state), np.array(cmd), isp, consts)
    return np.hstack([A, B])


ControlSchedule = Callable[[float], Sequence[float]]


class Trajectory(NamedTuple):
    times: np.ndarray
    states: np.ndarray  # shape (K, 7)

    def state(self, i: int) -> LanderState:
        return LanderState(*self.states[i])


def _check_sample(t: float, x: np.ndarray, consts: MoonConstants) -> None:
    if x[0] < consts.radius:
        raise PropagationAbort("surface impact", t)
    if abs(x[2]) >= math.pi / 2 - POLE_GUARD:
        raise PropagationAbort("pole singularity", t)
    if not np.all(np.isfinite(x)):
        raise PropagationAbort("non-finite state", t)


def _rk4(f, x0, t0, t1, step, consts):
    n = max(1, int(math.ceil((t1 - t0) / step - 1e-12)))
    h = (t1 - t0) / n
    times = t0 + h * np.arange(n + 1)
    times[-1] = t1
    out = np.empty((n + 1, 7))
    out[0] = x = np.asarray(x0, dtype=float)
    for i in range(n):
        t = times[i]
        k1 = f(t, x)
        k2 = f(t + h / 2, x + h / 2 * k1)
        k3 = f(t + h / 2, x + h / 2 * k2)
        k4 = f(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        _check_sample(times[i + 1], x, consts)
        out[i + 1] = x
    return times, out


def _adaptive(f, x0, t0, t1, rtol, consts):
    def impact(t, x):
        return x[0] - consts.radius
    impact.terminal = True
    impact.direction = -1

    sol = solve_ivp(f, (t0, t1), np.asarray(x0, dtype=float), method="DOP853",
                    rtol=rtol, atol=rtol * 1e-3, events=impact)
    if sol.status == 1:
        raise PropagationAbort("surface impact", float(sol.t_events[0][0]))
    if sol.status != 0:
        raise PropagationAbort(f"integrator failure ({sol.message})", float(sol.t[-1]))
    for t, x in zip(sol.t, sol.y.T):
        _check_sample(t, x, consts)
    return sol.t, sol.y.T


def propagate(initial, control: ControlSchedule, isp: float, consts: MoonConstants,
              t_span: float, *, step: float | None = None, rtol: float = 1e-10,
              breakpoints: Sequence[float] | None = None) -> Trajectory:
    """Integrate the equations of motion from ``t=0`` to ``t=t_span``.

    With ``step`` set a classical fixed-step RK4 is used; otherwise an
    adaptive 8(5,3) Dormand-Prince pair at relative tolerance ``rtol``.
    ``breakpoints`` are times where the control schedule is not smooth;
    integration is restarted there so the adaptive pair never steps across
    a kink.

    Raises :class:`PropagationAbort` on surface impact or a pole crossing.
    """
    if not t_span > 0:
        raise ValueError("t_span must be positive")
    if not isp > 0:
        raise ValueError("isp must be positive")
    x0 = np.asarray(initial, dtype=float)
    _check_sample(0.0, x0, consts)

    def f(t, x):
        return rates(x, np.asarray(control(t), dtype=float), isp, consts)

    knots = [0.0]
    if breakpoints is not None:
        knots += sorted(b for b in breakpoints if 0.0 < b < t_span)
    knots.append(float(t_span))

    times, states = [np.zeros(1)], [x0[None, :]]
    x = x0
    for a, b in zip(knots[:-1], knots[1:]):
        if b - a <= 1e-12 * t_span:
            continue
        if step is not None:
            t, y = _rk4(f, x, a, b, step, consts)
        else:
            t, y = _adaptive(f, x, a, b, rtol, consts)
        times.append(t[1:])
        states.append(y[1:])
        x = y[-1]
    times = np.concatenate(times)
    times[-1] = t_span
    return Trajectory(times, np.vstack(states))
