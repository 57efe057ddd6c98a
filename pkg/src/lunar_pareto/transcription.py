"""Direct-collocation transcription of the minimum-fuel descent problem.

The decision vector is node-major: for each of the ``N`` nodes the seven
states followed by the three controls, then the final time as the last
entry (length ``10*N + 1``). Everything inside the NLP is nondimensional:
by default lengths in lunar radii (radius entering as altitude), speeds in
circular speed at the surface, mass in initial mass and thrust in initial
weight at the surface.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dynamics import MoonConstants, rates, rates_jacobian
from .engines import EngineCharacterization
from .nlp import NlpProblem, SolverConfig, SolverReport, Status, solve

SCHEMES = ("hermite_simpson", "trapezoidal")
NX, NU = 7, 3
NZ = NX + NU
# boundary rows are weighted so the constraint tolerance maps to centimetres
BOUNDARY_WEIGHT = 100.0
LAT_LIMIT = math.pi / 2 - 0.05


@dataclass(frozen=True)
class ScenarioSpec:
    """Boundary conditions, control bounds and mesh for one descent problem.

    Altitudes are measured from the mean lunar radius. ``min_throttle`` is
    the lower thrust bound as a fraction of the engine's maximum thrust.
    ``length_unit`` overrides the lunar radius as the NLP length scale, which
    small problems need so that the defect tolerance stays meaningful.
    """

    initial_altitude: float = 30000.0
    initial_vertical_velocity: float = 0.0
    initial_horizontal_velocity: float = 1688.0
    initial_cross_velocity: float = 0.0
    initial_mass: float = 4000.0
    initial_longitude: float = 0.0
    initial_latitude: float = 0.0
    longitude_free: bool = True
    latitude_free: bool = True
    final_altitude: float = 800.0
    target_longitude: float = 0.0
    target_latitude: float = 0.0
    min_throttle: float = 0.0
    alpha_max: float = math.pi
    beta_max: float = math.pi / 2
    planar: bool = False
    nodes: int = 60
    tf_bounds: tuple[float, float] = (50.0, 2000.0)
    scheme: str = "hermite_simpson"
    length_unit: float | None = None

    def __post_init__(self):
        if not self.initial_altitude > self.final_altitude > 0:
            raise ValueError("need initial_altitude > final_altitude > 0")
        if not self.initial_mass > 0:
            raise ValueError("initial_mass must be positive")
        if int(self.nodes) != self.nodes or self.nodes < 10:
            raise ValueError("nodes must be an integer >= 10")
        lo, hi = self.tf_bounds
        if not 0 < lo < hi:
            raise ValueError("tf_bounds must satisfy 0 < low < high")
        if not 0 <= self.min_throttle < 1:
            raise ValueError("min_throttle must lie in [0, 1)")
        if not 0 < self.alpha_max <= math.pi or not 0 < self.beta_max <= math.pi / 2:
            raise ValueError("alpha_max must lie in (0, pi], beta_max in (0, pi/2]")
        if self.length_unit is not None and not self.length_unit > 0:
            raise ValueError("length_unit must be positive when set")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        for lat in (self.initial_latitude, self.target_latitude):
            if abs(lat) >= LAT_LIMIT:
                raise ValueError(f"latitude {lat} rad too close to a pole")
        if self.planar:
            if self.initial_cross_velocity != 0:
                raise ValueError("planar mode requires zero initial cross velocity")
            if not self.latitude_free and self.initial_latitude != self.target_latitude:
                raise ValueError("planar mode requires initial latitude == target latitude")
            if abs(planar_azimuth(self)) > self.alpha_max:
                raise ValueError("planar mode needs alpha_max = pi to point thrust retrograde")

    def constants_for(self, consts: MoonConstants) -> MoonConstants:
        """Constants actually used for this scenario (rotation off when planar)."""
        return consts.non_rotating() if self.planar else consts


def planar_azimuth(scenario: ScenarioSpec) -> float:
    """Thrust azimuth used in planar mode: opposite the initial east velocity."""
    return math.pi if scenario.initial_horizontal_velocity > 0 else 0.0


@dataclass
class TrajectorySolution:
    times: np.ndarray
    states: np.ndarray  # (N, 7) physical units
    controls: np.ndarray  # (N, 3)
    tf: float
    final_mass: float
    objective: float
    status: Status
    iterations: int
    max_defect: float
    scheme: str
    isp: float
    decision: np.ndarray | None = field(default=None, repr=False)
    report: SolverReport | None = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def pitch(self) -> np.ndarray:
        """Thrust elevation above the local horizontal, rad."""
        return self.controls[:, 2]


class TranscribedProblem:
    """Collocation NLP for one scenario/engine pair. Immutable once built."""

    def __init__(self, scenario: ScenarioSpec, engine: EngineCharacterization,
                 consts: MoonConstants):
        self.scenario = scenario
        self.engine = engine
        self.consts = scenario.constants_for(consts)
        self.N = N = int(scenario.nodes)
        self.scheme = scenario.scheme
        self.dim = NZ * N + 1
        c = self.consts
        R = c.radius

        # characteristic units
        L = self.length_unit = scenario.length_unit or R
        g_ref = c.flat_gravity if c.flat_gravity is not None else c.mu / R**2
        self.speed_unit = math.sqrt(g_ref * L)
        self.time_unit = L / self.speed_unit
        self.mass_unit = scenario.initial_mass
        self.thrust_unit = scenario.initial_mass * g_ref
        # angles in units of the arc that spans one length unit on the surface
        ang = L / R
        self.sx = np.array([L, ang, ang, self.speed_unit, self.speed_unit,
                            self.speed_unit, self.mass_unit])
        self.su = np.array([self.thrust_unit, 1.0, 1.0])
        self.scale = np.concatenate([np.tile(np.concatenate([self.sx, self.su]), N),
                                     [self.time_unit]])
        # the radius enters as altitude so small length units keep full precision
        self.x_shift = np.array([R, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        self.shift = np.concatenate([np.tile(np.concatenate([self.x_shift, np.zeros(NU)]), N),
                                     [0.0]])

        self.r0 = R + scenario.initial_altitude
        self.rf = R + scenario.final_altitude
        g_f = c.flat_gravity if c.flat_gravity is not None else c.mu / self.rf**2
        if engine.max_thrust / scenario.initial_mass <= g_f:
            warnings.warn(
                f"max thrust-to-mass {engine.max_thrust / scenario.initial_mass:.3f} m/s^2 "
                f"does not exceed gravity at the target ({g_f:.3f} m/s^2); the problem "
                "is likely infeasible", RuntimeWarning, stacklevel=2)

        self._build_bounds()
        self._build_boundary()
        self._build_patterns()
        for arr in (self.scale, self.shift, self.lower, self.upper, self.sx, self.su,
                    self.x_shift):
            arr.setflags(write=False)

    # ------------------------------------------------------------------ layout
    def index(self, var: int, node: int) -> int:
        """Position of state/control component ``var`` (0..9) at ``node``."""
        if node < 0:
            node += self.N
        return NZ * node + var

    @property
    def tf_index(self) -> int:
        return self.dim - 1

    @property
    def n_defects(self) -> int:
        return NX * (self.N - 1)

    @property
    def n_boundary(self) -> int:
        return len(self._bnd_idx)

    @property
    def n_constraints(self) -> int:
        return self.n_defects + self.n_boundary

    def pack(self, states, controls, tf) -> np.ndarray:
        states = np.asarray(states, dtype=float).reshape(self.N, NX)
        controls = np.asarray(controls, dtype=float).reshape(self.N, NU)
        z = np.concatenate([np.hstack([states, controls]).ravel(), [tf]])
        return (z - self.shift) / self.scale

    def unpack(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise ValueError(f"decision vector has shape {z.shape}, expected ({self.dim},)")
        phys = z * self.scale + self.shift
        nodes = phys[:-1].reshape(self.N, NZ)
        return nodes[:, :NX].copy(), nodes[:, NX:].copy(), float(phys[-1])

    def times(self, z) -> np.ndarray:
        return np.linspace(0.0, float(z[-1]) * self.time_unit, self.N)

    # ------------------------------------------------------------------ bounds
    def _build_bounds(self):
        s, c, e = self.scenario, self.consts, self.engine
        R = c.radius
        vel0 = math.sqrt(s.initial_vertical_velocity**2 + s.initial_horizontal_velocity**2
                         + s.initial_cross_velocity**2)
        vmax = 2.0 * max(vel0, self.speed_unit)
        r_hi = self.r0 + 0.5 * (self.r0 - R) + 1000.0
        lat_lo, lat_hi = -LAT_LIMIT, LAT_LIMIT
        v_lo, v_hi = -vmax, vmax
        a_lo, a_hi = -s.alpha_max, s.alpha_max
        if s.planar:
            lat_lo = lat_hi = s.target_latitude
            v_lo = v_hi = 0.0
            # in-plane thrust only: azimuth pinned, beta sweeps the plane
            a_lo = a_hi = planar_azimuth(s)
        node_lo = [R, s.target_longitude - math.pi, lat_lo, -vmax, -vmax, v_lo,
                   0.01 * s.initial_mass, s.min_throttle * e.max_thrust, a_lo, -s.beta_max]
        node_hi = [r_hi, s.target_longitude + math.pi, lat_hi, vmax, vmax, v_hi,
                   s.initial_mass, e.max_thrust, a_hi, s.beta_max]
        lo = np.concatenate([np.tile(node_lo, self.N), [s.tf_bounds[0]]])
        hi = np.concatenate([np.tile(node_hi, self.N), [s.tf_bounds[1]]])
        self.lower = (lo - self.shift) / self.scale
        self.upper = (hi - self.shift) / self.scale

    def _build_boundary(self):
        s = self.scenario
        idx, val = [], []

        def fix(var, node, value):
            i = self.index(var, node)
            idx.append(i)
            val.append((value - self.shift[i]) / self.scale[i])

        fix(0, 0, self.r0)
        if not s.longitude_free:
            fix(1, 0, s.initial_longitude)
        if not s.latitude_free:
            fix(2, 0, s.initial_latitude)
        fix(3, 0, s.initial_vertical_velocity)
        fix(4, 0, s.initial_horizontal_velocity)
        fix(5, 0, s.initial_cross_velocity)
        fix(6, 0, s.initial_mass)
        fix(0, -1, self.rf)
        fix(1, -1, s.target_longitude)
        fix(2, -1, s.target_latitude)
        for var in (3, 4, 5):
            fix(var, -1, 0.0)
        self._bnd_idx = np.array(idx)
        self._bnd_val = np.array(val)

    def _build_patterns(self):
        N = self.N
        seg = np.arange(N - 1)
        # per-segment dense 7 x 21 block: node k, node k+1, tf
        local_cols = np.concatenate([np.arange(2 * NZ), [-1]])
        cols = (NZ * seg[:, None] + local_cols[None, :])
        cols[:, -1] = self.tf_index
        rows = NX * seg[:, None] + np.arange(NX)[None, :]
        self._seg_cols = cols
        self._jrows = np.broadcast_to(rows[:, :, None], (N - 1, NX, 2 * NZ + 1)).ravel()
        self._jcols = np.broadcast_to(cols[:, None, :], (N - 1, NX, 2 * NZ + 1)).ravel()
        nb = self.n_boundary
        self._brows = self.n_defects + np.arange(nb)
        # Hessian of the Lagrangian couples every pair of variables within a segment
        hr = np.broadcast_to(cols[:, :, None], (N - 1, 2 * NZ + 1, 2 * NZ + 1)).ravel()
        hc = np.broadcast_to(cols[:, None, :], (N - 1, 2 * NZ + 1, 2 * NZ + 1)).ravel()
        self.hessian_sparsity = sp.csr_matrix(
            (np.ones(hr.size, dtype=bool), (hr, hc)), shape=(self.dim, self.dim))
        jr = np.concatenate([self._jrows, self._brows])
        jc = np.concatenate([self._jcols, self._bnd_idx])
        self.jacobian_sparsity = sp.csr_matrix(
            (np.ones(jr.size, dtype=bool), (jr, jc)), shape=(self.n_constraints, self.dim))

    # ------------------------------------------------------------- dynamics
    def _split(self, z):
        nodes = z[:-1].reshape(self.N, NZ)
        return nodes[:, :NX].T, nodes[:, NX:].T, z[-1]

    def _f(self, X, U):
        """Nondimensional rates at scaled states X (7, K) and controls U (3, K)."""
        f = rates(X * self.sx[:, None] + self.x_shift[:, None], U * self.su[:, None], self.engine.isp, self.consts)
        return f * (self.time_unit / self.sx)[:, None]

    def _fjac(self, X, U):
        A, B = rates_jacobian(X * self.sx[:, None] + self.x_shift[:, None], U * self.su[:, None], self.engine.isp,
                              self.consts)
        k = (self.time_unit / self.sx)
        A = A * k[:, None, None] * self.sx[None, :, None]
        B = B * k[:, None, None] * self.su[None, :, None]
        return A, B

    def defects(self, z) -> np.ndarray:
        """Scaled collocation residuals, shape (N-1, 7)."""
        X, U, tf = self._split(np.asarray(z, dtype=float))
        h = tf / (self.N - 1)
        f = self._f(X, U)
        xl, xr, fl, fr = X[:, :-1], X[:, 1:], f[:, :-1], f[:, 1:]
        if self.scheme == "trapezoidal":
            d = xr - xl - 0.5 * h * (fl + fr)
        else:
            xc = 0.5 * (xl + xr) + h / 8.0 * (fl - fr)
            uc = 0.5 * (U[:, :-1] + U[:, 1:])
            fc = self._f(xc, uc)
            d = xr - xl - h / 6.0 * (fl + 4.0 * fc + fr)
        return d.T

    def _defect_jacobian_blocks(self, z):
        X, U, tf = self._split(z)
        return self._segment_blocks(X[:, :-1], U[:, :-1], X[:, 1:], U[:, 1:], tf)

    def _segment_blocks(self, xl, ul, xr, ur, tf):
        """Defect Jacobians of independent segments, shape (K, 7, 21).

        Columns are the left node, the right node, then ``tf``; ``tf`` may be a
        scalar or one value per segment.
        """
        M = self.N - 1
        h = np.asarray(tf, dtype=float) / M
        fl, fr = self._f(xl, ul), self._f(xr, ur)
        Al, Bl = self._fjac(xl, ul)
        Ar, Br = self._fjac(xr, ur)
        Gl = np.concatenate([Al, Bl], axis=1)  # (7, 10, K)
        Gr = np.concatenate([Ar, Br], axis=1)
        eye = np.zeros((NX, NZ))
        eye[:, :NX] = np.eye(NX)
        if self.scheme == "trapezoidal":
            dl = -eye[:, :, None] - 0.5 * h * Gl
            dr = eye[:, :, None] - 0.5 * h * Gr
            dt = -0.5 / M * (fl + fr)
        else:
            xc = 0.5 * (xl + xr) + h / 8.0 * (fl - fr)
            uc = 0.5 * (ul + ur)
            fc = self._f(xc, uc)
            Ac, Bc = self._fjac(xc, uc)
            half_u = np.zeros((NU, NZ))
            half_u[:, NX:] = 0.5 * np.eye(NU)
            dxc_l = 0.5 * eye[:, :, None] + h / 8.0 * Gl
            dxc_r = 0.5 * eye[:, :, None] - h / 8.0 * Gr
            # batched products with the segment index leading
            Ac_t = Ac.transpose(2, 0, 1)
            bu = (Bc.transpose(2, 0, 1) @ half_u).transpose(1, 2, 0)
            dfc_l = (Ac_t @ dxc_l.transpose(2, 0, 1)).transpose(1, 2, 0) + bu
            dfc_r = (Ac_t @ dxc_r.transpose(2, 0, 1)).transpose(1, 2, 0) + bu
            dl = -eye[:, :, None] - h / 6.0 * (Gl + 4.0 * dfc_l)
            dr = eye[:, :, None] - h / 6.0 * (Gr + 4.0 * dfc_r)
            dxc_t = (fl - fr) / (8.0 * M)
            dt = (-(fl + 4.0 * fc + fr) / (6.0 * M)
                  - h / 6.0 * 4.0 * (Ac_t @ dxc_t.T[:, :, None])[:, :, 0].T)
        return np.concatenate([dl.transpose(2, 0, 1), dr.transpose(2, 0, 1),
                               dt.T[:, :, None]], axis=2)

    def constraint_hessian(self, z, mult, step: float = 1e-5) -> np.ndarray:
        """Dense ``sum_i mult_i * Hess(c_i)`` in scaled variables.

        Boundary rows are linear, so only the defects contribute. Each
        segment's 21 x 21 block is a central difference of its analytic
        Jacobian, with all segments and perturbations evaluated in one
        vectorised call.
        """
        z = np.asarray(z, dtype=float)
        M = self.N - 1
        nodes = z[:-1].reshape(self.N, NZ)
        y = np.concatenate([nodes[:-1], nodes[1:], np.full((M, 1), z[-1])], axis=1)
        L = y.shape[1]
        hstep = step * np.maximum(1.0, np.abs(y))  # (M, L)
        # (2L, M, L): +e_j then -e_j for each local coordinate j
        sign = np.concatenate([np.eye(L), -np.eye(L)])  # (2L, L)
        pert = sign[:, None, :] * np.tile(hstep.T, (2, 1))[:, :, None]
        Y = (y[None] + pert).reshape(-1, L).T
        blocks = self._segment_blocks(Y[:NX], Y[NX:NZ], Y[NZ:NZ + NX], Y[NZ + NX:2 * NZ],
                                      Y[-1])
        mu = np.asarray(mult, dtype=float)[:self.n_defects].reshape(M, NX)
        B = blocks.reshape(2 * L, M, NX, L)
        g = np.einsum("pmil,mi->pml", B, mu)  # (2L, M, L)
        Hb = (g[:L] - g[L:]) / (2.0 * hstep.T[:, :, None])  # (L_j, M, L_l)
        Hb = Hb.transpose(1, 2, 0)  # (M, l, j)
        Hb = 0.5 * (Hb + Hb.transpose(0, 2, 1))
        H = np.zeros((self.dim, self.dim))
        cols = self._seg_cols
        np.add.at(H, (cols[:, :, None], cols[:, None, :]), Hb)
        return H

    # ---------------------------------------------------------- NLP callbacks
    def objective(self, z) -> float:
        return -float(z[self.index(6, -1)])

    def gradient(self, z) -> np.ndarray:
        g = np.zeros(self.dim)
        g[self.index(6, -1)] = -1.0
        return g

    def boundary_residual(self, z) -> np.ndarray:
        return BOUNDARY_WEIGHT * (np.asarray(z)[self._bnd_idx] - self._bnd_val)

    def constraints(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.concatenate([self.defects(z).ravel(), self.boundary_residual(z)])

    def jacobian(self, z) -> sp.csr_matrix:
        z = np.asarray(z, dtype=float)
        data = np.concatenate([self._defect_jacobian_blocks(z).ravel(),
                               np.full(self.n_boundary, BOUNDARY_WEIGHT)])
        rows = np.concatenate([self._jrows, self._brows])
        cols = np.concatenate([self._jcols, self._bnd_idx])
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_constraints, self.dim))

    def nlp(self) -> NlpProblem:
        return NlpProblem(
            objective=self.objective, constraints=self.constraints,
            lower=np.array(self.lower), upper=np.array(self.upper),
            n_constraints=self.n_constraints, gradient=self.gradient,
            jacobian=self.jacobian, constraint_hessian=self.constraint_hessian,
            hessian_sparsity=self.hessian_sparsity,
            jacobian_sparsity=self.jacobian_sparsity, linear_objective=True)


def transcribe(scenario: ScenarioSpec, engine: EngineCharacterization,
               consts: MoonConstants) -> TranscribedProblem:
    return TranscribedProblem(scenario, engine, consts)


def delta_v_estimate(scenario: ScenarioSpec, consts: MoonConstants) -> float:
    """Velocity to kill, or the free-fall speed over the altitude drop if larger."""
    dv = math.sqrt(scenario.initial_vertical_velocity**2
                   + scenario.initial_horizontal_velocity**2
                   + scenario.initial_cross_velocity**2)
    g = consts.flat_gravity if consts.flat_gravity is not None else consts.surface_gravity
    drop = scenario.initial_altitude - scenario.final_altitude
    return max(dv, math.sqrt(2.0 * g * drop))


def initial_guess(problem: TranscribedProblem, scenario: ScenarioSpec) -> np.ndarray:
    """Deterministic straight-line guess with a retrograde 70 % thrust."""
    s, c, e = scenario, problem.consts, problem.engine
    N = problem.N
    g = c.flat_gravity if c.flat_gravity is not None else c.surface_gravity
    dv = delta_v_estimate(s, c)
    tf = dv / (e.max_thrust / s.initial_mass)
    tf = min(max(tf, s.tf_bounds[0]), s.tf_bounds[1])
    mf = s.initial_mass * math.exp(-dv / (e.isp * c.g0))

    lam = np.linspace(0.0, 1.0, N)
    # start point upstream of the target by half the initial speed times tf
    theta0 = s.target_longitude
    phi0 = s.target_latitude
    if s.longitude_free:
        theta0 -= 0.5 * s.initial_horizontal_velocity * tf / (problem.r0 * math.cos(phi0))
    else:
        theta0 = s.initial_longitude
    if s.latitude_free and not s.planar:
        phi0 -= 0.5 * s.initial_cross_velocity * tf / problem.r0
    elif not s.latitude_free:
        phi0 = s.initial_latitude

    states = np.empty((N, NX))
    states[:, 0] = problem.r0 + lam * (problem.rf - problem.r0)
    states[:, 1] = theta0 + lam * (s.target_longitude - theta0)
    states[:, 2] = phi0 + lam * (s.target_latitude - phi0)
    states[:, 3] = (1 - lam) * s.initial_vertical_velocity
    states[:, 4] = (1 - lam) * s.initial_horizontal_velocity
    states[:, 5] = (1 - lam) * s.initial_cross_velocity
    states[:, 6] = s.initial_mass + lam * (mf - s.initial_mass)

    # thrust opposes the initial velocity, tilted up to carry half the gravity loss
    dvu, dvv = -s.initial_horizontal_velocity, -s.initial_cross_velocity
    dvw = -s.initial_vertical_velocity + 0.5 * g * tf
    alpha = math.atan2(dvv, dvu) if (dvu or dvv) else 0.0
    if alpha == -math.pi:
        alpha = math.pi
    if s.planar:
        alpha = planar_azimuth(s)
    beta = math.atan2(dvw, math.hypot(dvu, dvv))
    controls = np.empty((N, NU))
    controls[:, 0] = 0.7 * e.max_thrust
    controls[:, 1] = alpha
    controls[:, 2] = beta
    z = problem.pack(states, controls, tf)
    return np.clip(z, problem.lower, problem.upper)


def extract_solution(problem: TranscribedProblem, z, report: SolverReport | None = None
                     ) -> TrajectorySolution:
    z = np.asarray(z, dtype=float)
    states, controls, tf = problem.unpack(z)
    d = problem.defects(z)
    max_defect = float(np.max(np.abs(d))) if d.size else 0.0
    if report is None:
        status, iterations = Status.CONVERGED, 0
    else:
        status, iterations = report.status, report.iterations
    return TrajectorySolution(
        times=problem.times(z), states=states, controls=controls, tf=tf,
        final_mass=float(states[-1, 6]), objective=-float(states[-1, 6]), status=status,
        iterations=iterations, max_defect=max_defect, scheme=problem.scheme,
        isp=problem.engine.isp, decision=z.copy(), report=report)


def solve_scenario(scenario: ScenarioSpec, engine: EngineCharacterization,
                   consts: MoonConstants, config: SolverConfig | None = None,
                   guess=None) -> TrajectorySolution:
    """Transcribe, solve from ``guess`` (or the cold guess) and extract."""
    problem = transcribe(scenario, engine, consts)
    z0 = initial_guess(problem, scenario) if guess is None else np.asarray(guess, dtype=float)
    z, report = solve(problem.nlp(), z0, config)
    return extract_solution(problem, z, report)
