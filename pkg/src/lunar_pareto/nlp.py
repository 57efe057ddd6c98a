"""Smooth equality-constrained NLP solver with box bounds.

Bound-constrained augmented Lagrangian: the outer loop updates multipliers and
the penalty parameter, the inner loop minimises the augmented Lagrangian over
the box with a projected trust-region Newton method. The Hessian of the
Lagrangian comes from the problem's constraint Hessian when one is supplied,
otherwise from finite differences of the analytic gradient with column
colouring; the Gauss-Newton penalty term ``rho * J^T J`` is formed exactly.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse as sp

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical_failure"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class NlpProblem:
    """minimise ``objective(x)`` s.t. ``constraints(x) = 0``, ``lower <= x <= upper``.

    ``gradient`` and ``jacobian`` are optional; finite differences are used
    when absent. ``jacobian`` may return a dense array or a scipy sparse
    matrix. ``hessian_sparsity`` is the (symmetric) nonzero pattern of the
    Lagrangian Hessian and ``jacobian_sparsity`` that of the constraint
    Jacobian; both only speed up finite differencing.
    ``constraint_hessian(x, mult)``, when given, returns the dense matrix
    ``sum_i mult_i * Hess(c_i)`` and replaces differencing of the constraint
    part; ``linear_objective`` skips the objective's curvature altogether.
    """

    objective: Callable[[np.ndarray], float]
    constraints: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    n_constraints: int
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    jacobian: Callable[[np.ndarray], object] | None = None
    constraint_hessian: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    hessian_sparsity: object | None = None
    jacobian_sparsity: object | None = None
    x_scale: np.ndarray | None = None
    linear_objective: bool = False

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n(self) -> int:
        return self.lower.size


@dataclass(frozen=True)
class SolverConfig:
    max_outer: int = 50
    max_inner: int = 200
    penalty_init: float = 1000.0
    penalty_growth: float = 10.0
    penalty_ceiling: float = 1e8
    penalty_max: float = 1e12
    constraint_tol: float = 1e-6
    stationarity_tol: float = 1e-6
    fd_step: float = 1e-5
    armijo: float = 1e-4
    backtrack: float = 0.5
    plateau_window: int = 5
    plateau_rtol: float = 1e-3
    seed: int | None = None  # reserved; the solver is deterministic

    def __post_init__(self):
        for name in ("constraint_tol", "stationarity_tol", "fd_step", "penalty_init",
                     "armijo"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.penalty_growth > 1:
            raise ValueError("penalty_growth must exceed 1")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass(frozen=True)
class OuterRecord:
    iteration: int
    penalty: float
    violation: float
    stationarity: float
    objective: float
    inner_iterations: int


@dataclass
class SolverReport:
    status: Status
    iterations: int
    violation: float
    stationarity: float
    objective: float
    multipliers: np.ndarray
    inner_iterations: int = 0
    history: list[OuterRecord] = field(default_factory=list)
    message: str = ""
    clamped_start: bool = False

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


class _NonFinite(Exception):
    pass


# --------------------------------------------------------------------------
# derivative helpers


def _fd_steps(x, problem, rel):
    scale = np.abs(x) if problem.x_scale is None else np.abs(problem.x_scale)
    return rel * np.maximum(1.0, scale)


def color_columns(pattern, dense_rows=()) -> np.ndarray:
    """Greedy column colouring for finite differencing.

    Two columns may share a colour when no row outside ``dense_rows`` has a
    nonzero in both. Columns listed in ``dense_rows`` (for a symmetric
    pattern these are the dense columns) always get a colour of their own.
    """
    P = sp.csr_matrix(pattern, dtype=bool).astype(np.int8)
    n = P.shape[1]
    dense_rows = np.asarray(sorted(set(int(i) for i in dense_rows)), dtype=int)
    keep = np.ones(P.shape[0], dtype=bool)
    keep[dense_rows] = False
    Pk = P[np.flatnonzero(keep)]
    conflict = (Pk.T @ Pk).tocsr()
    colors = np.full(n, -1, dtype=int)
    next_color = 0
    for j in dense_rows:
        if j < n:
            colors[j] = next_color
            next_color += 1
    for j in range(n):
        if colors[j] >= 0:
            continue
        nb = conflict.indices[conflict.indptr[j]:conflict.indptr[j + 1]]
        used = set(colors[nb][colors[nb] >= 0].tolist()) | set(range(len(dense_rows)))
        c = len(dense_rows)
        while c in used:
            c += 1
        colors[j] = c
    return colors


class _HessianFD:
    """Forward-difference Hessian of a gradient map with a symmetric pattern."""

    def __init__(self, n, pattern):
        if pattern is None:
            pattern = np.ones((n, n), dtype=bool)
        P = sp.coo_matrix(pattern, dtype=bool)
        P = (P + P.T + sp.eye(n, dtype=bool)).tocoo()
        nnz_row = np.bincount(P.row, minlength=n)
        dense = np.flatnonzero(nnz_row > n / 4) if n >= 40 else np.array([], dtype=int)
        if dense.size > max(1, n // 10):
            dense = np.array([], dtype=int)
        self.n = n
        self.dense = dense
        self.colors = color_columns(P, dense)
        self.ncolors = int(self.colors.max()) + 1
        is_dense = np.zeros(n, dtype=bool)
        is_dense[dense] = True
        ok = ~is_dense[P.row]
        self.rows, self.cols = P.row[ok], P.col[ok]
        self.groups = [np.flatnonzero(self.colors == c) for c in range(self.ncolors)]
        self.entry_color = self.colors[self.cols]
        self.dense_set = frozenset(dense.tolist())

    def __call__(self, grad, x, g0, steps):
        H = np.zeros((self.n, self.n))
        for c, group in enumerate(self.groups):
            xp = x.copy()
            xp[group] += steps[group]
            xm = x.copy()
            xm[group] -= steps[group]
            dg = 0.5 * (grad(xp) - grad(xm))
            sel = self.entry_color == c
            r, k = self.rows[sel], self.cols[sel]
            H[r, k] = dg[r] / steps[k]
            if group.size == 1 and group[0] in self.dense_set:
                H[:, group[0]] = dg / steps[group[0]]
        if self.dense.size:
            H[self.dense, :] = H[:, self.dense].T
        return 0.5 * (H + H.T)


class _Evaluator:
    """Wraps an :class:`NlpProblem` with finite-difference fallbacks."""

    def __init__(self, problem: NlpProblem, config: SolverConfig):
        self.p = problem
        self.cfg = config
        self.n = problem.n
        self.m = problem.n_constraints
        self.hess_fd = _HessianFD(self.n, problem.hessian_sparsity)
        self._jac_colors = None
        if problem.jacobian is None and problem.jacobian_sparsity is not None:
            self._jac_pattern = sp.csr_matrix(problem.jacobian_sparsity, dtype=bool)
            self._jac_colors = color_columns(self._jac_pattern)

    def f(self, x):
        v = float(self.p.objective(x))
        if not math.isfinite(v):
            raise _NonFinite("objective")
        return v

    def c(self, x):
        v = np.asarray(self.p.constraints(x), dtype=float).reshape(-1)
        if v.size != self.m:
            raise ValueError(f"constraints returned {v.size} values, expected {self.m}")
        if not np.all(np.isfinite(v)):
            raise _NonFinite("constraints")
        return v

    def grad(self, x):
        if self.p.gradient is not None:
            g = np.asarray(self.p.gradient(x), dtype=float)
        else:
            h = _fd_steps(x, self.p, math.sqrt(self.cfg.fd_step) * 1e-2)
            g = np.empty(self.n)
            for j in range(self.n):
                e = np.zeros(self.n)
                e[j] = h[j]
                g[j] = (self.p.objective(x + e) - self.p.objective(x - e)) / (2 * h[j])
        if not np.all(np.isfinite(g)):
            raise _NonFinite("gradient")
        return g

    def jac(self, x):
        if self.m == 0:
            return sp.csr_matrix((0, self.n))
        if self.p.jacobian is not None:
            J = self.p.jacobian(x)
            J = J.tocsr() if sp.issparse(J) else sp.csr_matrix(np.asarray(J, dtype=float))
        else:
            J = self._fd_jac(x)
        if not np.all(np.isfinite(J.data)):
            raise _NonFinite("jacobian")
        return J

    def _fd_jac(self, x):
        h = _fd_steps(x, self.p, math.sqrt(self.cfg.fd_step) * 1e-2)
        if self._jac_colors is None:
            cols = []
            for j in range(self.n):
                e = np.zeros(self.n)
                e[j] = h[j]
                cols.append((self.c(x + e) - self.c(x - e)) / (2 * h[j]))
            return sp.csr_matrix(np.column_stack(cols))
        P = self._jac_pattern.tocoo()
        data = np.zeros(P.nnz)
        for color in range(self._jac_colors.max() + 1):
            group = self._jac_colors == color
            e = np.where(group, h, 0.0)
            d = self.c(x + e) - self.c(x - e)
            sel = group[P.col]
            data[sel] = d[P.row[sel]] / (2 * h[P.col[sel]])
        return sp.csr_matrix((data, (P.row, P.col)), shape=(self.m, self.n))

    def lagrangian_grad(self, x, mult):
        g = self.grad(x)
        if self.m:
            g = g + self.jac(x).T @ mult
        return g

    def hessian(self, x, mult, g_lag):
        steps = _fd_steps(x, self.p, self.cfg.fd_step)
        if self.p.constraint_hessian is None or self.m == 0:
            return self.hess_fd(lambda z: self.lagrangian_grad(z, mult), x, g_lag, steps)
        H = np.asarray(self.p.constraint_hessian(x, mult), dtype=float)
        if not self.p.linear_objective:
            H = H + self.hess_fd(self.grad, x, None, steps)
        if not np.all(np.isfinite(H)):
            raise _NonFinite("hessian")
        return H


def projected_gradient(x, g, lower, upper) -> np.ndarray:
    return x - np.clip(x - g, lower, upper)


def kkt_residual(problem: NlpProblem, x, multipliers, fd_step: float = 1e-7) -> float:
    """Infinity norm of the projected Lagrangian gradient, freshly evaluated."""
    ev = _Evaluator(problem, SolverConfig(fd_step=fd_step))
    g = ev.lagrangian_grad(np.asarray(x, dtype=float), np.asarray(multipliers, dtype=float))
    return float(np.max(np.abs(projected_gradient(x, g, problem.lower, problem.upper)),
                        initial=0.0))


# --------------------------------------------------------------------------
# inner loop


class _TrustStep:
    """Trust-region subproblem on a fixed free subspace.

    Solved by the More-Sorensen iteration on the shift ``sigma`` using
    Cholesky factorisations of ``H + sigma*I``; an eigen-decomposition is
    only formed for the hard case, when that iteration cannot settle.
    """

    def __init__(self, H, free):
        self.idx = np.flatnonzero(free)
        self.n = H.shape[0]
        self.Hff = H[np.ix_(self.idx, self.idx)]
        self.eig = None
        self._factors: dict[float, object] = {}
        if self.idx.size:
            self.gersh = float(np.max(np.sum(np.abs(self.Hff), axis=1)))
            self.min_diag = float(np.min(np.diag(self.Hff)))

    def _factor(self, sigma):
        if sigma not in self._factors:
            try:
                A = self.Hff + sigma * np.eye(self.idx.size)
                self._factors[sigma] = scipy.linalg.cho_factor(A, lower=True,
                                                                check_finite=False)
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                self._factors[sigma] = None
        return self._factors[sigma]

    def step(self, g, radius):
        d = np.zeros(self.n)
        if self.idx.size == 0:
            return d
        gf = g[self.idx]
        f0 = self._factor(0.0)
        if f0 is not None:
            s = -scipy.linalg.cho_solve(f0, gf, check_finite=False)
            if np.linalg.norm(s) <= radius:
                d[self.idx] = s
                return d
        gn = float(np.linalg.norm(gf))
        if gn == 0.0:
            return self._eigen_step(gf, radius, d)
        s_lo = 0.0 if f0 is not None else max(0.0, -self.min_diag)
        s_hi = gn / radius + self.gersh
        sigma = max(s_lo, gn / radius - self.gersh, 1e-12 * self.gersh) if f0 is None else 0.0
        for _ in range(30):
            fac = self._factor(sigma)
            if fac is None:
                s_lo = max(s_lo, sigma)
                sigma = max(math.sqrt(max(s_lo, 1e-300) * s_hi), s_lo + 0.01 * (s_hi - s_lo))
                continue
            s = -scipy.linalg.cho_solve(fac, gf, check_finite=False)
            sn = float(np.linalg.norm(s))
            if abs(sn - radius) <= 0.1 * radius or (sn < radius and sigma == 0.0):
                d[self.idx] = s
                return d
            if sn < radius:
                s_hi = min(s_hi, sigma)
            else:
                s_lo = max(s_lo, sigma)
            q = scipy.linalg.solve_triangular(fac[0], s, lower=True, check_finite=False)
            new = sigma + (sn / np.linalg.norm(q)) ** 2 * (sn - radius) / radius
            if not s_lo < new < s_hi:
                new = max(math.sqrt(max(s_lo, 1e-300) * s_hi), s_lo + 0.01 * (s_hi - s_lo))
            if abs(new - sigma) <= 1e-14 * max(1.0, sigma):
                break
            sigma = new
        return self._eigen_step(gf, radius, d)

    def _eigen_step(self, gf, radius, d):
        if self.eig is None:
            self.eig = scipy.linalg.eigh(self.Hff, check_finite=False)
        lam, V = self.eig
        a = V.T @ gf
        scale = max(1.0, float(np.max(np.abs(lam))))
        tiny = 1e-12 * scale

        def norm(sigma):
            return float(np.linalg.norm(a / (lam + sigma)))

        lo = max(0.0, -lam[0]) + tiny
        if norm(lo) <= radius:
            s = -a / (lam + lo)
            if lam[0] >= -tiny:
                # flat directions change nothing; keep the minimum-norm step
                d[self.idx] = V @ s
                return d
            # hard case: fill the remaining length along the negative mode
            root = math.sqrt(s[0] ** 2 + max(radius**2 - float(s @ s), 0.0))
            s[0] += (root - s[0]) if a[0] <= 0 else (-root - s[0])
        else:
            hi = lo + float(np.linalg.norm(a)) / radius + scale
            sigma = scipy.optimize.brentq(lambda t: norm(t) - radius, lo, hi,
                                          xtol=1e-14 * hi, rtol=1e-10)
            s = -a / (lam + sigma)
        d[self.idx] = V @ s
        return d


_MU0 = 0.01


def _box_step(H, g, x, lo, hi, radius, eps, cache):
    """Approximate minimiser of the quadratic model over box and trust region.

    A generalised Cauchy point along the projected steepest-descent path
    fixes the active set; free variables are then refined by trust-region
    steps, cut short at the first bound when projection would spoil them.
    No refinement is kept unless it lowers the model, so the decrease is at
    least that of the Cauchy point.
    """
    def model(s):
        return g @ s + 0.5 * s @ (H @ s)

    p = -projected_gradient(x, g, lo, hi)
    pn = float(np.linalg.norm(p))
    if pn == 0.0:
        return np.zeros_like(x)
    curv = float(p @ (H @ p))
    t = radius / pn
    if curv > 0:
        t = min(t, pn * pn / curv)
    for _ in range(60):
        s = np.clip(x - t * g, lo, hi) - x
        if np.linalg.norm(s) <= radius * (1 + 1e-12) and model(s) <= _MU0 * (g @ s):
            break
        t *= 0.5
    q = model(s)

    for _ in range(4):
        xs = x + s
        gs = g + H @ s
        # nearly-active variables pushed outward by the model are held
        near_lo = (xs <= lo + eps) & (gs > 0)
        near_hi = (xs >= hi - eps) & (gs < 0)
        free = ~(near_lo | near_hi) & (lo < hi)
        for _ in range(10):
            if not free.any():
                break
            key = free.tobytes()
            if key not in cache:
                cache[key] = _TrustStep(H, free)
            w = cache[key].step(gs, radius)
            # so are free ones on a bound that the step would push through
            push = free & (((xs <= lo + eps) & (w < 0)) | ((xs >= hi - eps) & (w > 0)))
            if not push.any():
                break
            free &= ~push
        if not free.any():
            break
        sn = np.clip(xs + w, lo, hi) - x
        qn = model(sn)
        clipped = False
        if not qn <= q + _MU0 * (gs @ (sn - s)):
            # cut the step at the first bound it meets; along a trust-region
            # solution the model decreases monotonically up to there
            with np.errstate(divide="ignore", invalid="ignore"):
                room = np.where(w > 0, (hi - xs) / w, np.where(w < 0, (lo - xs) / w, np.inf))
            beta = min(1.0, max(0.0, float(np.min(room, initial=np.inf))))
            sn = np.clip(xs + beta * w, lo, hi) - x
            qn = model(sn)
            clipped = True
            if not qn < q:
                break
        s, q = sn, qn
        if not clipped:
            break
    return s


def _minimise_inner(ev: _Evaluator, x, lam, rho, tol, cfg: SolverConfig, radius=1.0):
    """Projected trust-region Newton on the augmented Lagrangian over the box.

    Returns ``(x, iterations, projected_gradient_norm, radius)``.
    """
    lo, hi = ev.p.lower, ev.p.upper

    def merit(z):
        c = ev.c(z)
        return ev.f(z) + lam @ c + 0.5 * rho * (c @ c), c

    phi, c = merit(x)
    iters = 0
    pg_norm = math.inf
    for iters in range(1, cfg.max_inner + 1):
        J = ev.jac(x)
        mult = lam + rho * c
        g = ev.grad(x) + (J.T @ mult if ev.m else 0.0)
        pg_norm = float(np.max(np.abs(projected_gradient(x, g, lo, hi)), initial=0.0))
        if pg_norm <= tol:
            return x, iters - 1, pg_norm, radius
        H = ev.hessian(x, mult, g)
        if ev.m:
            JtJ = J.T @ J
            H = H + rho * (JtJ.toarray() if sp.issparse(JtJ) else JtJ)
        noise = 1e-13 * max(1.0, abs(phi))

        cache: dict = {}
        accepted = False
        for _ in range(40):
            s = _box_step(H, g, x, lo, hi, radius, min(1e-3, pg_norm), cache)
            xt = np.clip(x + s, lo, hi)
            s = xt - x
            pred = -(g @ s + 0.5 * s @ (H @ s))
            try:
                phit, ct = merit(xt)
                ared = phi - phit
            except _NonFinite:
                ared = -math.inf
            snorm = float(np.linalg.norm(s))
            if snorm > 0 and (ared >= 0.1 * pred or (pred <= noise and ared >= -noise)):
                accepted = True
                if ared >= 0.75 * pred and snorm >= 0.9 * radius:
                    radius = min(2.0 * radius, 1e3)
                elif ared < 0.25 * pred:
                    radius = 0.25 * snorm
                break
            radius = 0.25 * min(snorm, radius) if snorm > 0 else 0.25 * radius
            if radius < 1e-15:
                break
        if not accepted:
            log.debug("inner trust region collapsed at |pg|=%.3e", pg_norm)
            return x, iters, pg_norm, 1e-3
        log.debug("  inner %d |pg|=%.3e radius=%.3g step=%.3g phi=%.12g", iters, pg_norm,
                  radius, snorm, phit)
        x, phi, c = xt, phit, ct
    J = ev.jac(x)
    g = ev.grad(x) + (J.T @ (lam + rho * c) if ev.m else 0.0)
    pg_norm = float(np.max(np.abs(projected_gradient(x, g, lo, hi)), initial=0.0))
    return x, iters, pg_norm, radius


# --------------------------------------------------------------------------
# outer loop


def solve(problem: NlpProblem, x0, config: SolverConfig | None = None,
          multipliers=None) -> tuple[np.ndarray, SolverReport]:
    """Minimise an :class:`NlpProblem` from ``x0``.

    Returns the final iterate (always inside the bounds) and a
    :class:`SolverReport`. Never raises for solver trouble; failures are
    reported through ``report.status``.
    """
    cfg = config or SolverConfig()
    ev = _Evaluator(problem, cfg)
    lo, hi = problem.lower, problem.upper
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != lo.shape:
        raise ValueError(f"x0 has shape {x.shape}, expected {lo.shape}")
    clamped = bool(np.any((x < lo) | (x > hi)))
    if clamped:
        log.warning("initial point outside bounds; clamping")
    x = np.clip(x, lo, hi)

    lam = np.zeros(ev.m) if multipliers is None else np.asarray(multipliers, dtype=float).copy()
    rho = cfg.penalty_init
    omega = max(1.0 / rho, cfg.stationarity_tol)
    eta = max(1.0 / rho**0.1, cfg.constraint_tol)
    history: list[OuterRecord] = []
    total_inner = 0
    radius = 1.0
    viol = stat = obj = math.nan

    def report(status, k, message=""):
        return SolverReport(status, k, viol, stat, obj, lam, total_inner, history,
                            message, clamped)

    for k in range(1, cfg.max_outer + 1):
        try:
            x, n_in, _, radius = _minimise_inner(ev, x, lam, rho, omega, cfg, radius)
            total_inner += n_in
            c = ev.c(x)
            obj = ev.f(x)
            mult = lam + rho * c
            g = ev.lagrangian_grad(x, mult)
        except _NonFinite as exc:
            return x, report(Status.NUMERICAL_FAILURE, k,
                             f"non-finite {exc} at outer iterate {k}")
        viol = float(np.max(np.abs(c), initial=0.0))
        stat = float(np.max(np.abs(projected_gradient(x, g, lo, hi)), initial=0.0))
        history.append(OuterRecord(k, rho, viol, stat, obj, n_in))
        log.debug("outer %d rho=%.1e viol=%.3e stat=%.3e obj=%.8g inner=%d",
                  k, rho, viol, stat, obj, n_in)

        if viol <= cfg.constraint_tol and stat <= cfg.stationarity_tol:
            lam = mult
            return x, report(Status.CONVERGED, k)

        if rho >= cfg.penalty_ceiling and len(history) > cfg.plateau_window:
            ref = history[-1 - cfg.plateau_window].violation
            if ref > 0 and (ref - viol) / ref < cfg.plateau_rtol and viol > cfg.constraint_tol:
                return x, report(Status.INFEASIBLE, k,
                                 f"violation plateaued at {viol:.3e} with penalty {rho:.1e}")

        if viol <= eta:
            lam = mult
            eta = max(eta / rho**0.9, 0.1 * cfg.constraint_tol)
            omega = max(omega / rho, cfg.stationarity_tol)
        else:
            rho = min(rho * cfg.penalty_growth, cfg.penalty_max)
            eta = max(1.0 / rho**0.1, 0.1 * cfg.constraint_tol)
            omega = max(1.0 / rho, cfg.stationarity_tol)

    return x, report(Status.MAX_ITERATIONS, cfg.max_outer,
                     f"outer iteration limit reached (violation {viol:.3e}, "
                     f"stationarity {stat:.3e})")


# --------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class GradientCheck:
    """Worst relative discrepancy between analytic and finite-difference derivatives."""

    gradient: float
    jacobian: float

    @property
    def worst(self) -> float:
        return max(self.gradient, self.jacobian)


def _rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0:
        return 0.0
    floor = 1e-6 * max(1.0, float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def check_gradients(problem: NlpProblem, x, step: float = 1e-6) -> GradientCheck:
    """Compare analytic derivative callbacks with central differences at ``x``.

    Blocks without an analytic callback report 0.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    h = step * np.maximum(1.0, np.abs(x))
    grad_err = jac_err = 0.0
    if problem.gradient is not None:
        fd = np.empty(n)
        for j in range(n):
            e = np.zeros(n)
            e[j] = h[j]
            fd[j] = (problem.objective(x + e) - problem.objective(x - e)) / (2 * h[j])
        grad_err = _rel_err(problem.gradient(x), fd)
    if problem.jacobian is not None and problem.n_constraints:
        J = problem.jacobian(x)
        J = J.toarray() if sp.issparse(J) else np.asarray(J, dtype=float)
        fd = np.empty_like(J)
        for j in range(n):
            e = np.zeros(n)
            e[j] = h[j]
            fd[:, j] = (np.asarray(problem.constraints(x + e))
                        - np.asarray(problem.constraints(x - e))) / (2 * h[j])
        jac_err = _rel_err(J, fd)
    return GradientCheck(grad_err, jac_err)
