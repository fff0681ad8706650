"""Local subproblem of one agent.

For an allocation ``y`` the agent solves

    p(y) = min_{x in X, rho >= 0}  f_hat(x) + M rho   s.t.  a @ x <= y + rho

with ``f_hat`` a max-affine surrogate, and reports the multiplier ``mu`` as
the smallest maximizer of the dual function

    q(mu) = min_{x in X} [f_hat(x) + mu a @ x] - mu y,     0 <= mu <= M.

``-mu`` is then a subderivative of ``p`` at ``y``. The multiplier is found on
the right-derivative ``a @ x_lex(mu) - y`` of ``q``, where ``x_lex`` is the
inner minimizer with the smallest ``a @ x``; that quantity is non-increasing
in ``mu`` and the search keeps a bracket ``[lo, hi]`` with positive slope at
``lo`` and non-positive slope at ``hi``.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from .errors import MalformedInputError, NumericalFailure
from .lp import STATUS_OPTIMAL, simplex_face_kernel, simplex_kernel
from .oracle import MaxAffineEstimate
from .problem import AgentProblem

MAX_SEARCH_STEPS = 200


@dataclass
class Subproblem:
    estimate: MaxAffineEstimate
    coupling_row: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    allocation: float
    penalty: float

    def __post_init__(self):
        self.coupling_row = np.atleast_1d(np.asarray(self.coupling_row, dtype=np.float64))
        self.box_lo = np.atleast_1d(np.asarray(self.box_lo, dtype=np.float64))
        self.box_hi = np.atleast_1d(np.asarray(self.box_hi, dtype=np.float64))
        n = self.estimate.dim
        if not (self.coupling_row.size == self.box_lo.size == self.box_hi.size == n):
            raise MalformedInputError("subproblem dimensions disagree with the estimate")
        if not self.penalty > 0:
            raise MalformedInputError("penalty M must be positive")
        if np.any(self.box_lo > self.box_hi):
            raise MalformedInputError("empty box")
        self.allocation = float(self.allocation)

    @property
    def default_tol(self):
        return 1e-8 * max(1.0, self.penalty)


@dataclass
class PrimalDualPair:
    x: np.ndarray
    rho: float
    mu: float
    value: float


@dataclass
class YRange:
    y_min: float
    y_max: float


def y_range(a, box_lo, box_hi) -> YRange:
    a = np.asarray(a, dtype=np.float64)
    lo_t = a * np.asarray(box_lo, dtype=np.float64)
    hi_t = a * np.asarray(box_hi, dtype=np.float64)
    return YRange(float(np.sum(np.minimum(lo_t, hi_t))), float(np.sum(np.maximum(lo_t, hi_t))))


@njit(cache=True, nogil=True)
def _est_value(G, beta, x):
    best = -np.inf
    for k in range(G.shape[0]):
        v = beta[k]
        for j in range(x.shape[0]):
            v += G[k, j] * x[j]
        if v > best:
            best = v
    return best


@njit(cache=True, nogil=True)
def _epigraph_rows(G, beta, lo, extra):
    """Rows ``G_k @ x - t <= s0 - beta_k`` for ``s = s0 + t``.

    ``s0`` is the surrogate at the lower box corner, which makes every row's
    right-hand side non-negative once ``x`` is shifted to ``lo``: the simplex
    starts from the all-slack basis. ``extra`` trailing rows are left zero.
    """
    K, n = G.shape
    s0 = _est_value(G, beta, lo)
    A = np.zeros((K + extra, n + 1 + (extra > 0)))
    b = np.zeros(K + extra)
    for k in range(K):
        for j in range(n):
            A[k, j] = G[k, j]
        A[k, n] = -1.0
        b[k] = s0 - beta[k]
    return A, b, s0


@njit(cache=True, nogil=True)
def _inner_kernel(G, beta, a, mu, lo, hi, lex):
    """min over the box of f_hat(x) + mu a @ x; variables (x, t)."""
    K, n = G.shape
    nv = n + 1
    A, b, s0 = _epigraph_rows(G, beta, lo, 0)
    c = np.zeros(nv)
    for j in range(n):
        c[j] = mu * a[j]
    c[n] = 1.0
    lower = np.full(nv, -np.inf)
    upper = np.full(nv, np.inf)
    lower[:n] = lo
    upper[:n] = hi
    A_eq = np.zeros((0, nv))
    b_eq = np.zeros(0)
    x = np.zeros(n)
    if lex:
        d = np.zeros(nv)
        d[:n] = a
        status, u, val, sec, it = simplex_face_kernel(c, d, A, b, A_eq, b_eq, lower, upper)
    else:
        status, u, val, duals, it = simplex_kernel(c, A, b, A_eq, b_eq, lower, upper)
    if status != STATUS_OPTIMAL:
        return status, x, np.nan
    for j in range(n):
        x[j] = min(max(u[j], lo[j]), hi[j])
    return STATUS_OPTIMAL, x, val + s0


@njit(cache=True, nogil=True)
def _primal_kernel(G, beta, a, lo, hi, y, M):
    """Epigraph LP of the relaxed subproblem; variables (x, t, rho)."""
    K, n = G.shape
    nv = n + 2
    A, b, s0 = _epigraph_rows(G, beta, lo, 1)
    c = np.zeros(nv)
    c[n] = 1.0
    c[n + 1] = M
    for j in range(n):
        A[K, j] = a[j]
    A[K, n + 1] = -1.0
    b[K] = y
    lower = np.full(nv, -np.inf)
    upper = np.full(nv, np.inf)
    lower[:n] = lo
    upper[:n] = hi
    lower[n + 1] = 0.0
    status, u, val, duals, it = simplex_kernel(c, A, b, np.zeros((0, nv)), np.zeros(0), lower, upper)
    x = np.zeros(n)
    if status != STATUS_OPTIMAL:
        return status, x, np.nan, np.nan
    for j in range(n):
        x[j] = min(max(u[j], lo[j]), hi[j])
    return STATUS_OPTIMAL, x, max(u[n + 1], 0.0), val + s0


@njit(cache=True, nogil=True)
def _slope_at(G, beta, a, lo, hi, y, mu):
    status, x, val = _inner_kernel(G, beta, a, mu, lo, hi, True)
    g = 0.0
    for j in range(a.shape[0]):
        g += a[j] * x[j]
    return status, g - y, _est_value(G, beta, x), val


@njit(cache=True, nogil=True)
def _multiplier_kernel(G, beta, a, lo, hi, y, M, tol):
    """Smallest maximizer of q on [0, M]; returns (status, mu, steps).

    Steps alternate between the crossing point of the two tangent lines at
    the bracket ends and plain bisection whenever a crossing step failed to
    halve the bracket. A crossing point where q reaches the tangent lines is
    the exact smallest maximizer.
    """
    ftol = 1e-9 * (1.0 + abs(y))
    st, s_lo, f_lo, v = _slope_at(G, beta, a, lo, hi, y, 0.0)
    if st != STATUS_OPTIMAL:
        return st, np.nan, 0
    if s_lo <= ftol:
        return STATUS_OPTIMAL, 0.0, 0
    st, s_hi, f_hi, v = _slope_at(G, beta, a, lo, hi, y, M)
    if st != STATUS_OPTIMAL:
        return st, np.nan, 0
    if s_hi > ftol:
        return STATUS_OPTIMAL, M, 0
    m_lo = 0.0
    m_hi = M
    bisect_next = False
    for step in range(MAX_SEARCH_STEPS):
        width = m_hi - m_lo
        if width <= tol:
            return STATUS_OPTIMAL, m_hi, step
        crossing = False
        if not bisect_next and s_lo - s_hi > 0.0:
            mc = (f_hi - f_lo) / (s_lo - s_hi)
            crossing = m_lo < mc < m_hi
        if not crossing:
            mc = 0.5 * (m_lo + m_hi)
        st, s_c, f_c, v_c = _slope_at(G, beta, a, lo, hi, y, mc)
        if st != STATUS_OPTIMAL:
            return st, np.nan, step
        if crossing:
            line = f_lo + mc * s_lo
            q_c = v_c - mc * y
            if q_c >= line - 1e-10 * (1.0 + abs(line)):
                return STATUS_OPTIMAL, mc, step + 1
        if s_c > ftol:
            m_lo, s_lo, f_lo = mc, s_c, f_c
        else:
            m_hi, s_hi, f_hi = mc, s_c, f_c
        bisect_next = crossing and (m_hi - m_lo) > 0.5 * width
    return 3, np.nan, MAX_SEARCH_STEPS


def _arrays(sub):
    est = sub.estimate
    return est.slopes, est.intercepts, sub.coupling_row, sub.box_lo, sub.box_hi


def _check(status, what):
    if status != STATUS_OPTIMAL:
        raise NumericalFailure(f"{what} failed (status {status})")


def inner_min(est: MaxAffineEstimate, a, mu, box):
    """Minimizer of ``f_hat(x) + mu a @ x`` over ``box = (lo, hi)``.

    Among minimizers the one with the smallest ``a @ x`` is returned.
    """
    lo, hi = (np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in box)
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    status, x, val = _inner_kernel(est.slopes, est.intercepts, a, float(mu), lo, hi, True)
    _check(status, "inner minimization")
    return x, float(val)


def dual_value(sub: Subproblem, mu: float) -> float:
    if not 0.0 <= mu <= sub.penalty:
        raise MalformedInputError("mu must lie in [0, M]")
    G, beta, a, lo, hi = _arrays(sub)
    status, x, val = _inner_kernel(G, beta, a, float(mu), lo, hi, False)
    _check(status, "dual evaluation")
    return float(val - mu * sub.allocation)


def smallest_max_multiplier(sub: Subproblem, tol: float = None) -> float:
    tol = sub.default_tol if tol is None else tol
    if not tol > 0:
        raise MalformedInputError("tol must be positive")
    G, beta, a, lo, hi = _arrays(sub)
    status, mu, _ = _multiplier_kernel(G, beta, a, lo, hi, sub.allocation, float(sub.penalty), float(tol))
    _check(status, "multiplier search")
    return float(mu)


def primal_value(sub: Subproblem) -> float:
    G, beta, a, lo, hi = _arrays(sub)
    status, x, rho, val = _primal_kernel(G, beta, a, lo, hi, sub.allocation, float(sub.penalty))
    _check(status, "subproblem LP")
    return float(val)


@njit(cache=True, nogil=True)
def _solve_kernel(G, beta, a, lo, hi, y, M, tol):
    status, x, rho, val = _primal_kernel(G, beta, a, lo, hi, y, M)
    if status != STATUS_OPTIMAL:
        return status, x, rho, np.nan, val
    status, mu, steps = _multiplier_kernel(G, beta, a, lo, hi, y, M, tol)
    return status, x, rho, mu, val


def solve_subproblem(sub: Subproblem, tol: float = None) -> PrimalDualPair:
    tol = sub.default_tol if tol is None else tol
    G, beta, a, lo, hi = _arrays(sub)
    status, x, rho, mu, val = _solve_kernel(G, beta, a, lo, hi, sub.allocation, float(sub.penalty), float(tol))
    _check(status, "subproblem solve")
    return PrimalDualPair(x, float(rho), float(mu), float(val))


def true_primal_function(agent: AgentProblem, penalty: float, steps: int = 100) -> Callable:
    """Vectorized ``p(y)`` for the agent's true quadratic cost.

    Uses the dual ``max_{0<=mu<=M} min_X [f + mu a @ x] - mu y`` with the
    closed-form inner minimizer and a bisection on the (continuous,
    non-increasing) derivative ``a @ x(mu) - y``.
    """
    q, c, a = agent.quad_diag, agent.lin, agent.coupling_row
    lo, hi = agent.box_lo, agent.box_hi
    M = float(penalty)

    def inner(mu):
        x = np.clip((-c[None, :] - mu[:, None] * a[None, :]) / q[None, :], lo, hi)
        return x, 0.5 * np.sum(q * x * x, axis=1) + x @ c, x @ a

    def p(y):
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        m_lo = np.zeros_like(y)
        m_hi = np.full_like(y, M)
        for _ in range(steps):
            mid = 0.5 * (m_lo + m_hi)
            _, _, g = inner(mid)
            up = g - y > 0
            m_lo = np.where(up, mid, m_lo)
            m_hi = np.where(up, m_hi, mid)
        mu = 0.5 * (m_lo + m_hi)
        _, f, g = inner(mu)
        return f + mu * (g - y)

    return p


def epsilon_estimate(p_eval, pt_slope: float, y0: float, yr: YRange, grid_n: int = 200) -> float:
    """Grid lower bound on the smallest ``eps`` making ``pt_slope`` an
    eps-subgradient of ``p_eval`` at ``y0``:

        max(0, max_z p(y0) + (z - y0) * pt_slope - p(z)),  z on [y_min, y_max].
    """
    if grid_n < 2:
        raise MalformedInputError("grid_n must be >= 2")
    z = np.linspace(yr.y_min, yr.y_max, grid_n)
    p0 = float(np.atleast_1d(p_eval(np.array([y0])))[0])
    gap = p0 + (z - y0) * pt_slope - np.asarray(p_eval(z), dtype=np.float64)
    return max(0.0, float(np.max(gap)))
