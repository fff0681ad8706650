"""Dense two-phase simplex for small linear programs.

Problems are stated as::

    minimize    c @ u
    subject to  A_ub @ u <= b_ub
                A_eq @ u == b_eq
                lower <= u <= upper        (entries may be +-inf)

Row duals follow the sensitivity convention ``d(objective)/d(rhs)``, so at an
optimum every inequality dual is ``<= 0`` and the reduced costs
``c - A_ub.T @ y_ub - A_eq.T @ y_eq`` are non-negative on variables sitting
at their lower bound and non-positive on variables at their upper bound.

The pivoting kernel is compiled with numba and is callable from other
jitted code through :func:`simplex_kernel`; the hot loops in
:mod:`primal_decomp.oracle` and :mod:`primal_decomp.subsolver` use it that way.
"""
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import MalformedInputError, NumericalFailure

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
DEGEN_TOL = 1e-11

STATUS_OPTIMAL = 0
STATUS_INFEASIBLE = 1
STATUS_UNBOUNDED = 2
STATUS_ITERATION_LIMIT = 3

_STATUS_NAMES = {
    STATUS_OPTIMAL: "optimal",
    STATUS_INFEASIBLE: "infeasible",
    STATUS_UNBOUNDED: "unbounded",
}


@dataclass
class LpProblem:
    objective: np.ndarray
    A_ub: np.ndarray = None
    b_ub: np.ndarray = None
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=np.float64).ravel()
        n = c.size
        self.objective = c
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n, "inequality")
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n, "equality")
        lo = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=np.float64)
        hi = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=np.float64)
        lo = np.broadcast_to(lo, (n,)).copy() if lo.ndim == 0 else lo.ravel()
        hi = np.broadcast_to(hi, (n,)).copy() if hi.ndim == 0 else hi.ravel()
        if lo.size != n or hi.size != n:
            raise MalformedInputError(f"bounds must have length {n}")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise MalformedInputError("each lower bound must be <= its upper bound")
        if np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise MalformedInputError("bounds exclude every real value")
        self.lower, self.upper = lo, hi

    @property
    def n_vars(self):
        return self.objective.size


def _rows(A, b, n, what):
    if A is None:
        if b is not None and np.size(b) > 0:
            raise MalformedInputError(f"{what} rhs given without rows")
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.size == 0:
        A = A.reshape(0, n)
    b = np.asarray(b, dtype=np.float64).ravel()
    if A.shape[1] != n:
        raise MalformedInputError(f"{what} rows have {A.shape[1]} columns, expected {n}")
    if b.size != A.shape[0]:
        raise MalformedInputError(f"{what} rhs has {b.size} entries for {A.shape[0]} rows")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise MalformedInputError(f"{what} data must be finite")
    return A, b


@dataclass
class LpSolution:
    status: str
    primal: np.ndarray
    objective_value: float
    row_duals: np.ndarray = field(default=None)
    iterations: int = 0
    n_ineq: int = field(default=0, repr=False)

    @property
    def ineq_duals(self):
        return self.row_duals[: self.n_ineq]

    @property
    def eq_duals(self):
        return self.row_duals[self.n_ineq:]


@njit(cache=True, nogil=True)
def _pivot(T, basis, r, e):
    ncols = T.shape[1]
    inv = 1.0 / T[r, e]
    for k in range(ncols):
        T[r, k] *= inv
    T[r, e] = 1.0
    for i in range(T.shape[0]):
        if i != r:
            f = T[i, e]
            if f != 0.0:
                for k in range(ncols):
                    T[i, k] -= f * T[r, k]
                T[i, e] = 0.0
    # snap round-off on degenerate rows so Bland's ratio ties stay exact
    rhs = ncols - 1
    for i in range(basis.shape[0]):
        if abs(T[i, rhs]) < DEGEN_TOL:
            T[i, rhs] = 0.0
    basis[r] = e


@njit(cache=True, nogil=True)
def _run_phase(T, basis, obj_row, allowed, max_iter, it):
    """Bland-rule pivoting on objective row ``obj_row``.

    Only columns flagged in ``allowed`` may enter. Returns (status,
    iterations) with status optimal, unbounded or iteration-limit.
    """
    m = basis.shape[0]
    rhs = T.shape[1] - 1
    n_enter = allowed.shape[0]
    while True:
        e = -1
        for j in range(n_enter):
            if allowed[j] and T[obj_row, j] < -PIVOT_TOL:
                e = j
                break
        if e < 0:
            return STATUS_OPTIMAL, it
        r = -1
        best = np.inf
        for i in range(m):
            a = T[i, e]
            if a > PIVOT_TOL:
                ratio = T[i, rhs] / a
                if r < 0 or ratio < best - 1e-12 * (1.0 + abs(best)):
                    r = i
                    best = ratio
                elif ratio <= best + 1e-12 * (1.0 + abs(best)) and basis[i] < basis[r]:
                    r = i
                    if ratio < best:
                        best = ratio
        if r < 0:
            return STATUS_UNBOUNDED, it
        if it >= max_iter:
            return STATUS_ITERATION_LIMIT, it
        _pivot(T, basis, r, e)
        it += 1


@njit(cache=True, nogil=True)
def _transformed_cost(c, kind, col, offset, ncol):
    ct = np.zeros(ncol)
    const = 0.0
    for j in range(c.shape[0]):
        if kind[j] == 0:
            ct[col[j]] = c[j]
            const += c[j] * offset[j]
        elif kind[j] == 1:
            ct[col[j]] = -c[j]
            const += c[j] * offset[j]
        else:
            ct[col[j]] = c[j]
            ct[col[j] + 1] = -c[j]
    return ct, const


@njit(cache=True, nogil=True)
def _set_objective(T, basis, row, ct):
    T[row, :] = 0.0
    for j in range(ct.shape[0]):
        T[row, j] = ct[j]
    for i in range(basis.shape[0]):
        b = basis[i]
        if b < ct.shape[0] and T[row, b] != 0.0:
            f = T[row, b]
            for k in range(T.shape[1]):
                T[row, k] -= f * T[i, k]


@njit(cache=True, nogil=True)
def _build_and_optimize(c, A_ub, b_ub, A_eq, b_eq, lower, upper):
    """Standard-form setup plus phases 1 and 2.

    Returns (status, T, basis, kind, col, offset, ncol, iterations); row
    ``m`` of ``T`` holds the phase-2 reduced costs, row ``m + 1`` is free
    afterwards.
    """
    n = c.shape[0]
    m_ub = A_ub.shape[0]
    m_eq = A_eq.shape[0]

    # variable substitution: 0 -> u = lo + v, 1 -> u = hi - v, 2 -> u = v+ - v-
    kind = np.empty(n, np.int64)
    col = np.empty(n, np.int64)
    offset = np.zeros(n)
    ncol = 0
    nbound = 0
    for j in range(n):
        lo = lower[j]
        hi = upper[j]
        col[j] = ncol
        if lo > -np.inf:
            kind[j] = 0
            offset[j] = lo
            ncol += 1
            if hi < np.inf:
                nbound += 1
        elif hi < np.inf:
            kind[j] = 1
            offset[j] = hi
            ncol += 1
        else:
            kind[j] = 2
            ncol += 2

    m = m_ub + 2 * m_eq + nbound
    Ab = np.zeros((m, ncol))
    hb = np.zeros(m)
    for r in range(m_ub + 2 * m_eq):
        if r < m_ub:
            sgn = 1.0
            src = A_ub[r]
            h = b_ub[r]
        else:
            k = (r - m_ub) // 2
            sgn = 1.0 if (r - m_ub) % 2 == 0 else -1.0
            src = A_eq[k]
            h = sgn * b_eq[k]
        acc = h
        for j in range(n):
            a = sgn * src[j]
            if a == 0.0:
                continue
            if kind[j] == 0:
                Ab[r, col[j]] = a
                acc -= a * offset[j]
            elif kind[j] == 1:
                Ab[r, col[j]] = -a
                acc -= a * offset[j]
            else:
                Ab[r, col[j]] = a
                Ab[r, col[j] + 1] = -a
        hb[r] = acc
    r = m_ub + 2 * m_eq
    for j in range(n):
        if kind[j] == 0 and upper[j] < np.inf:
            Ab[r, col[j]] = 1.0
            hb[r] = upper[j] - lower[j]
            r += 1

    # initial basis: slack, else a singleton structural column, else artificial
    nnz = np.zeros(ncol, np.int64)
    for i in range(m):
        for j in range(ncol):
            if Ab[i, j] != 0.0:
                nnz[j] += 1
    used = np.zeros(ncol, np.bool_)
    sigma = np.ones(m)
    crash = np.full(m, -1, np.int64)
    n_art = 0
    for i in range(m):
        if hb[i] < 0.0:
            sigma[i] = -1.0
            for j in range(ncol):
                if nnz[j] == 1 and not used[j] and -Ab[i, j] > PIVOT_TOL:
                    crash[i] = j
                    used[j] = True
                    break
            if crash[i] < 0:
                n_art += 1

    ntot = ncol + m + n_art
    rhs = ntot
    T = np.zeros((m + 2, ntot + 1))
    basis = np.empty(m, np.int64)
    obj2 = m
    obj1 = m + 1
    a_idx = ncol + m
    for i in range(m):
        s = sigma[i]
        for j in range(ncol):
            T[i, j] = s * Ab[i, j]
        T[i, ncol + i] = s
        T[i, rhs] = s * hb[i]
        if s > 0.0:
            basis[i] = ncol + i
        elif crash[i] >= 0:
            j = crash[i]
            piv = T[i, j]
            for k in range(ntot + 1):
                T[i, k] /= piv
            basis[i] = j
        else:
            T[i, a_idx] = 1.0
            basis[i] = a_idx
            a_idx += 1
    ct, const = _transformed_cost(c, kind, col, offset, ncol)
    _set_objective(T, basis, obj2, ct)
    for i in range(m):
        if basis[i] >= ncol + m:
            for k in range(ntot + 1):
                T[obj1, k] -= T[i, k]
            T[obj1, basis[i]] = 0.0

    max_iter = 50 * (m + ntot)
    allowed = np.ones(ncol + m, np.bool_)
    it = 0
    hmax = 0.0
    for i in range(m):
        hmax = max(hmax, abs(hb[i]))

    if n_art > 0:
        status, it = _run_phase(T, basis, obj1, allowed, max_iter, it)
        if status == STATUS_ITERATION_LIMIT:
            return status, T, basis, kind, col, offset, ncol, it
        if -T[obj1, rhs] > FEAS_TOL * (1.0 + hmax):
            return STATUS_INFEASIBLE, T, basis, kind, col, offset, ncol, it
        for i in range(m):
            if basis[i] >= ncol + m:
                for j in range(ncol + m):
                    if abs(T[i, j]) > PIVOT_TOL:
                        _pivot(T, basis, i, j)
                        it += 1
                        break

    status, it = _run_phase(T, basis, obj2, allowed, max_iter, it)
    return status, T, basis, kind, col, offset, ncol, it


@njit(cache=True, nogil=True)
def _extract(T, basis, kind, col, offset, ncol, c, m_ub, m_eq):
    n = c.shape[0]
    m = basis.shape[0]
    rhs = T.shape[1] - 1
    v = np.zeros(ncol)
    for i in range(m):
        if basis[i] < ncol:
            v[basis[i]] = T[i, rhs]
    u = np.zeros(n)
    for j in range(n):
        if kind[j] == 0:
            u[j] = offset[j] + v[col[j]]
        elif kind[j] == 1:
            u[j] = offset[j] - v[col[j]]
        else:
            u[j] = v[col[j]] - v[col[j] + 1]
    duals = np.zeros(m_ub + m_eq)
    for i in range(m_ub):
        duals[i] = -T[m, ncol + i]
    for k in range(m_eq):
        r1 = m_ub + 2 * k
        duals[m_ub + k] = -T[m, ncol + r1] + T[m, ncol + r1 + 1]
    obj = 0.0
    for j in range(n):
        obj += c[j] * u[j]
    return u, obj, duals


@njit(cache=True, nogil=True)
def simplex_kernel(c, A_ub, b_ub, A_eq, b_eq, lower, upper):
    """Solve the LP; returns (status, u, objective, row_duals, iterations).

    Equalities enter as paired inequalities; every row therefore owns a slack
    column whose final reduced cost is minus the row's dual.
    """
    status, T, basis, kind, col, offset, ncol, it = _build_and_optimize(c, A_ub, b_ub, A_eq, b_eq, lower, upper)
    if status != STATUS_OPTIMAL:
        return status, np.zeros(c.shape[0]), np.nan, np.zeros(A_ub.shape[0] + A_eq.shape[0]), it
    u, obj, duals = _extract(T, basis, kind, col, offset, ncol, c, A_ub.shape[0], A_eq.shape[0])
    return status, u, obj, duals, it


@njit(cache=True, nogil=True)
def simplex_face_kernel(c, d, A_ub, b_ub, A_eq, b_eq, lower, upper):
    """Minimize ``d @ u`` over the optimal face of ``min c @ u``.

    After phase 2 the primary reduced costs are frozen and only columns with
    zero primary reduced cost may enter, so every further pivot keeps the
    primary objective at its optimum. Returns (status, u, primary objective,
    secondary objective, iterations); row duals refer to the primary problem
    at the final basis.
    """
    status, T, basis, kind, col, offset, ncol, it = _build_and_optimize(c, A_ub, b_ub, A_eq, b_eq, lower, upper)
    n = c.shape[0]
    if status != STATUS_OPTIMAL:
        return status, np.zeros(n), np.nan, np.nan, it
    m = basis.shape[0]
    n_enter = ncol + m
    allowed = np.zeros(n_enter, np.bool_)
    for j in range(n_enter):
        allowed[j] = abs(T[m, j]) <= PIVOT_TOL
    dt, dconst = _transformed_cost(d, kind, col, offset, ncol)
    _set_objective(T, basis, m + 1, dt)
    max_iter = it + 50 * (m + T.shape[1])
    status, it = _run_phase(T, basis, m + 1, allowed, max_iter, it)
    if status != STATUS_OPTIMAL:
        return status, np.zeros(n), np.nan, np.nan, it
    u, obj, duals = _extract(T, basis, kind, col, offset, ncol, c, A_ub.shape[0], A_eq.shape[0])
    sec = 0.0
    for j in range(n):
        sec += d[j] * u[j]
    return status, u, obj, sec, it


def _solution(p, status, u, obj, duals, it):
    if status == STATUS_ITERATION_LIMIT:
        raise NumericalFailure(f"simplex exceeded its pivot cap after {it} pivots")
    sol = LpSolution(
        status=_STATUS_NAMES[status],
        primal=u if status == STATUS_OPTIMAL else np.full(p.n_vars, np.nan),
        objective_value=float(obj) if status == STATUS_OPTIMAL else (
            -np.inf if status == STATUS_UNBOUNDED else np.nan),
        row_duals=duals if status == STATUS_OPTIMAL else np.full(duals.size, np.nan),
        iterations=int(it),
        n_ineq=p.A_ub.shape[0],
    )
    return sol


def lp_solve(p: LpProblem) -> LpSolution:
    """Solve ``p`` with the two-phase Bland-rule simplex.

    >>> sol = lp_solve(LpProblem([1.0], A_ub=[[-1.0]], b_ub=[-1.0], lower=[-np.inf]))
    >>> sol.status, float(sol.primal[0]), sol.objective_value
    ('optimal', 1.0, 1.0)
    """
    out = simplex_kernel(p.objective, p.A_ub, p.b_ub, p.A_eq, p.b_eq, p.lower, p.upper)
    return _solution(p, *out)


def lp_solve_on_optimal_face(p: LpProblem, secondary_objective) -> LpSolution:
    """Exact lexicographic solve: minimize the secondary objective over the
    optimal face of ``p`` by continuing from the optimal tableau.

    ``objective_value`` is the primary objective; ``row_duals`` is left unset.
    """
    d = np.asarray(secondary_objective, dtype=np.float64).ravel()
    if d.size != p.n_vars:
        raise MalformedInputError("secondary objective has the wrong length")
    status, u, obj, sec, it = simplex_face_kernel(p.objective, d, p.A_ub, p.b_ub, p.A_eq, p.b_eq, p.lower, p.upper)
    if status == STATUS_ITERATION_LIMIT:
        raise NumericalFailure(f"simplex exceeded its pivot cap after {it} pivots")
    ok = status == STATUS_OPTIMAL
    return LpSolution(
        status=_STATUS_NAMES[status],
        primal=u if ok else np.full(p.n_vars, np.nan),
        objective_value=float(obj) if ok else np.nan,
        row_duals=None,
        iterations=int(it),
        n_ineq=p.A_ub.shape[0],
    )


def lp_solve_lexicographic(p: LpProblem, secondary_objective, tol: float) -> LpSolution:
    """Minimize ``secondary_objective`` over the (tol-)optimal face of ``p``.

    Runs ``p`` first; if it is not optimal that result is returned unchanged.
    Otherwise a second solve appends the row ``c @ u <= v* + tol``. The
    returned solution belongs to the second solve: its ``objective_value`` is
    the secondary objective and its last inequality dual belongs to the
    appended row.
    """
    if not tol >= 0:
        raise MalformedInputError("tol must be non-negative")
    d = np.asarray(secondary_objective, dtype=np.float64).ravel()
    if d.size != p.n_vars:
        raise MalformedInputError("secondary objective has the wrong length")
    first = lp_solve(p)
    if first.status != "optimal":
        return first
    p2 = LpProblem(
        d,
        A_ub=np.vstack([p.A_ub, p.objective[None, :]]),
        b_ub=np.append(p.b_ub, first.objective_value + tol),
        A_eq=p.A_eq,
        b_eq=p.b_eq,
        lower=p.lower,
        upper=p.upper,
    )
    return lp_solve(p2)
