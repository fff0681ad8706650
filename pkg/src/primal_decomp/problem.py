"""Constraint-coupled problem instances and ground-truth solvers.

An instance couples ``N`` agents, each owning a diagonal quadratic cost
``f_i(x) = 0.5 * x @ diag(q_i) @ x + c_i @ x`` over a box ``X_i``, through the
single scalar constraint ``sum_i a_i @ x_i <= b``.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from . import rng as _rng
from .errors import InfeasibleError, MalformedInputError, NumericalFailure, RefusalError, ConfigError


@dataclass
class AgentProblem:
    quad_diag: np.ndarray
    lin: np.ndarray
    coupling_row: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in
                (self.quad_diag, self.lin, self.coupling_row, self.box_lo, self.box_hi)]
        n = arrs[0].size
        if any(a.ndim != 1 or a.size != n for a in arrs):
            raise MalformedInputError("agent data vectors must share one dimension")
        self.quad_diag, self.lin, self.coupling_row, self.box_lo, self.box_hi = arrs
        if np.any(self.quad_diag <= 0):
            raise MalformedInputError("quadratic coefficients must be positive")
        if np.any(self.box_lo >= self.box_hi):
            raise MalformedInputError("box_lo must be < box_hi componentwise")

    @property
    def dim(self):
        return self.quad_diag.size

    def minimizer(self, lam):
        """Minimizer over the box of ``f(x) + lam * a @ x`` (closed form)."""
        return np.clip((-self.lin - lam * self.coupling_row) / self.quad_diag, self.box_lo, self.box_hi)

    def y_min(self):
        a = self.coupling_row
        return float(np.sum(np.minimum(a * self.box_lo, a * self.box_hi)))

    def y_max(self):
        a = self.coupling_row
        return float(np.sum(np.maximum(a * self.box_lo, a * self.box_hi)))


@dataclass
class ProblemInstance:
    agents: Sequence[AgentProblem]
    rhs: float
    penalty: float = 100.0

    def __post_init__(self):
        self.agents = list(self.agents)
        if not self.agents:
            raise MalformedInputError("an instance needs at least one agent")
        if not self.penalty > 0:
            raise MalformedInputError("penalty M must be positive")
        self.rhs = float(self.rhs)

    @property
    def n_agents(self):
        return len(self.agents)

    def with_penalty(self, penalty):
        return replace(self, penalty=float(penalty))


@dataclass
class ReferenceSolution:
    f_star: float
    lambda_star: float
    x_star: list
    method: str


@dataclass
class GenerationConfig:
    n_agents: int = 10
    dim: int = 3
    box_lo: float = -5.0
    box_hi: float = 5.0
    q_min: float = 0.5
    q_max: float = 2.0
    c_range: float = 1.0
    a_min: float = 0.1
    a_max: float = 1.0
    slater_margin: float = 0.25
    penalty: Union[float, str] = "auto"

    def validate(self):
        if self.n_agents < 1 or self.dim < 1:
            raise ConfigError("n_agents and dim must be >= 1")
        if not self.box_lo < self.box_hi:
            raise ConfigError("box_lo must be < box_hi")
        if not 0 < self.q_min <= self.q_max:
            raise ConfigError("need 0 < q_min <= q_max")
        if not 0 < self.a_min <= self.a_max:
            raise ConfigError("need 0 < a_min <= a_max")
        if not self.c_range >= 0:
            raise ConfigError("c_range must be >= 0")
        if not (math.isfinite(self.slater_margin) and self.slater_margin <= 1):
            raise ConfigError("slater_margin must be finite and <= 1")
        if self.penalty != "auto" and not (isinstance(self.penalty, (int, float)) and self.penalty > 0):
            raise ConfigError("penalty must be 'auto' or a positive number")


def eval_true(agent: AgentProblem, x) -> float:
    x = _as_point(agent, x)
    return float(0.5 * np.dot(x * agent.quad_diag, x) + np.dot(agent.lin, x))


def eval_true_subgradient(agent: AgentProblem, x) -> np.ndarray:
    x = _as_point(agent, x)
    return agent.quad_diag * x + agent.lin


def _as_point(agent, x):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (agent.dim,):
        raise MalformedInputError(f"expected a point of dimension {agent.dim}, got shape {x.shape}")
    return x


def slater_check(inst: ProblemInstance) -> float:
    """``b - sum_i min_{x in X_i} a_i @ x``; positive iff a strictly feasible point exists."""
    return inst.rhs - sum(a.y_min() for a in inst.agents)


def generate_instance(cfg: GenerationConfig, seed: int) -> ProblemInstance:
    """Draw an instance; agent ``i`` uses stream ``(seed, INSTANCE, i)``.

    Per agent the draws are, in order: ``dim`` quadratic coefficients in
    ``[q_min, q_max]``, ``dim`` linear coefficients in ``[-c_range, c_range]``,
    ``dim`` coupling coefficients in ``[a_min, a_max]``. The right-hand side is
    ``sum y_min + slater_margin * sum (y_max - y_min)``. A penalty of ``"auto"``
    resolves to ``max(100, 10 * lambda_star)``.
    """
    cfg.validate()
    agents = []
    for i in range(cfg.n_agents):
        s = _rng.stream(seed, _rng.INSTANCE, i)
        q = [s.uniform(cfg.q_min, cfg.q_max) for _ in range(cfg.dim)]
        c = [s.uniform(-cfg.c_range, cfg.c_range) for _ in range(cfg.dim)]
        a = [s.uniform(cfg.a_min, cfg.a_max) for _ in range(cfg.dim)]
        agents.append(AgentProblem(q, c, a, np.full(cfg.dim, float(cfg.box_lo)), np.full(cfg.dim, float(cfg.box_hi))))
    lo = sum(ag.y_min() for ag in agents)
    spread = sum(ag.y_max() - ag.y_min() for ag in agents)
    b = lo + cfg.slater_margin * spread
    inst = ProblemInstance(agents, b, penalty=1.0)
    if not slater_check(inst) > 0:
        raise InfeasibleError(f"generated instance violates Slater's condition (margin {slater_check(inst):.3g})")
    if cfg.penalty == "auto":
        return inst.with_penalty(auto_penalty(centralized_reference(inst).lambda_star))
    return inst.with_penalty(cfg.penalty)


def auto_penalty(lambda_star):
    return max(100.0, 10.0 * lambda_star)


def _dual_pieces(inst, lam):
    xs = [ag.minimizer(lam) for ag in inst.agents]
    g = sum(float(np.dot(ag.coupling_row, x)) for ag, x in zip(inst.agents, xs))
    f = sum(eval_true(ag, x) for ag, x in zip(inst.agents, xs))
    return xs, f, g


def centralized_reference(inst: ProblemInstance, tol: float = 1e-10) -> ReferenceSolution:
    """Maximize the scalar dual function of the coupled problem by bisection.

    ``q(lam) = sum_i min_{X_i} [f_i + lam a_i @ x] - lam b`` is concave with
    derivative ``sum_i a_i @ x_i(lam) - b``; the bracket ``[0, Lambda]`` is
    grown by doubling until that derivative is non-positive.
    """
    if not slater_check(inst) > 0:
        raise InfeasibleError("instance has no Slater point")
    xs, f, g = _dual_pieces(inst, 0.0)
    if g - inst.rhs <= 0:
        return ReferenceSolution(f, 0.0, xs, "dual_bisection")
    lo, hi = 0.0, 1.0
    for _ in range(200):
        _, _, g = _dual_pieces(inst, hi)
        if g - inst.rhs <= 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NumericalFailure("could not bracket the optimal multiplier")
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        _, _, g = _dual_pieces(inst, mid)
        if g - inst.rhs > 0:
            lo = mid
        else:
            hi = mid
    else:
        raise NumericalFailure("multiplier bisection did not converge in 200 steps")
    lam = hi
    xs, f, g = _dual_pieces(inst, lam)
    q = f + lam * (g - inst.rhs)
    return ReferenceSolution(q, lam, xs, "dual_bisection")


def _agent_grid(agent, resolution):
    axes = []
    for lo, hi in zip(agent.box_lo, agent.box_hi):
        k = int(math.ceil((hi - lo) / resolution - 1e-9)) + 1
        axes.append(np.linspace(lo, hi, max(k, 2)))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    f = 0.5 * np.sum(agent.quad_diag * pts * pts, axis=1) + pts @ agent.lin
    g = pts @ agent.coupling_row
    return pts, f, g


GRID_POINT_LIMIT = 50_000_000


def grid_oracle(inst: ProblemInstance, resolution: float) -> ReferenceSolution:
    """Exact optimum of the coupled problem restricted to a grid on each box.

    The last agent's points are sorted by coupling usage with a running
    minimum of cost, so the search over the joint grid costs one pass over
    the other agents' product grid plus a binary search per point.
    """
    total_dim = sum(a.dim for a in inst.agents)
    if total_dim > 4:
        raise RefusalError(f"grid oracle supports at most 4 total dimensions, got {total_dim}")
    if not resolution > 0:
        raise MalformedInputError("resolution must be positive")
    grids = [_agent_grid(a, resolution) for a in inst.agents]
    sizes = [gr[0].shape[0] for gr in grids]
    if math.prod(sizes[:-1]) > GRID_POINT_LIMIT or sizes[-1] > GRID_POINT_LIMIT:
        raise RefusalError("grid too fine for exhaustive search")

    last_pts, last_f, last_g = grids[-1]
    order = np.argsort(last_g, kind="stable")
    g_sorted = last_g[order]
    f_sorted = last_f[order]
    run_min = np.minimum.accumulate(f_sorted)
    positions = np.arange(len(f_sorted))
    arg_run = np.maximum.accumulate(np.where(f_sorted <= run_min, positions, 0))

    head_f = np.zeros(1)
    head_g = np.zeros(1)
    for _, f, g in grids[:-1]:
        head_f = (head_f[:, None] + f[None, :]).ravel()
        head_g = (head_g[:, None] + g[None, :]).ravel()

    budget = inst.rhs - head_g
    pos = np.searchsorted(g_sorted, budget + 1e-12 * (1 + abs(inst.rhs)), side="right") - 1
    ok = pos >= 0
    if not np.any(ok):
        raise InfeasibleError("no grid point satisfies the coupling constraint")
    total = np.full(len(head_f), np.inf)
    total[ok] = head_f[ok] + run_min[pos[ok]]
    k = int(np.argmin(total))
    head_idx = np.unravel_index(k, sizes[:-1]) if len(sizes) > 1 else ()
    x_star = [grids[i][0][head_idx[i]] for i in range(len(grids) - 1)]
    x_star.append(last_pts[order[arg_run[pos[k]]]])
    return ReferenceSolution(float(total[k]), float("nan"), x_star, "grid")


def auto_grid_resolution(inst: ProblemInstance, budget: float = 2e7, finest: int = 100_001):
    """Resolution giving at most ``budget`` points in either search stage."""
    head_dim = max(1, sum(a.dim for a in inst.agents[:-1]))
    d = max(head_dim, inst.agents[-1].dim)
    pts = min(finest, int(budget ** (1.0 / d)))
    width = max(float(np.max(a.box_hi - a.box_lo)) for a in inst.agents)
    return width / (pts - 1)
