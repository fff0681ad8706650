"""Synchronous round engine for the distributed primal decomposition method.

Each round every agent (1) queries its oracle for one new sample and refits
its surrogate, (2) solves its relaxed subproblem at the current allocation
and publishes the multiplier, and, once all agents have published, (3)
updates its allocation from the multipliers of its neighbors::

    y_i <- y_i + alpha_t * sum_{j in N(i)} (mu_i - mu_j)

Phases (1)-(2) are independent across agents and may run on a thread pool;
phase (3) is sequential with neighbor sums accumulated in ascending order,
so results do not depend on the schedule.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import rng as _rng
from .errors import ConfigError, NumericalFailure, PrimalDecompError
from .graph import Graph, neighbors
from .oracle import (MaxAffineEstimate, SampleSet, SamplingSchedule, draw_sample,
                     fit_max_affine, prune)
from .problem import ProblemInstance, centralized_reference, eval_true
from .subsolver import (Subproblem, epsilon_estimate, solve_subproblem, true_primal_function,
                        y_range)


@dataclass
class RunConfig:
    iters: int = 2000
    alpha0: float = 0.5
    alpha_exp: float = 1.0
    free_rounds: int = 50
    r0: float = 2.0
    r_min: float = 0.05
    decay: float = 0.99
    K_max: int = 30
    refit_every: int = 1
    slack_weight: float = 100.0
    eps_diag: bool = False
    eps_grid: int = 200
    seed: int = 0
    workers: int = 1

    def validate(self):
        if self.iters < 0:
            raise ConfigError("iters must be >= 0")
        if not self.alpha0 > 0:
            raise ConfigError("alpha0 must be positive")
        if not 0.5 < self.alpha_exp <= 1.0:
            raise ConfigError("alpha_exp must lie in (0.5, 1]")
        if self.free_rounds < 0:
            raise ConfigError("free_rounds must be >= 0")
        if not (self.r0 > 0 and self.r_min > 0):
            raise ConfigError("r0 and r_min must be positive")
        if not 0 < self.decay <= 1:
            raise ConfigError("decay must lie in (0, 1]")
        if self.K_max < 1:
            raise ConfigError("K_max must be >= 1")
        if self.refit_every < 1:
            raise ConfigError("refit_every must be >= 1")
        if not self.slack_weight > 0:
            raise ConfigError("slack_weight must be positive")
        if self.eps_grid < 2:
            raise ConfigError("eps_grid must be >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def schedule(self):
        return SamplingSchedule(self.free_rounds, self.r0, self.r_min, self.decay)


@dataclass
class AgentState:
    allocation: float
    rng: _rng.SplitMix64
    samples: SampleSet
    estimate: Optional[MaxAffineEstimate] = None
    last_x: Optional[np.ndarray] = None
    last_rho: float = 0.0
    last_mu: float = 0.0
    last_value: float = 0.0


@dataclass
class TraceRow:
    t: int
    alpha: float
    cost_true: float
    cost_relaxed_est: float
    cost_err_abs: float
    coupling_violation: float
    alloc_residual: float
    max_rho: float
    mu_min: float
    mu_max: float
    eps_hat: Optional[float] = None


@dataclass
class Trace:
    """Per-round metrics plus the raw per-agent histories.

    ``allocations[t]`` holds the allocations used in round ``t`` (before
    that round's update).
    """
    rows: List[TraceRow] = field(default_factory=list)
    allocations: np.ndarray = None
    multipliers: np.ndarray = None
    rhos: np.ndarray = None
    f_star: float = float("nan")
    final_x: list = None

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=np.float64)


class MessageBoard:
    """Multipliers published in the current round.

    Reads are only allowed once every agent has published; the update phase
    goes through :meth:`read` so tests can substitute an auditing board.
    """

    def __init__(self, n):
        self._mu = [None] * n

    def publish(self, i, mu):
        self._mu[i] = float(mu)

    def read(self, reader, j):
        mu = self._mu[j]
        if mu is None:
            raise PrimalDecompError(f"agent {reader} read unpublished multiplier of agent {j}")
        return mu


def init(inst: ProblemInstance, g: Graph, cfg: RunConfig) -> List[AgentState]:
    if g.n != inst.n_agents:
        raise ConfigError(f"graph has {g.n} vertices but the instance has {inst.n_agents} agents")
    share = inst.rhs / inst.n_agents
    return [AgentState(share, _rng.stream(cfg.seed, _rng.ORACLE, i), SampleSet([], cfg.K_max))
            for i in range(inst.n_agents)]


def step_size(t: int, cfg: RunConfig) -> float:
    return cfg.alpha0 / (t + 1) ** cfg.alpha_exp


def _local_phase(i, t, st, inst, cfg):
    agent = inst.agents[i]
    sample = draw_sample(agent, st.last_x, t, cfg.schedule, st.rng)
    st.samples.add(sample)
    center = st.last_x if st.last_x is not None else sample.point
    st.samples = prune(st.samples, center)
    if st.estimate is None or t % cfg.refit_every == 0:
        st.estimate = fit_max_affine(st.samples, cfg.slack_weight)
    sub = Subproblem(st.estimate, agent.coupling_row, agent.box_lo, agent.box_hi,
                     st.allocation, inst.penalty)
    pair = solve_subproblem(sub)
    st.last_x, st.last_rho, st.last_mu, st.last_value = pair.x, pair.rho, pair.mu, pair.value


def _guarded(i, t, st, inst, cfg):
    try:
        _local_phase(i, t, st, inst, cfg)
    except NumericalFailure as exc:
        exc.agent, exc.round = i, t
        raise
    except (ArithmeticError, ValueError) as exc:
        raise NumericalFailure(str(exc), agent=i, round=t) from exc


def round(t, states, inst, g, cfg, board=None, pool=None):
    """Execute round ``t`` in place and return ``states``."""
    _solve_phase(t, states, inst, cfg, pool)
    _update(t, states, g, cfg, board)
    return states


def _eps_hat(states, inst, cfg, primal_fns):
    worst = 0.0
    for st, agent, p in zip(states, inst.agents, primal_fns):
        yr = y_range(agent.coupling_row, agent.box_lo, agent.box_hi)
        worst = max(worst, epsilon_estimate(p, -st.last_mu, st.allocation, yr, cfg.eps_grid))
    return worst


def run(inst: ProblemInstance, g: Graph, cfg: RunConfig, f_star: float = None,
        board_factory=None) -> Trace:
    """Run ``cfg.iters`` rounds and return the trace.

    ``f_star`` is only used for the reported cost error; it is computed by
    the centralized reference when not supplied.
    """
    cfg.validate()
    if f_star is None:
        f_star = centralized_reference(inst).f_star
    states = init(inst, g, cfg)
    T, n = cfg.iters, inst.n_agents
    trace = Trace(allocations=np.zeros((T, n)), multipliers=np.zeros((T, n)),
                  rhos=np.zeros((T, n)), f_star=float(f_star))
    primal_fns = [true_primal_function(a, inst.penalty) for a in inst.agents] if cfg.eps_diag else None
    scale = 1.0 + abs(inst.rhs)
    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for t in range(T):
            y = np.array([st.allocation for st in states])
            board = board_factory(n) if board_factory is not None else None
            # metrics pair y^t with the round-t solutions, so solve and
            # update are run separately here
            _solve_phase(t, states, inst, cfg, pool)
            trace.allocations[t] = y
            trace.multipliers[t] = [st.last_mu for st in states]
            trace.rhos[t] = [st.last_rho for st in states]
            trace.rows.append(_metrics(t, states, inst, cfg, f_star, y, scale, primal_fns))
            _update(t, states, g, cfg, board)
    finally:
        if pool is not None:
            pool.shutdown()
    trace.final_x = [st.last_x for st in states]
    return trace


def _solve_phase(t, states, inst, cfg, pool=None):
    if pool is None:
        for i, st in enumerate(states):
            _guarded(i, t, st, inst, cfg)
    else:
        for f in [pool.submit(_guarded, i, t, st, inst, cfg) for i, st in enumerate(states)]:
            f.result()


def _update(t, states, g, cfg, board=None):
    # runs after the barrier: every multiplier is published before any read
    board = MessageBoard(len(states)) if board is None else board
    for i, st in enumerate(states):
        board.publish(i, st.last_mu)
    alpha = step_size(t, cfg)
    new_y = []
    for i, st in enumerate(states):
        own = board.read(i, i)
        acc = 0.0
        for j in neighbors(g, i):
            acc += own - board.read(i, j)
        new_y.append(st.allocation + alpha * acc)
    for st, y in zip(states, new_y):
        st.allocation = y


def _metrics(t, states, inst, cfg, f_star, y, scale, primal_fns):
    cost_true = 0.0
    relaxed = 0.0
    usage = 0.0
    for st, agent in zip(states, inst.agents):
        cost_true += eval_true(agent, st.last_x)
        relaxed += st.last_value
        usage += float(agent.coupling_row @ st.last_x)
    mus = [st.last_mu for st in states]
    eps = _eps_hat(states, inst, cfg, primal_fns) if primal_fns is not None else None
    return TraceRow(
        t=t,
        alpha=step_size(t, cfg),
        cost_true=cost_true,
        cost_relaxed_est=relaxed,
        cost_err_abs=abs(f_star - cost_true),
        coupling_violation=max(0.0, usage - inst.rhs),
        alloc_residual=abs(math.fsum(y) - inst.rhs),
        max_rho=max(st.last_rho for st in states),
        mu_min=min(mus),
        mu_max=max(mus),
        eps_hat=eps,
    )
