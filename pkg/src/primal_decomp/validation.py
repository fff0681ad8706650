"""Property suites for the subproblem solver, the oracle and the runtime.

Each suite draws fresh random cases, checks one mathematical property and
returns a :class:`SuiteResult`. The CLI ``validate`` command runs them on
the configured instance; the test-suite reuses them at larger sizes.
"""
from dataclasses import dataclass

import numpy as np

from .oracle import (MaxAffineEstimate, Sample, SampleSet, eval_estimate, fit_max_affine)
from .problem import AgentProblem, ProblemInstance, eval_true
from .runtime import RunConfig, run
from .subsolver import (Subproblem, dual_value, epsilon_estimate, smallest_max_multiplier,
                        solve_subproblem, true_primal_function, y_range)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def uniform_samples(agent: AgentProblem, k: int, rng: np.random.Generator, capacity=None) -> SampleSet:
    pts = rng.uniform(agent.box_lo, agent.box_hi, size=(k, agent.dim))
    return SampleSet([Sample(z, eval_true(agent, z), 0) for z in pts], capacity or max(k, 1))


def random_subproblem(agent: AgentProblem, penalty: float, rng: np.random.Generator,
                      k: int = 12, y_pad: float = 1.0) -> Subproblem:
    """Surrogate subproblem from ``k`` uniform samples at a random allocation."""
    est = fit_max_affine(uniform_samples(agent, k, rng))
    yr = y_range(agent.coupling_row, agent.box_lo, agent.box_hi)
    y = rng.uniform(yr.y_min - y_pad, yr.y_max + y_pad)
    return Subproblem(est, agent.coupling_row, agent.box_lo, agent.box_hi, y, penalty)


def _with_y(sub, y):
    return Subproblem(sub.estimate, sub.coupling_row, sub.box_lo, sub.box_hi, y, sub.penalty)


def suite_multiplier_bounds(inst: ProblemInstance, rng, count=200):
    bad = 0
    for k in range(count):
        agent = inst.agents[k % inst.n_agents]
        pair = solve_subproblem(random_subproblem(agent, inst.penalty, rng))
        bad += not (0.0 <= pair.mu <= inst.penalty)
    return SuiteResult("multiplier_bounds", bad == 0, f"{bad} of {count} multipliers outside [0, M]")


def suite_strong_duality(inst, rng, count=200):
    worst = 0.0
    for k in range(count):
        sub = random_subproblem(inst.agents[k % inst.n_agents], inst.penalty, rng)
        pair = solve_subproblem(sub)
        gap = abs(pair.value - dual_value(sub, pair.mu)) / (1.0 + abs(pair.value))
        worst = max(worst, gap)
    return SuiteResult("strong_duality", worst <= 1e-6, f"max scaled primal-dual gap {worst:.2e}")


def suite_subderivative(inst, rng, count=50, h=1e-4):
    """Central differences of p against -mu at differentiable allocations."""
    worst, checked, tries = 0.0, 0, 0
    while checked < count and tries < 20 * count:
        tries += 1
        agent = inst.agents[tries % inst.n_agents]
        sub = random_subproblem(agent, inst.penalty, rng, y_pad=0.0)
        y = sub.allocation
        mu_p = smallest_max_multiplier(_with_y(sub, y + h))
        mu_m = smallest_max_multiplier(_with_y(sub, y - h))
        if abs(mu_p - mu_m) > 1e-6:
            continue
        fd = (solve_subproblem(_with_y(sub, y + h)).value - solve_subproblem(_with_y(sub, y - h)).value) / (2 * h)
        worst = max(worst, abs(-smallest_max_multiplier(sub) - fd))
        checked += 1
    ok = worst <= 1e-3 and checked == count
    return SuiteResult("subderivative", ok, f"{checked} allocations, max |-mu - dp/dy| {worst:.2e}")


def suite_primal_shape(inst, rng, count=20, points=6):
    """p is flat above y_max and has slope -M below y_min."""
    flat_err, slope_err, mu_bad = 0.0, 0.0, 0
    M = inst.penalty
    for k in range(count):
        agent = inst.agents[k % inst.n_agents]
        sub = random_subproblem(agent, M, rng)
        yr = y_range(agent.coupling_row, agent.box_lo, agent.box_hi)
        span = max(1.0, yr.y_max - yr.y_min)
        above = yr.y_max + span * np.linspace(1e-3, 1.0, points)
        below = yr.y_min - span * np.linspace(1e-3, 1.0, points)
        p_top = solve_subproblem(_with_y(sub, yr.y_max)).value
        for y in above:
            pair = solve_subproblem(_with_y(sub, y))
            flat_err = max(flat_err, abs(pair.value - p_top))
            mu_bad += pair.mu != 0.0
        vals = [solve_subproblem(_with_y(sub, y)) for y in below]
        for (y1, a), (y2, b) in zip(zip(below, vals), zip(below[1:], vals[1:])):
            slope = (b.value - a.value) / (y2 - y1)
            slope_err = max(slope_err, abs(slope + M) / M)
        mu_bad += sum(v.mu != M for v in vals)
    ok = flat_err <= 1e-8 and slope_err <= 1e-6 and mu_bad == 0
    return SuiteResult("primal_shape", ok,
                       f"flat dev {flat_err:.1e}, slope dev {slope_err:.1e}, {mu_bad} boundary multipliers off")


def degenerate_subproblem(rng, penalty=10.0, grid_points=10_000, pieces=5):
    """1-D surrogate whose dual is flat on an interval starting on a μ-grid point.

    The surrogate has kinks with subgradient intervals ``[-a*m_hi, -a*m_lo]``
    for grid multipliers ``m``; placing the allocation at a kink makes ``q``
    constant on ``[m_lo, m_hi]`` so the smallest maximizer is ``m_lo``.
    Returns ``(subproblem, mu_grid, expected_mu)``.
    """
    grid = np.linspace(0.0, penalty, grid_points)
    idx = np.sort(rng.choice(np.arange(1, grid_points - 1), size=pieces, replace=False))
    a = rng.uniform(0.2, 2.0)
    slopes = -a * grid[idx][::-1]                     # increasing slopes
    knots = np.sort(rng.uniform(-1.0, 1.0, size=pieces - 1))
    # build a continuous max-affine function from slopes and knot locations
    anchors = np.concatenate([[knots[0] - 0.5], 0.5 * (knots[:-1] + knots[1:]), [knots[-1] + 0.5]])
    values = np.empty(pieces)
    values[0] = 0.0
    for k in range(1, pieces):
        # piece k meets piece k-1 at knots[k-1]
        at_knot = values[k - 1] + slopes[k - 1] * (knots[k - 1] - anchors[k - 1])
        values[k] = at_knot + slopes[k] * (anchors[k] - knots[k - 1])
    est = MaxAffineEstimate(slopes[:, None], anchors[:, None], values)
    j = rng.integers(0, pieces - 1)
    sub = Subproblem(est, [a], [-2.0], [2.0], a * knots[j], penalty)
    # at knot j, pieces j and j+1 are active: subgradients [slopes[j], slopes[j+1]]
    expected = -slopes[j + 1] / a
    return sub, grid, expected


def vertex_dual(sub, mu):
    """Dual function of a 1-D surrogate subproblem by vertex enumeration.

    The inner minimum of a piecewise-linear function over an interval is
    attained at an end point or a kink, so no LP is involved. Kinks are taken
    between slope-adjacent pieces, which is exact when every piece is active
    somewhere (as in :func:`degenerate_subproblem`).
    """
    est = sub.estimate
    g, b = est.slopes[:, 0], est.intercepts
    order = np.argsort(g)
    g, b = g[order], b[order]
    kinks = (b[:-1] - b[1:]) / (g[1:] - g[:-1])
    lo, hi = sub.box_lo[0], sub.box_hi[0]
    verts = np.concatenate([[lo, hi], kinks[(kinks > lo) & (kinks < hi)]])
    f = np.max(g[None, :] * verts[:, None] + b[None, :], axis=1)
    a, y = sub.coupling_row[0], sub.allocation
    mu = np.asarray(mu, dtype=np.float64)
    return np.min(f[None, :] + mu[:, None] * (a * verts[None, :] - y), axis=1)


def suite_tie_break(rng, count=50, grid_points=10_000):
    worst_gap, worst_q = 0.0, 0.0
    for _ in range(count):
        sub, grid, expected = degenerate_subproblem(rng, grid_points=grid_points)
        tol = sub.default_tol
        mu = smallest_max_multiplier(sub, tol)
        q = vertex_dual(sub, grid)
        q_best = q.max()
        maximizers = grid[q >= q_best - 1e-9 * (1.0 + abs(q_best))]
        worst_gap = max(worst_gap, abs(mu - maximizers[0]) / tol)
        worst_q = max(worst_q, q_best - dual_value(sub, mu))
    ok = worst_gap <= 10.0 and worst_q <= 1e-8
    return SuiteResult("tie_break", ok,
                       f"max |mu - leftmost grid maximizer| = {worst_gap:.2f} tol, max q shortfall {worst_q:.1e}")


def suite_interpolation(inst, rng, count=100, k=20):
    worst_slack, worst_interp = 0.0, 0.0
    for c in range(count):
        agent = inst.agents[c % inst.n_agents]
        ss = uniform_samples(agent, k, rng)
        est = fit_max_affine(ss)
        worst_slack = max(worst_slack, est.fit_slack)
        worst_interp = max(worst_interp, float(np.max(np.abs(eval_estimate(est, ss.points()) - ss.values()))))
    ok = worst_slack <= 1e-7 and worst_interp <= 1e-6
    return SuiteResult("interpolation", ok, f"max fit slack {worst_slack:.1e}, max anchor error {worst_interp:.1e}")


def suite_convexity(inst, rng, count=50, pairs=20):
    worst = 0.0
    for c in range(count):
        agent = inst.agents[c % inst.n_agents]
        est = fit_max_affine(uniform_samples(agent, 15, rng))
        x = rng.uniform(agent.box_lo, agent.box_hi, size=(pairs, agent.dim))
        y = rng.uniform(agent.box_lo, agent.box_hi, size=(pairs, agent.dim))
        th = rng.uniform(0, 1, size=(pairs, 1))
        lhs = eval_estimate(est, th * x + (1 - th) * y)
        rhs = th[:, 0] * eval_estimate(est, x) + (1 - th[:, 0]) * eval_estimate(est, y)
        worst = max(worst, float(np.max(lhs - rhs)))
    return SuiteResult("convexity", worst <= 1e-9, f"max midpoint excess {worst:.1e}")


def one_dim_agent(rng):
    return AgentProblem([rng.uniform(0.5, 2.0)], [rng.uniform(-1.0, 1.0)], [rng.uniform(0.1, 1.0)], [-5.0], [5.0])


def sup_error(agent, k, rng, grid_n=200):
    est = fit_max_affine(uniform_samples(agent, k, rng))
    z = np.linspace(agent.box_lo[0], agent.box_hi[0], grid_n)[:, None]
    true = 0.5 * agent.quad_diag[0] * z[:, 0] ** 2 + agent.lin[0] * z[:, 0]
    return float(np.max(np.abs(eval_estimate(est, z) - true)))


def suite_uniform_convergence(rng, seeds=10):
    small, large = 0.0, 0.0
    for _ in range(seeds):
        agent = one_dim_agent(rng)
        small += sup_error(agent, 8, rng)
        large += sup_error(agent, 64, rng)
    return SuiteResult("uniform_convergence", large < small,
                       f"mean sup error K=8 {small / seeds:.3f}, K=64 {large / seeds:.3f}")


def epsilon_at(agent, k, rng, penalty=100.0, y_frac=0.3, grid_n=200):
    """Grid ε-subgradient gap at a fixed allocation for a ``k``-sample fit."""
    yr = y_range(agent.coupling_row, agent.box_lo, agent.box_hi)
    y0 = yr.y_min + y_frac * (yr.y_max - yr.y_min)
    est = fit_max_affine(uniform_samples(agent, k, rng))
    sub = Subproblem(est, agent.coupling_row, agent.box_lo, agent.box_hi, y0, penalty)
    mu = smallest_max_multiplier(sub)
    return epsilon_estimate(true_primal_function(agent, penalty), -mu, y0, yr, grid_n)


def suite_epsilon_decay(rng, seeds=20, ratio=0.25):
    small = large = 0.0
    for _ in range(seeds):
        agent = one_dim_agent(rng)
        small += epsilon_at(agent, 8, rng)
        large += epsilon_at(agent, 64, rng)
    ok = large <= ratio * small
    return SuiteResult("epsilon_decay", ok, f"mean eps K=8 {small / seeds:.3e}, K=64 {large / seeds:.3e}")


def suite_run_invariants(inst, graph, run_cfg: RunConfig, f_star=None):
    """Conservation, multiplier bounds and vanishing relaxation on a full run."""
    trace = run(inst, graph, run_cfg, f_star=f_star)
    T = len(trace)
    b_scale = 1.0 + abs(inst.rhs)
    resid = float(np.max(trace.column("alloc_residual"))) if T else 0.0
    mus = trace.multipliers
    mu_ok = bool(np.all((mus >= 0.0) & (mus <= inst.penalty)))
    late_rho = float(np.max(trace.rhos[T // 2:])) if T else 0.0
    return [
        SuiteResult("conservation", resid <= 1e-9 * b_scale, f"max |sum y - b| {resid:.1e}"),
        SuiteResult("run_multiplier_bounds", mu_ok, f"{mus.size} recorded multipliers"),
        SuiteResult("rho_vanishing", late_rho <= 1e-6, f"max rho over the second half {late_rho:.2e}"),
    ]


def run_all(cfg, inst, graph, seed):
    """All suites for the CLI; ``cfg`` is a parsed :class:`~.config.Config`."""
    rngs = [np.random.default_rng([seed, k]) for k in range(10)]
    results = [
        suite_multiplier_bounds(inst, rngs[0]),
        suite_strong_duality(inst, rngs[1]),
        suite_subderivative(inst, rngs[2]),
        suite_primal_shape(inst, rngs[3]),
        suite_tie_break(rngs[4], count=20),
        suite_interpolation(inst, rngs[5]),
        suite_convexity(inst, rngs[6]),
        suite_uniform_convergence(rngs[7]),
        suite_epsilon_decay(rngs[8]),
    ]
    results += suite_run_invariants(inst, graph, cfg.run)
    return results
