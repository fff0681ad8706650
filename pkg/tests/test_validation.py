import numpy as np
import pytest
from scipy.optimize import linprog

from primal_decomp.graph import generate_erdos_renyi
from primal_decomp.problem import GenerationConfig, centralized_reference, generate_instance
from primal_decomp.runtime import RunConfig
from primal_decomp.subsolver import dual_value, smallest_max_multiplier
from primal_decomp.validation import (SuiteResult, degenerate_subproblem, suite_convexity,
                                      suite_epsilon_decay, suite_interpolation, suite_run_invariants,
                                      suite_tie_break, suite_uniform_convergence, vertex_dual)


def highs_dual(sub, mu):
    """q(mu) through an epigraph LP solved by HiGHS."""
    G, beta = sub.estimate.slopes, sub.estimate.intercepts
    K, n = G.shape
    c = np.concatenate([mu * sub.coupling_row, [1.0]])
    A = np.hstack([G, -np.ones((K, 1))])
    res = linprog(c, A, -beta, bounds=list(zip(sub.box_lo, sub.box_hi)) + [(None, None)], method="highs")
    return res.fun - mu * sub.allocation


@pytest.fixture(scope="module")
def instance():
    return generate_instance(GenerationConfig(), 0)


def test_suite_result_line():
    assert SuiteResult("x", True, "ok").line() == "PASS  x: ok"
    assert SuiteResult("y", False, "bad").line().startswith("FAIL  y")


def test_degenerate_subproblem_has_flat_dual():
    rng = np.random.default_rng(0)
    for _ in range(20):
        sub, grid, expected = degenerate_subproblem(rng, grid_points=500)
        assert np.min(np.abs(grid - expected)) <= 1e-12
        q = vertex_dual(sub, grid)
        top = q.max()
        maximizers = grid[q >= top - 1e-9 * (1 + abs(top))]
        assert maximizers[0] == pytest.approx(expected, abs=1e-12)
        assert len(maximizers) >= 2


def test_vertex_dual_agrees_with_highs():
    rng = np.random.default_rng(1)
    for _ in range(10):
        sub, grid, _ = degenerate_subproblem(rng, grid_points=40)
        for mu in grid[::7]:
            assert vertex_dual(sub, [mu])[0] == pytest.approx(highs_dual(sub, mu), abs=1e-9)
            assert dual_value(sub, mu) == pytest.approx(highs_dual(sub, mu), abs=1e-9)


def test_tie_break_on_fine_grid():
    rng = np.random.default_rng(2)
    sub, grid, expected = degenerate_subproblem(rng)
    assert smallest_max_multiplier(sub) == pytest.approx(expected, abs=10 * sub.default_tol)
    res = suite_tie_break(rng, count=10)
    assert res.passed, res.detail


def test_fit_suites(instance):
    for suite in (suite_interpolation, suite_convexity):
        res = suite(instance, np.random.default_rng(3))
        assert res.passed, res.detail


def test_convergence_suites():
    for suite in (suite_uniform_convergence, suite_epsilon_decay):
        res = suite(np.random.default_rng(4))
        assert res.passed, res.detail


def test_run_invariants_detect_small_penalty():
    inst = generate_instance(GenerationConfig(n_agents=4, dim=2), 1)
    g = generate_erdos_renyi(4, 0.5, 1)
    ref = centralized_reference(inst)
    cfg = RunConfig(iters=120, free_rounds=10)
    good = {r.name: r.passed for r in suite_run_invariants(inst, g, cfg, ref.f_star)}
    assert good == {"conservation": True, "run_multiplier_bounds": True, "rho_vanishing": True}
    low = inst.with_penalty(0.5 * ref.lambda_star)
    bad = {r.name: r.passed for r in suite_run_invariants(low, g, cfg, ref.f_star)}
    assert bad == {"conservation": True, "run_multiplier_bounds": True, "rho_vanishing": False}
