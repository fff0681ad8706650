import numpy as np
import pytest
from scipy.optimize import linprog

from primal_decomp.errors import MalformedInputError
from primal_decomp.oracle import MaxAffineEstimate
from primal_decomp.problem import AgentProblem, GenerationConfig, generate_instance
from primal_decomp.subsolver import (Subproblem, YRange, dual_value, epsilon_estimate, inner_min,
                                     primal_value, smallest_max_multiplier, solve_subproblem,
                                     true_primal_function, y_range)
from primal_decomp.validation import (degenerate_subproblem, random_subproblem, suite_multiplier_bounds,
                                      suite_primal_shape, suite_strong_duality, suite_subderivative,
                                      vertex_dual)

IDENTITY = MaxAffineEstimate([[1.0]], [[0.0]], [0.0])          # f(x) = x
ABS = MaxAffineEstimate([[-1.0], [1.0]], [[0.0], [0.0]], [0.0, 0.0])  # f(x) = |x|


def sub1(est, lo, hi, y, M=10.0, a=1.0):
    return Subproblem(est, [a], [lo], [hi], y, M)


def grid_p(est, a, lo, hi, y, M, n=20001):
    """p(y) for a 1-D surrogate by scanning x; the best rho is max(0, a x - y)."""
    xs = np.linspace(lo, hi, n)
    f = np.max(est.slopes[:, 0][None, :] * xs[:, None] + est.intercepts[None, :], axis=1)
    return float(np.min(f + M * np.maximum(0.0, a * xs - y)))


def highs_p(sub):
    """p(y) from the epigraph LP solved by HiGHS (variables x, s, rho)."""
    G, beta = sub.estimate.slopes, sub.estimate.intercepts
    K, n = G.shape
    c = np.concatenate([np.zeros(n), [1.0, sub.penalty]])
    A = np.vstack([np.hstack([G, -np.ones((K, 1)), np.zeros((K, 1))]),
                   np.concatenate([sub.coupling_row, [0.0, -1.0]])[None, :]])
    b = np.concatenate([-beta, [sub.allocation]])
    bounds = list(zip(sub.box_lo, sub.box_hi)) + [(None, None), (0, None)]
    res = linprog(c, A, b, bounds=bounds, method="highs")
    assert res.status == 0
    return res.fun


@pytest.fixture(scope="module")
def instance():
    return generate_instance(GenerationConfig(), 0)


# y_range ---------------------------------------------------------------------

def test_y_range_examples():
    assert y_range([1.0, -2.0], [0, 0], [1, 1]) == YRange(-2.0, 1.0)
    assert y_range([0.0, 0.0], [0, 0], [1, 1]) == YRange(0.0, 0.0)


def test_y_range_matches_grid():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.normal(size=2)
        lo = rng.uniform(-2, 0, 2)
        hi = lo + rng.uniform(0.1, 2, 2)
        g = np.stack(np.meshgrid(*[np.arange(l, h + 5e-4, 1e-3).clip(l, h) for l, h in zip(lo, hi)]), -1)
        vals = g.reshape(-1, 2) @ a
        yr = y_range(a, lo, hi)
        assert abs(yr.y_min - vals.min()) <= 1e-3 and abs(yr.y_max - vals.max()) <= 1e-3


# inner minimization ----------------------------------------------------------

def test_inner_min_examples():
    x, v = inner_min(IDENTITY, [1.0], 0.0, ([0.0], [1.0]))
    assert x[0] == pytest.approx(0.0) and v == pytest.approx(0.0)
    # |x| + x is zero on [-1, 0]; the smallest a @ x is at -1
    x, v = inner_min(ABS, [1.0], 1.0, ([-1.0], [1.0]))
    xs = np.linspace(-1, 1, 20001)
    vals = np.abs(xs) + xs
    assert v == pytest.approx(vals.min(), abs=1e-12)
    assert x[0] == pytest.approx(xs[vals <= vals.min() + 1e-12].min(), abs=1e-12)


def test_inner_min_large_mu_hits_lower_corner():
    rng = np.random.default_rng(1)
    est = MaxAffineEstimate(rng.uniform(-2, 2, (6, 3)), rng.uniform(-1, 1, (6, 3)), rng.normal(size=6))
    x, _ = inner_min(est, [1.0, 0.5, 2.0], 100.0, ([-1.0] * 3, [1.0] * 3))
    np.testing.assert_allclose(x, [-1.0] * 3)


# dual function ---------------------------------------------------------------

def test_dual_at_zero_is_box_minimum():
    x, v = inner_min(ABS, [1.0], 0.0, ([-1.0], [2.0]))
    assert dual_value(sub1(ABS, -1, 2, 0.7), 0.0) == pytest.approx(v) == pytest.approx(0.0)


def test_dual_linear_example():
    sub = sub1(IDENTITY, 0, 1, -1.0)
    assert dual_value(sub, 10.0) == pytest.approx(10.0)
    for mu in (0.0, 2.5, 7.0):
        assert dual_value(sub, mu) == pytest.approx(mu)


def test_dual_concave(instance):
    rng = np.random.default_rng(2)
    for _ in range(50):
        sub = random_subproblem(instance.agents[rng.integers(10)], instance.penalty, rng)
        m1, m2 = rng.uniform(0, sub.penalty, 2)
        mid = dual_value(sub, 0.5 * (m1 + m2))
        assert mid >= 0.5 * (dual_value(sub, m1) + dual_value(sub, m2)) - 1e-9


def test_dual_matches_vertex_enumeration():
    rng = np.random.default_rng(3)
    sub, grid, _ = degenerate_subproblem(rng, grid_points=50)
    q = vertex_dual(sub, grid)
    for mu, want in zip(grid, q):
        assert dual_value(sub, mu) == pytest.approx(want, abs=1e-9)


def test_dual_rejects_out_of_range():
    with pytest.raises(MalformedInputError):
        dual_value(sub1(IDENTITY, 0, 1, 0.0), 11.0)
    with pytest.raises(MalformedInputError):
        dual_value(sub1(IDENTITY, 0, 1, 0.0), -0.1)


# multiplier ------------------------------------------------------------------

def test_multiplier_singleton_box():
    assert smallest_max_multiplier(sub1(ABS, 0.3, 0.3, 0.3)) == 0.0


def test_multiplier_increasing_dual():
    assert smallest_max_multiplier(sub1(IDENTITY, 0, 1, -1.0)) == 10.0


def test_multiplier_interior_kink():
    sub = sub1(ABS, -1, 1, -0.5)
    mu = smallest_max_multiplier(sub)
    assert mu == pytest.approx(1.0, abs=10 * sub.default_tol)
    # grid over mu of the independently enumerated dual
    grid = np.linspace(0, 10, 10001)
    q = vertex_dual(sub, grid)
    assert grid[np.argmax(q)] == pytest.approx(1.0, abs=1e-3)


def test_multiplier_picks_left_end_of_flat_dual():
    rng = np.random.default_rng(4)
    for _ in range(20):
        sub, grid, expected = degenerate_subproblem(rng, grid_points=1000)
        mu = smallest_max_multiplier(sub)
        assert mu == pytest.approx(expected, abs=10 * sub.default_tol)
        # a strictly larger multiplier also maximizes, so the choice is a real tie-break
        assert dual_value(sub, min(sub.penalty, expected + 0.001)) == pytest.approx(dual_value(sub, mu), abs=1e-9)


def test_multiplier_bad_tol():
    with pytest.raises(MalformedInputError):
        smallest_max_multiplier(sub1(IDENTITY, 0, 1, 0.0), tol=0.0)


# full subproblem -------------------------------------------------------------

@pytest.mark.parametrize("est,lo,hi,y,want", [
    (IDENTITY, 0, 1, 2.0, (0.0, 0.0, 0.0, 0.0)),
    (IDENTITY, 0, 1, -1.0, (0.0, 1.0, 10.0, 10.0)),
    (ABS, -1, 1, -0.5, (-0.5, 0.0, 1.0, 0.5)),
])
def test_solve_subproblem_examples(est, lo, hi, y, want):
    sub = sub1(est, lo, hi, y)
    pd = solve_subproblem(sub)
    x, rho, mu, value = want
    assert pd.x[0] == pytest.approx(x, abs=1e-9)
    assert pd.rho == pytest.approx(rho, abs=1e-9)
    assert pd.mu == pytest.approx(mu, abs=10 * sub.default_tol)
    assert pd.value == pytest.approx(value, abs=1e-9)
    assert pd.value == pytest.approx(grid_p(est, 1.0, lo, hi, y, 10.0), abs=1e-3)


def test_primal_value_matches_highs(instance):
    rng = np.random.default_rng(5)
    for _ in range(100):
        sub = random_subproblem(instance.agents[rng.integers(10)], instance.penalty, rng)
        want = highs_p(sub)
        assert primal_value(sub) == pytest.approx(want, abs=1e-7 * (1 + abs(want)))
        pd = solve_subproblem(sub)
        assert pd.value == pytest.approx(want, abs=1e-7 * (1 + abs(want)))
        assert sub.coupling_row @ pd.x <= sub.allocation + pd.rho + 1e-9
        assert np.all(pd.x >= sub.box_lo - 1e-12) and np.all(pd.x <= sub.box_hi + 1e-12)
        assert 0.0 <= pd.mu <= sub.penalty and pd.rho >= 0.0


def test_primal_shape_outside_range():
    est, M = ABS, 10.0
    yr = y_range([1.0], [-1.0], [1.0])
    at_max = primal_value(sub1(est, -1, 1, yr.y_max, M))
    at_min = primal_value(sub1(est, -1, 1, yr.y_min, M))
    for y in (1.0, 1.5, 4.0):
        assert primal_value(sub1(est, -1, 1, y, M)) == pytest.approx(at_max, abs=1e-12)
        assert solve_subproblem(sub1(est, -1, 1, y, M)).mu == 0.0
    for y in (-1.5, -3.0):
        want = -M * y + (at_min + M * yr.y_min)
        assert primal_value(sub1(est, -1, 1, y, M)) == pytest.approx(want, rel=1e-12)
        assert solve_subproblem(sub1(est, -1, 1, y, M)).mu == M


def test_primal_convex_in_allocation(instance):
    rng = np.random.default_rng(6)
    sub = random_subproblem(instance.agents[0], instance.penalty, rng)
    yr = y_range(sub.coupling_row, sub.box_lo, sub.box_hi)
    ys = np.linspace(yr.y_min - 1, yr.y_max + 1, 41)
    p = np.array([primal_value(Subproblem(sub.estimate, sub.coupling_row, sub.box_lo, sub.box_hi, y,
                                          sub.penalty)) for y in ys])
    assert np.all(p[1:-1] <= 0.5 * (p[:-2] + p[2:]) + 1e-8)


# invariants via the property suites ------------------------------------------

@pytest.mark.parametrize("suite", [suite_multiplier_bounds, suite_strong_duality, suite_subderivative,
                                   suite_primal_shape])
def test_property_suites(instance, suite):
    res = suite(instance, np.random.default_rng(7))
    assert res.passed, res.detail


# true primal function and the epsilon diagnostic -----------------------------

def test_true_primal_function_matches_grid():
    ag = AgentProblem([2.0], [0.5], [1.5], [-1.0], [1.0])
    p = true_primal_function(ag, 20.0)
    xs = np.linspace(-1, 1, 200001)
    f = xs * xs + 0.5 * xs
    for y in (-3.0, -1.0, 0.0, 0.4, 2.0):
        want = np.min(f + 20.0 * np.maximum(0.0, 1.5 * xs - y))
        # grid spacing 1e-5 times the steepest slope M * a bounds the grid error
        assert p(np.array([y]))[0] == pytest.approx(want, abs=20.0 * 1.5 * 1e-5)


def test_true_primal_function_matches_grid_2d():
    # two-dimensional quadratic cost: compare against a fine product grid
    ag = AgentProblem([1.0, 3.0], [0.2, -0.4], [1.0, 0.5], [-1.0, -1.0], [1.0, 1.0])
    p = true_primal_function(ag, 10.0)
    g = np.linspace(-1, 1, 1001)
    X1, X2 = np.meshgrid(g, g)
    f = 0.5 * X1 ** 2 + 1.5 * X2 ** 2 + 0.2 * X1 - 0.4 * X2
    for y in (-2.0, -0.3, 0.5):
        want = np.min(f + 10.0 * np.maximum(0.0, X1 + 0.5 * X2 - y))
        assert p(np.array([y]))[0] == pytest.approx(want, abs=5e-5)


def test_epsilon_exact_slope_is_zero():
    ag = AgentProblem([2.0], [0.5], [1.5], [-1.0], [1.0])
    p = true_primal_function(ag, 20.0)
    yr = y_range(ag.coupling_row, ag.box_lo, ag.box_hi)
    y0, h = 0.2, 1e-6
    slope = (p(np.array([y0 + h]))[0] - p(np.array([y0 - h]))[0]) / (2 * h)
    assert epsilon_estimate(p, slope, y0, yr, 400) <= 1e-9


def test_epsilon_grows_with_perturbation():
    ag = AgentProblem([2.0], [0.5], [1.5], [-1.0], [1.0])
    p = true_primal_function(ag, 20.0)
    yr = y_range(ag.coupling_row, ag.box_lo, ag.box_hi)
    y0, h = 0.2, 1e-6
    slope = (p(np.array([y0 + h]))[0] - p(np.array([y0 - h]))[0]) / (2 * h)
    eps = [epsilon_estimate(p, slope + d, y0, yr, 2001) for d in (0.4, 0.1, 0.01)]
    assert eps[0] > eps[1] > eps[2] > 0
    # the linearization error of a slope off by d is at most d times the range width
    for d, e in zip((0.4, 0.1, 0.01), eps):
        assert e <= d * (yr.y_max - yr.y_min)


def test_epsilon_nonnegative_and_grid_arg():
    p = lambda z: np.zeros_like(np.asarray(z, dtype=float))
    assert epsilon_estimate(p, 0.0, 0.0, YRange(-1, 1), 2) == 0.0
    with pytest.raises(MalformedInputError):
        epsilon_estimate(p, 0.0, 0.0, YRange(-1, 1), 1)


def test_subproblem_validation():
    with pytest.raises(MalformedInputError):
        Subproblem(IDENTITY, [1.0, 1.0], [0.0], [1.0], 0.0, 10.0)
    with pytest.raises(MalformedInputError):
        Subproblem(IDENTITY, [1.0], [0.0], [1.0], 0.0, 0.0)
    with pytest.raises(MalformedInputError):
        Subproblem(IDENTITY, [1.0], [1.0], [0.0], 0.0, 1.0)
