"""Per-agent cost oracle: sample acquisition, max-affine fit, pruning.

The surrogate is ``f_hat(x) = max_k v_k + g_k @ (x - z_k)`` where the slopes
``g_k`` solve

    minimize    sum_k ||g_k||_1 + w * sum_{h != l} xi_hl
    subject to  v_h + (z_l - z_h) @ g_h <= v_l + xi_hl,   xi >= 0.

Rows and objective terms never mix different anchors ``h``, so the LP is
solved as ``K`` independent blocks (one per anchor) by the simplex kernel.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from numba import njit

from .errors import MalformedInputError, NumericalFailure, RefusalError
from .lp import STATUS_OPTIMAL, simplex_kernel
from .problem import AgentProblem, eval_true


@dataclass
class Sample:
    point: np.ndarray
    value: float
    birth_round: int


@dataclass
class SampleSet:
    samples: List[Sample] = field(default_factory=list)
    capacity: int = 30

    def __len__(self):
        return len(self.samples)

    def add(self, sample):
        self.samples.append(sample)

    def points(self):
        return np.array([s.point for s in self.samples], dtype=np.float64)

    def values(self):
        return np.array([s.value for s in self.samples], dtype=np.float64)


@dataclass
class MaxAffineEstimate:
    slopes: np.ndarray
    anchors: np.ndarray
    values: np.ndarray
    fit_slack: float = 0.0

    def __post_init__(self):
        self.slopes = np.atleast_2d(np.asarray(self.slopes, dtype=np.float64))
        self.anchors = np.atleast_2d(np.asarray(self.anchors, dtype=np.float64))
        self.values = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        if not (self.slopes.shape == self.anchors.shape and self.values.shape == (self.slopes.shape[0],)):
            raise MalformedInputError("pieces must have matching slopes, anchors and values")

    @property
    def pieces(self):
        return list(zip(self.slopes, self.anchors, self.values))

    @property
    def dim(self):
        return self.slopes.shape[1]

    @property
    def intercepts(self):
        """Constant terms ``v_k - g_k @ z_k`` of the affine pieces."""
        return self.values - np.einsum("kj,kj->k", self.slopes, self.anchors)

    def __call__(self, x):
        return eval_estimate(self, x)


@dataclass
class SamplingSchedule:
    free_rounds: int = 50
    r0: float = 2.0
    r_min: float = 0.05
    decay: float = 0.99

    def radius(self, round):
        f = max(0, round - self.free_rounds)
        return max(self.r_min, self.r0 * self.decay ** f)


def eval_estimate(est: MaxAffineEstimate, x):
    """Evaluate the surrogate at one point ``(n,)`` or a batch ``(P, n)``."""
    if est.values.size == 0:
        raise RefusalError("cannot evaluate an estimate without pieces")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim <= 1
    X = np.atleast_2d(x) if x.ndim else x.reshape(1, 1)
    if X.shape[1] != est.dim:
        raise MalformedInputError(f"expected points of dimension {est.dim}")
    vals = est.values[None, :] + X @ est.slopes.T - np.einsum("kj,kj->k", est.slopes, est.anchors)[None, :]
    out = vals.max(axis=1)
    return float(out[0]) if single else out


def _uniform_box(agent, rng):
    return np.array([rng.uniform(lo, hi) for lo, hi in zip(agent.box_lo, agent.box_hi)])


def _ball_point(center, radius, rng):
    n = center.size
    d = np.array([rng.normal() for _ in range(n)])
    norm = math.sqrt(float(d @ d))
    if norm == 0.0:
        return center.copy()
    r = radius * rng.random() ** (1.0 / n)
    return center + (r / norm) * d


def draw_sample(agent: AgentProblem, current_iterate: Optional[np.ndarray], round: int,
                schedule: SamplingSchedule, rng) -> Sample:
    """One new sample: uniform in the box early on, then in a shrinking ball.

    Ball draws outside the box are rejected up to 100 times; the last draw is
    then clamped to the box.
    """
    if round < schedule.free_rounds or current_iterate is None:
        z = _uniform_box(agent, rng)
    else:
        center = np.asarray(current_iterate, dtype=np.float64)
        radius = schedule.radius(round)
        for _ in range(100):
            z = _ball_point(center, radius, rng)
            if np.all(z >= agent.box_lo) and np.all(z <= agent.box_hi):
                break
        else:
            z = np.clip(_ball_point(center, radius, rng), agent.box_lo, agent.box_hi)
    return Sample(z, eval_true(agent, z), round)


@njit(cache=True, nogil=True)
def _fit_kernel(Z, f, weight):
    K, n = Z.shape
    G = np.zeros((K, n))
    slack = 0.0
    if K == 1:
        return 0, G, slack
    nv = 2 * n + (K - 1)
    c = np.empty(nv)
    c[: 2 * n] = 1.0
    c[2 * n:] = weight
    lower = np.zeros(nv)
    upper = np.full(nv, np.inf)
    A_eq = np.zeros((0, nv))
    b_eq = np.zeros(0)
    for h in range(K):
        A = np.zeros((K - 1, nv))
        b = np.empty(K - 1)
        r = 0
        for l in range(K):
            if l == h:
                continue
            for j in range(n):
                d = Z[l, j] - Z[h, j]
                A[r, j] = d
                A[r, n + j] = -d
            A[r, 2 * n + r] = -1.0
            b[r] = f[l] - f[h]
            r += 1
        status, u, obj, duals, it = simplex_kernel(c, A, b, A_eq, b_eq, lower, upper)
        if status != STATUS_OPTIMAL:
            return status, G, slack
        for j in range(n):
            G[h, j] = u[j] - u[n + j]
        for k in range(K - 1):
            slack += u[2 * n + k]
    return 0, G, slack


def fit_max_affine(samples: SampleSet, slack_weight: float = 100.0) -> MaxAffineEstimate:
    if len(samples) < 1:
        raise MalformedInputError("need at least one sample to fit")
    if not slack_weight > 0:
        raise MalformedInputError("slack_weight must be positive")
    Z = samples.points()
    f = samples.values()
    status, G, slack = _fit_kernel(Z, f, float(slack_weight))
    if status != STATUS_OPTIMAL:
        raise NumericalFailure(f"max-affine fit LP failed with status {status}")
    return MaxAffineEstimate(G, Z, f, float(slack))


def prune(samples: SampleSet, current_iterate) -> SampleSet:
    """Drop samples until ``capacity`` remain.

    Each removal picks, among the older half of the current set (by birth
    round, ties by position), the sample farthest from ``current_iterate``.
    """
    kept = list(samples.samples)
    if len(kept) <= samples.capacity:
        return SampleSet(kept, samples.capacity)
    center = np.asarray(current_iterate, dtype=np.float64)
    while len(kept) > samples.capacity:
        by_age = sorted(range(len(kept)), key=lambda k: (kept[k].birth_round, k))
        old = by_age[: (len(kept) + 1) // 2]
        far = max(old, key=lambda k: (float(np.sum((kept[k].point - center) ** 2)), -k))
        del kept[far]
    return SampleSet(kept, samples.capacity)
