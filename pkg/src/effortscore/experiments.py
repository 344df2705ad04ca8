"""Batch experiments: one row per parameter value, theory next to computation.

Every randomized row draws from ``np.random.default_rng([seed, row_index])`` so
results do not depend on how rows are spread over worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from .core import Box, FiniteDistribution, QuadraticUtility, VShapedUtility, objective
from .full_dist import gap_instance, mean_vs_full_gap, optimal_full_dist
from .multi_dim import (
    estimate_prior_mean,
    perturbed_rule_loss,
    random_distribution,
    sample_count,
    separate_gap_analytic,
    separate_gap_instance,
)
from .single_dim import benchmark, pigeonhole_adversary, quadratic_worst_case
from .table import ResultTable


def _map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*items)))


def _sep_gap_row(index, n, seed):
    sep_t, mos_t = separate_gap_analytic(n)
    sep, mos = separate_gap_instance(n)[1:]
    dev = max(abs(sep - sep_t), abs(mos - mos_t))
    return [n, sep_t, sep, mos_t, mos, mos / sep, dev]


def sep_gap(ns=(2, 5, 10), seed=0, jobs=1) -> ResultTable:
    t = ResultTable(["n", "separate_theory", "separate", "mos_theory", "mos", "ratio", "abs_dev"])
    for row in _map(_sep_gap_row, [(k, n, seed) for k, n in enumerate(ns)], jobs):
        t.add(*row)
    return t


def _full_gap_row(index, eps, seed):
    mean_opt, full_lower = mean_vs_full_gap(eps)
    theory = 1.5 * eps - eps * eps
    lp_value = optimal_full_dist(gap_instance(eps)).value
    return [eps, theory, mean_opt, full_lower, lp_value, full_lower / mean_opt, abs(mean_opt - theory)]


def full_gap(epsilons=(0.5, 0.1, 0.05, 0.01), seed=0, jobs=1) -> ResultTable:
    t = ResultTable(["epsilon", "mean_opt_theory", "mean_opt", "full_lower", "full_lp", "ratio", "abs_dev"])
    for row in _map(_full_gap_row, [(k, e, seed) for k, e in enumerate(epsilons)], jobs):
        t.add(*row)
    return t


def _quad_row(index, c, seed, grid):
    value, (mu, p) = quadratic_worst_case(c, grid)
    return [c, c * c, value, abs(value - c * c), mu, p]


def quad_worstcase(cs=(0.1, 0.25, 0.5), grid=200, seed=0, jobs=1) -> ResultTable:
    t = ResultTable(["c", "theory", "min_quadratic", "abs_dev", "mu", "p"])
    for row in _map(partial(_quad_row, grid=grid), [(k, c, seed) for k, c in enumerate(cs)], jobs):
        t.add(*row)
    return t


def random_bounded_v_shapes(rng: np.random.Generator, count: int) -> list[VShapedUtility]:
    """V-shapes on [0, 1] whose slope jump keeps the rule bounded by 1."""
    out = []
    for _ in range(count):
        mu = rng.uniform(0.05, 0.95)
        jump = rng.uniform(0.0, 1.0) / max(mu, 1 - mu)
        a = -rng.uniform(0.0, 1.0) * jump
        out.append(VShapedUtility(mu, a, a + jump))
    return out


def adversary_utilities(seed: int, count: int = 5):
    rng = np.random.default_rng([seed, 0])
    return [("quadratic", QuadraticUtility())] + [
        (f"v[mu={u.mu:.3f},a={u.a:.3f},b={u.b:.3f}]", u) for u in random_bounded_v_shapes(rng, count)
    ]


def _pi_row(index, d, seed, count):
    rows = []
    for name, u in adversary_utilities(seed, count):
        dist = pigeonhole_adversary(u, d)
        obj = objective(u, dist)
        cap = 1.0 / (2 * d * d)
        rows.append([d, name, cap, obj, benchmark(dist), 1.0 / (2 * d), max(0.0, obj - cap)])
    return rows


def pi_adversary(ds=(2, 4, 8), utilities=5, seed=0, jobs=1) -> ResultTable:
    t = ResultTable(["d", "utility", "cap", "objective", "benchmark", "benchmark_theory", "excess"])
    for rows in _map(partial(_pi_row, count=utilities), [(k, d, seed) for k, d in enumerate(ds)], jobs):
        for row in rows:
            t.add(*row)
    return t


def perturbed_mean(rng: np.random.Generator, mu: np.ndarray, eps: float) -> np.ndarray:
    """A point at sup-distance exactly ``eps`` from ``mu`` inside the unit box."""
    n = mu.size
    delta = rng.uniform(-eps, eps, size=n)
    k = rng.integers(n)
    sign = 1.0 if mu[k] + eps <= 1 else -1.0
    delta[k] = sign * eps
    hat = mu + delta
    for j in range(n):
        if j != k:
            hat[j] = min(max(hat[j], 0.0), 1.0)
    return hat


def _robust_row(index, eps, seed, pairs):
    rng = np.random.default_rng([seed, index])
    worst = -math.inf
    for _ in range(pairs):
        n = int(rng.integers(1, 4))
        dist = random_distribution(rng, n, int(rng.integers(2, 9)))
        true_obj, hat_obj, e = perturbed_rule_loss(dist, perturbed_mean(rng, dist.mean(), eps))
        worst = max(worst, true_obj - hat_obj)
    return [eps, pairs, 3 * eps, worst, max(0.0, worst - 3 * eps)]


def robustness(epsilons=(0.01, 0.05, 0.1), pairs=100, seed=0, jobs=1) -> ResultTable:
    t = ResultTable(["epsilon", "pairs", "theory_max_loss", "max_loss", "excess"])
    for row in _map(partial(_robust_row, pairs=pairs), [(k, e, seed) for k, e in enumerate(epsilons)], jobs):
        t.add(*row)
    return t


def sampling_failure_rate(dist: FiniteDistribution, k: int, eps: float, trials: int, rng) -> float:
    """Fraction of trials whose ``k``-sample empirical mean misses by more than ``eps`` in sup norm."""
    mu = dist.mean()
    fails = 0
    for _ in range(trials):
        est = estimate_prior_mean(dist.sample(k, rng))
        fails += np.max(np.abs(est - mu)) > eps
    return fails / trials


def _sampling_row(index, eps, delta, n, trials, seed):
    rng = np.random.default_rng([seed, index])
    dist = random_distribution(rng, n, 10)
    k = sample_count(eps, delta, n)
    rate = sampling_failure_rate(dist, k, eps, trials, rng)
    return [eps, delta, n, k, trials, delta, rate, max(0.0, rate - delta)]


def sampling(eps=0.1, delta=0.05, n=4, trials=1000, seed=0, jobs=1) -> ResultTable:
    t = ResultTable(["epsilon", "delta", "n", "samples", "trials", "theory_max_failure", "failure_rate", "excess"])
    t.add(*_sampling_row(0, eps, delta, n, trials, seed))
    return t


EXPERIMENTS = {
    "sep-gap": sep_gap,
    "full-gap": full_gap,
    "quad-worstcase": quad_worstcase,
    "pi-adversary": pi_adversary,
    "robustness": robustness,
    "sampling": sampling,
}
