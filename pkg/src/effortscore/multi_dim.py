"""Optimal and approximately optimal rules for eliciting a multi-dimensional mean.

The exact optimum over a finite state space comes from a linear program in
allocations ``x_i`` and payments ``p_i`` for the prior mean, every posterior mean
in the support and every state.  On rectangles the max-over-separate rule, which
pays only on the dimension promising the highest per-dimension score, needs no
more than the prior mean and is within a factor 8 of the optimum.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import lp as lpsolve
from .core import (
    TOL,
    Box,
    CanonicalScoringRule,
    ConstantKappa,
    FiniteDistribution,
    MaxAffineUtility,
    _frozen,
    as_point,
    as_points,
    fit_kappa,
    objective,
)
from .errors import DimensionError, DomainError, InstanceError, SolverError

IC_TOL = 1e-7


def _is_box_corners(states: np.ndarray) -> bool:
    lo, hi = states.min(axis=0), states.max(axis=0)
    if np.any(hi <= lo):
        return False
    corners = Box(lo, hi).corners()
    if corners.shape[0] != states.shape[0]:
        return False
    a = np.unique(np.round(states, 12), axis=0)
    b = np.unique(np.round(corners, 12), axis=0)
    return a.shape == b.shape and np.allclose(a, b)


def in_convex_hull(points, vertices, backend="simplex") -> np.ndarray:
    """Feasibility LP per point: is it a convex combination of ``vertices``?"""
    P, V = as_points(points), as_points(vertices)
    d = V.shape[0]
    out = np.zeros(P.shape[0], dtype=bool)
    for k, r in enumerate(P):
        rows = [(V[:, j], "=", r[j]) for j in range(V.shape[1])]
        rows.append((np.ones(d), "=", 1.0))
        rows += [(np.eye(d)[j], ">=", 0.0) for j in range(d)]
        res = lpsolve.solve(lpsolve.LinearProgram.from_rows(np.zeros(d), rows), backend)
        out[k] = res.optimal
    return out


@dataclass(frozen=True, eq=False)
class MeanElicitInstance:
    """Finite states, a distribution over posterior means and a score bound."""

    states: np.ndarray
    dist: FiniteDistribution
    bound: float = 1.0

    def __post_init__(self):
        states = as_points(self.states)
        if states.shape[1] != self.dist.dim:
            raise DimensionError("states and posterior means have different dimensions")
        if self.bound <= 0:
            raise InstanceError("the score bound must be positive")
        if not _is_box_corners(states):
            inside = in_convex_hull(self.dist.support, states)
            if not inside.all():
                bad = self.dist.support[~inside][0]
                raise InstanceError(f"posterior mean {bad} lies outside the convex hull of the states")
        elif not Box(states.min(axis=0), states.max(axis=0)).contains(self.dist.support):
            raise InstanceError("posterior means leave the box spanned by the states")
        object.__setattr__(self, "states", _frozen(states))

    @classmethod
    def on_box(cls, dist: FiniteDistribution, box: Box | None = None, bound: float = 1.0):
        box = box or Box.unit(dist.dim)
        return cls(box.corners(), dist, bound)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def prior_mean(self) -> np.ndarray:
        return self.dist.mean()

    def reports(self) -> np.ndarray:
        """Report points indexed as in the program: prior mean, posterior means, states."""
        return np.vstack([self.prior_mean[None], self.dist.support, self.states])


def build_mean_lp(inst: MeanElicitInstance) -> lpsolve.LinearProgram:
    """The allocation/payment linear program for ``inst``.

    Variables are ``(x_i, p_i)`` blocks of size ``n + 1`` for the ``1 + m + d``
    report indices.  Constraints: zero utility at the prior mean, incentive
    compatibility between every ordered pair, and utility differences capped by
    the bound at every state.
    """
    R = inst.reports()
    K, n = R.shape
    m = inst.dist.size
    w = n + 1
    nv = K * w

    def util_row(i, at):
        # coefficients of x_i . R[at] - p_i
        row = np.zeros(nv)
        row[i * w : i * w + n] = R[at]
        row[i * w + n] = -1.0
        return row

    c = np.zeros(nv)
    for k in range(m):
        c += inst.dist.probs[k] * util_row(k + 1, k + 1)
    A, rel, b = [util_row(0, 0)], ["="], [0.0]
    for i in range(K):
        own = util_row(i, i)
        for j in range(K):
            if j == i:
                continue
            diff = own - util_row(j, i)
            A.append(diff)
            rel.append(">=")
            b.append(0.0)
            if i > m:
                A.append(diff)
                rel.append("<=")
                b.append(inst.bound)
    names = tuple(
        f"{'x' if t < n else 'p'}{i}{'_' + str(t) if t < n else ''}" for i in range(K) for t in range(w)
    )
    return lpsolve.LinearProgram(c, np.array(A), tuple(rel), np.array(b), names)


@dataclass(frozen=True, eq=False)
class LpScoringSolution:
    instance: MeanElicitInstance
    allocations: np.ndarray
    payments: np.ndarray
    value: float

    @property
    def reports(self) -> np.ndarray:
        return self.instance.reports()

    @property
    def utility(self) -> MaxAffineUtility:
        return MaxAffineUtility(self.allocations, self.payments)

    def utilities(self) -> np.ndarray:
        """``u_i = x_i . r_i - p_i`` at each report index."""
        return np.einsum("ij,ij->i", self.allocations, self.reports) - self.payments

    def ic_residual(self) -> float:
        """Largest gain any index has from another index's (allocation, payment)."""
        R = self.reports
        cross = R @ self.allocations.T - self.payments[None, :]  # cross[i, j] = x_j . r_i - p_j
        return float(max(0.0, np.max(cross - np.diag(cross)[:, None])))

    def bound_residual(self) -> float:
        R = self.reports
        m = self.instance.dist.size
        cross = R @ self.allocations.T - self.payments[None, :]
        own = np.diag(cross)
        diff = own[m + 1 :, None] - cross[m + 1 :, :]
        return float(max(0.0, np.max(diff) - self.instance.bound))

    def rule(self) -> CanonicalScoringRule:
        """Canonical rule with ``kappa(theta) = B - u(theta)`` tabulated on the states."""
        u = self.utility
        kappa = fit_kappa(u, states=self.instance.states, bound=self.instance.bound, reports=self.reports, mode="cap")
        return CanonicalScoringRule(u, kappa, bound=self.instance.bound, name="lp")


def lp_optimal(inst: MeanElicitInstance, backend="simplex") -> LpScoringSolution:
    """Exact optimal rule for a finite state space."""
    prog = build_mean_lp(inst)
    res = lpsolve.solve(prog, backend)
    if not res.optimal:
        raise SolverError(f"mean-elicitation program came back {res.status.value}; the zero rule is feasible")
    K, n = inst.reports().shape
    z = res.x.reshape(K, n + 1)
    return LpScoringSolution(inst, z[:, :n].copy(), z[:, n].copy(), res.value)


# ---------------------------------------------------------------------------
# separable V-shapes


def _first_max(values: np.ndarray) -> np.ndarray:
    """Smallest index within rounding of the row maximum."""
    top = values.max(axis=-1, keepdims=True)
    return np.argmax(values >= top - 1e-12, axis=-1)


@dataclass(frozen=True, eq=False)
class SeparableVUtility:
    """``max_i`` (or mean over ``i``) of ``c_i |r_i - mu_i|``.

    On a kink the right branch is taken; ``max`` ties go to the smallest index.
    """

    centers: np.ndarray
    slopes: np.ndarray
    combine: str = "max"

    @property
    def dim(self) -> int:
        return self.centers.size

    def parts(self, R) -> np.ndarray:
        return self.slopes * np.abs(np.asarray(R, dtype=float) - self.centers)

    def __call__(self, R):
        parts = self.parts(R)
        return parts.max(axis=-1) if self.combine == "max" else parts.mean(axis=-1)

    def subgradient(self, R):
        R = np.asarray(R, dtype=float)
        side = np.where(R < self.centers, -1.0, 1.0)
        if self.combine == "mean":
            return side * self.slopes / self.dim
        k = _first_max(self.parts(R))
        g = np.zeros(R.shape)
        np.put_along_axis(g, k[..., None], np.take_along_axis(side * self.slopes, k[..., None], axis=-1), axis=-1)
        return g


@dataclass(frozen=True, eq=False)
class MaxOverSeparateRule:
    """Per-dimension V-shaped rules ``s_i`` with constant ``kappa_i = beta_i``.

    The report is scored on the dimension ``argmax_j s_j(r_j, r_j)`` alone.
    """

    centers: np.ndarray
    slopes: np.ndarray
    betas: np.ndarray
    bound: float = 1.0

    def __post_init__(self):
        mu = as_point(self.centers)
        c = as_point(self.slopes, mu.size)
        beta = as_point(self.betas, mu.size)
        object.__setattr__(self, "centers", _frozen(mu))
        object.__setattr__(self, "slopes", _frozen(c))
        object.__setattr__(self, "betas", _frozen(beta))

    @property
    def dim(self) -> int:
        return self.centers.size

    def dimension_score(self, i: int, r_i, theta_i):
        """``s_i(r_i, theta_i) = c_i |r_i - mu_i| + c_i sign(r_i - mu_i) (theta_i - r_i) + beta_i``."""
        r_i = np.asarray(r_i, dtype=float)
        side = np.where(r_i < self.centers[i], -1.0, 1.0)
        return self.slopes[i] * side * (np.asarray(theta_i, dtype=float) - self.centers[i]) + self.betas[i]

    def selected(self, R) -> np.ndarray:
        """Index of the scored dimension for each report (smallest index on ties)."""
        R = np.asarray(R, dtype=float)
        promised = self.slopes * np.abs(R - self.centers) + self.betas
        return _first_max(promised)

    def score(self, report, state) -> float:
        r, t = as_point(report, self.dim), as_point(state, self.dim)
        i = int(self.selected(r))
        return float(self.dimension_score(i, r[i], t[i]))

    def score_matrix(self, reports, states) -> np.ndarray:
        R, T = as_points(reports, self.dim), as_points(states, self.dim)
        k = self.selected(R)
        side = np.where(R[np.arange(len(R)), k] < self.centers[k], -1.0, 1.0)
        return (self.slopes[k] * side)[:, None] * (T[:, k].T - self.centers[k][:, None]) + self.betas[k][:, None]

    def expected_score(self, report, belief: FiniteDistribution) -> float:
        return float(self.score_matrix(as_point(report)[None], belief.support)[0] @ belief.probs)

    @property
    def utility(self) -> "SeparableVUtility":
        if np.ptp(self.betas) > 0:
            raise DomainError("a single utility view needs equal per-dimension constants")
        return SeparableVUtility(self.centers, self.slopes, "max")

    def as_canonical(self) -> CanonicalScoringRule:
        """Same rule written as ``u(r) + xi(r).(theta - r) + beta`` with ``u = max_i c_i |r_i - mu_i|``."""
        return CanonicalScoringRule(self.utility, ConstantKappa(float(self.betas[0])), bound=self.bound, name="max-over-separate")


def _per_dimension_slopes(mu: np.ndarray, box: Box) -> np.ndarray:
    if not box.contains(mu, tol=0.0):
        raise DomainError(f"prior mean {mu} lies outside the box")
    on_edge = (mu <= box.lower) | (mu >= box.upper)
    if np.any(on_edge):
        warnings.warn(
            f"prior mean sits on the box boundary in dimensions {np.nonzero(on_edge)[0].tolist()}; "
            "those dimensions use slope 1/(2 width)",
            stacklevel=3,
        )
    reach = np.maximum(mu - box.lower, box.upper - mu)
    return np.minimum(1.0 / (2.0 * reach), 1.0 / box.widths)


def max_over_separate_rule(mu, box: Box | None = None) -> MaxOverSeparateRule:
    """Max-over-separate rule from symmetric per-dimension V-shapes at ``mu`` with ``beta_i = 1/2``."""
    mu = as_point(mu)
    box = box or Box.unit(mu.size)
    if box.dim != mu.size:
        raise DimensionError("prior mean and box dimensions differ")
    return MaxOverSeparateRule(mu, _per_dimension_slopes(mu, box), np.full(mu.size, 0.5))


def symmetric_v_shaped(box: Box, center=None) -> CanonicalScoringRule:
    """``u(r) = max_i |r_i - mu_i| / (b_i - a_i)``: zero at the center, 1/2 on the boundary."""
    mid = box.midpoint
    center = mid if center is None else as_point(center, box.dim)
    if not np.allclose(center, mid, rtol=0, atol=TOL):
        raise DomainError("symmetric V-shape needs the box midpoint as center; use max_over_separate_rule")
    rule = max_over_separate_rule(mid, box).as_canonical()
    return CanonicalScoringRule(rule.utility, rule.kappa, bound=rule.bound, name="symmetric-v-shaped")


def choose_and_report_score(rule: MaxOverSeparateRule, chosen_dim: int, r_i: float, state) -> float:
    """Score when the agent names one dimension and a mean for it."""
    if not 0 <= chosen_dim < rule.dim:
        raise DimensionError(f"dimension {chosen_dim} out of range for a {rule.dim}-d rule")
    t = as_point(state, rule.dim)
    return float(rule.dimension_score(chosen_dim, r_i, t[chosen_dim]))


def separate_rule(mu, box: Box | None = None) -> CanonicalScoringRule:
    """Average of the per-dimension rules of :func:`max_over_separate_rule`."""
    mos = max_over_separate_rule(mu, box)
    return CanonicalScoringRule(SeparableVUtility(mos.centers, mos.slopes, "mean"), ConstantKappa(0.5), name="separate")


# ---------------------------------------------------------------------------
# experiments around the constructions


class GapInstance(NamedTuple):
    dist: FiniteDistribution | None
    separate_obj: float
    mos_obj: float


def separate_gap_analytic(n: int) -> tuple[float, float]:
    return 1.0 / (2 * n), 0.5 * (1.0 - (1.0 - 1.0 / n) ** n)


def separate_gap_distribution(n: int) -> FiniteDistribution:
    """Product law with i.i.d. coordinates in {0, 1/2, 1} w.p. {1/(2n), 1 - 1/n, 1/(2n)}."""
    vals = np.array([0.0, 0.5, 1.0])
    marg = np.array([1 / (2 * n), 1 - 1 / n, 1 / (2 * n)])
    keep = marg > 0
    vals, marg = vals[keep], marg[keep]
    idx = np.array(np.meshgrid(*[np.arange(vals.size)] * n, indexing="ij")).reshape(n, -1).T
    return FiniteDistribution(vals[idx], np.prod(marg[idx], axis=1))


def separate_gap_instance(n: int, max_materialized: int = 12) -> GapInstance:
    """Separate vs max-over-separate incentives on the i.i.d. three-point instance."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    if n > max_materialized:
        return GapInstance(None, *separate_gap_analytic(n))
    dist = separate_gap_distribution(n)
    mu = np.full(n, 0.5)
    return GapInstance(dist, objective(separate_rule(mu), dist), objective(max_over_separate_rule(mu).utility, dist))


def perturbed_rule_loss(dist: FiniteDistribution, mu_hat) -> tuple[float, float, float]:
    """Incentive of the max-over-separate rule built at the true mean vs at ``mu_hat``.

    Returns ``(obj_at_true_mean, obj_at_mu_hat, eps)`` with ``eps`` the sup-norm
    error; the second is never more than ``3 eps`` below the first.
    """
    mu = dist.mean()
    mu_hat = as_point(mu_hat, dist.dim)
    box = Box.unit(dist.dim)
    eps = float(np.max(np.abs(mu_hat - mu)))
    true_obj = objective(max_over_separate_rule(mu, box).utility, dist)
    u_hat = max_over_separate_rule(mu_hat, box).utility
    hat_obj = float(dist.probs @ u_hat(dist.support) - u_hat(mu))
    if hat_obj < true_obj - 3 * eps - TOL:
        raise AssertionError(f"incentive loss {true_obj - hat_obj} exceeds 3 eps = {3 * eps}")
    return true_obj, hat_obj, eps


def sample_count(epsilon: float, delta: float, n: int) -> int:
    """Samples making the empirical mean ``epsilon``-close in sup norm w.p. ``1 - delta``."""
    if not (0 < epsilon <= 1 and 0 < delta < 1) or n < 1:
        raise DomainError("need epsilon in (0, 1], delta in (0, 1), n >= 1")
    return math.ceil(math.log(n / delta) / epsilon**2)


def estimate_prior_mean(samples) -> np.ndarray:
    S = np.asarray(samples, dtype=float)
    if S.size == 0:
        raise DomainError("no samples")
    S = as_points(S) if S.ndim == 1 else S
    return S.mean(axis=0)


# ---------------------------------------------------------------------------
# random instances


def random_distribution(rng: np.random.Generator, n: int, m: int, box: Box | None = None) -> FiniteDistribution:
    box = box or Box.unit(n)
    pts = box.lower + rng.random((m, n)) * box.widths
    w = rng.random(m)
    return FiniteDistribution(pts, w / w.sum())


def random_symmetric_distribution(rng: np.random.Generator, n: int, pairs: int, box: Box | None = None) -> FiniteDistribution:
    """Points paired with their reflections through the box center, equal mass per pair."""
    box = box or Box.unit(n)
    pts = box.lower + rng.random((pairs, n)) * box.widths
    refl = 2 * box.midpoint - pts
    w = rng.random(pairs)
    w = w / w.sum() / 2
    return FiniteDistribution(np.vstack([pts, refl]), np.concatenate([w, w]))
