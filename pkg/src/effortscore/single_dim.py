"""Optimal and prior-independent scoring rules for a mean in ``[0, 1]``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    TOL,
    CanonicalScoringRule,
    ConstantKappa,
    FiniteDistribution,
    FunctionKappa,
    MaxAffineUtility,
    PiecewiseLinearConvexUtility,
    QuadraticUtility,
    Utility1D,
    VShapedUtility,
    objective,
)
from .errors import DimensionError, DomainError, InfeasibleError


def _check_unit_support(dist: FiniteDistribution) -> np.ndarray:
    if dist.dim != 1:
        raise DimensionError("expected a 1-d distribution")
    x = dist.support[:, 0]
    if np.any(x < -TOL) or np.any(x > 1 + TOL):
        raise DomainError("support must lie in [0, 1]")
    return x


@dataclass(frozen=True)
class OptRuleSpec:
    """Parameters of an optimal V-shape at ``mu``: slopes ``a`` and ``a + 1/max(mu, 1-mu)``."""

    mu: float
    a: float

    @property
    def b(self) -> float:
        return self.a + 1.0 / max(self.mu, 1.0 - self.mu)

    def utility(self) -> VShapedUtility:
        return VShapedUtility(self.mu, self.a, self.b)

    def is_bounded(self, tol: float = TOL) -> bool:
        """Boundedness in ``[0, 1]``: the two end-to-end tangent gaps are at most 1."""
        u = self.utility()
        lhs0 = u(1.0) - u(0.0) - u.subgradient(0.0)
        lhs1 = u(0.0) - u(1.0) + u.subgradient(1.0)
        return bool(lhs0 <= 1 + tol and lhs1 <= 1 + tol)


def zero_rule(dim: int = 1) -> CanonicalScoringRule:
    """Constant score 0 in ``dim`` dimensions."""
    if dim == 1:
        return CanonicalScoringRule(VShapedUtility(0.5, 0.0, 0.0), ConstantKappa(0.0), name="zero")
    return CanonicalScoringRule(MaxAffineUtility(np.zeros((1, dim)), [0.0]), ConstantKappa(0.0), name="zero")


def optimal_v_shaped(mu: float) -> CanonicalScoringRule:
    """Symmetric V-shape at ``mu`` with ``kappa = 1/2``; optimal for every prior with mean ``mu``."""
    if not 0.0 <= mu <= 1.0:
        raise DomainError(f"mu must lie in [0, 1], got {mu}")
    if mu in (0.0, 1.0):
        return zero_rule()
    c = 1.0 / (2.0 * max(mu, 1.0 - mu))
    return CanonicalScoringRule(VShapedUtility(mu, -c, c), ConstantKappa(0.5), name="v-shaped")


def opt_value(dist: FiniteDistribution) -> float:
    """``E[max(0, r - mu)] / max(mu, 1 - mu)``, the best achievable incentive."""
    x = _check_unit_support(dist)
    mu = float(dist.probs @ x)
    return float(dist.probs @ np.maximum(x - mu, 0.0)) / max(mu, 1.0 - mu)


def quadratic_rule() -> CanonicalScoringRule:
    """``S(r, theta) = 1 - (theta - r)**2``."""
    return CanonicalScoringRule(
        QuadraticUtility(), FunctionKappa(lambda t: 1.0 - t[..., 0] ** 2, "1 - theta^2"), name="quadratic"
    )


def _check_c(c: float) -> None:
    if not 0.0 < c <= 0.5:
        raise DomainError(f"c must lie in (0, 1/2], got {c}")


def maxmin_quadratic_value(c: float) -> float:
    """Worst-case quadratic incentive over priors whose optimum is ``c``."""
    _check_c(c)
    return c * c


def pi_upper_bound(c: float) -> float:
    """Cap on the worst-case incentive of any prior-independent rule, ``min(1/2, 8c^2/(1-4c)^2)``."""
    _check_c(c)
    denom = (1.0 - 4.0 * c) ** 2
    return 0.5 if denom == 0.0 else min(0.5, 8.0 * c * c / denom)


def two_point_family(mu: float, p: float, c: float) -> FiniteDistribution | None:
    """The two-point prior (low w.p. ``p``) with mean ``mu`` and optimum ``c``, if it fits in [0, 1]."""
    if not (0 < p < 1 and 0 < mu < 1):
        return None
    gap = c * max(mu, 1 - mu) / (p * (1 - p))
    lo, hi = mu - (1 - p) * gap, mu + p * gap
    if lo < -1e-12 or hi > 1 + 1e-12:
        return None
    return FiniteDistribution([[max(lo, 0.0)], [min(hi, 1.0)]], [p, 1 - p])


def quadratic_worst_case(c: float, grid: int = 200) -> tuple[float, tuple[float, float]]:
    """Brute-force minimum of the quadratic incentive over two-point priors with optimum ``c``.

    Scans ``mu`` and ``p`` over ``k / grid`` for ``k = 1..grid``; returns the
    minimum and the ``(mu, p)`` attaining it.
    """
    _check_c(c)
    axis = np.arange(1, grid + 1) / grid
    mu, p = np.meshgrid(axis, axis, indexing="ij")
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = c * np.maximum(mu, 1 - mu) / (p * (1 - p))
        lo, hi = mu - (1 - p) * gap, mu + p * gap
        ok = (p < 1) & (mu < 1) & (lo >= -1e-12) & (hi <= 1 + 1e-12)
        # variance of the two-point law = quadratic incentive
        obj = np.where(ok, p * (1 - p) * gap**2, np.inf)
    k = np.unravel_index(np.argmin(obj), obj.shape)
    return float(obj[k]), (float(mu[k]), float(p[k]))


def pigeonhole_adversary(u: Utility1D, d: int) -> FiniteDistribution:
    """Two-point prior on which ``u`` gives incentive at most ``1/(2 d^2)``.

    Splits ``[0, 1]`` into ``d`` cells and returns the uniform law on the
    endpoints of the cell where the derivative of ``u`` increases least
    (the last such cell on ties).
    """
    if d < 1:
        raise DomainError("d must be a positive integer")
    total = u.derivative_increase(0.0, 1.0)
    if total > 2 + TOL:
        raise InfeasibleError(f"derivative increases by {total:.6g} > 2; utility is not bounded")
    edges = np.arange(d + 1) / d
    incr = np.array([u.derivative_increase(edges[k], edges[k + 1]) for k in range(d)])
    k = int(np.nonzero(incr <= incr.min() + TOL)[0][-1])
    return FiniteDistribution.uniform([[edges[k]], [edges[k + 1]]])


def benchmark(dist: FiniteDistribution) -> float:
    """``2 E[max(0, r - mu)]``, within a factor two of the optimum."""
    x = _check_unit_support(dist)
    mu = dist.probs @ x
    return 2.0 * float(dist.probs @ np.maximum(x - mu, 0.0))


def variance_lower_bound_check(dist: FiniteDistribution) -> tuple[float, float]:
    """``(quadratic incentive, std * optimum)``; the first is never below the second."""
    lhs = objective(QuadraticUtility(), dist)
    rhs = dist.std() * opt_value(dist)
    if lhs < rhs - TOL:
        raise AssertionError(f"quadratic incentive {lhs} below std * OPT = {rhs}")
    return lhs, rhs


def expected_bound_v_shape(u: Utility1D, dist: FiniteDistribution) -> VShapedUtility:
    """V-shape at the prior mean with the same expected utility as ``u`` on each side.

    The left slope is ``-sum_{r<mu} p u(r) / sum_{r<mu} p (mu - r)`` and the right
    slope ``sum_{r>=mu} p u(r) / sum_{r>=mu} p (r - mu)``.  A side carrying no
    spread keeps the one-sided derivative of ``u`` at ``mu``.  The result is
    re-checked against the expected-bound program (see
    :func:`expected_bound_feasible`).
    """
    x = _check_unit_support(dist)
    p = dist.probs
    mu = float(p @ x)
    if abs(float(u(mu))) > 1e-7:
        raise DomainError(f"utility must vanish at the prior mean, u(mu) = {float(u(mu))}")
    ux = np.asarray(u(x), dtype=float)
    # points within rounding of the mean carry no spread on either side
    left, right = x < mu - 1e-12, x > mu + 1e-12
    den_l = float(p[left] @ (mu - x[left]))
    den_r = float(p[right] @ (x[right] - mu))
    a = -float(p[left] @ ux[left]) / den_l if den_l > 0 else float(u.left_derivative(mu))
    b = float(p[right] @ ux[right]) / den_r if den_r > 0 else float(u.subgradient(mu))
    v = VShapedUtility(mu, a, b)
    ok, worst = expected_bound_feasible(u, v)
    if not ok:
        raise InfeasibleError(f"V-shape needs a larger state function than u (by {worst:.3g})")
    return v


def required_kappa(u: Utility1D, states) -> np.ndarray:
    """Smallest state function keeping every score non-negative: ``max_r -(u(r) + u'(r)(theta - r))``.

    For convex ``u`` on ``[0, 1]`` the maximum sits at ``r in {0, 1}``.
    """
    t = np.asarray(states, dtype=float)
    ends = np.array([0.0, 1.0])
    vals = np.asarray(u(ends), dtype=float)
    slopes = np.array([float(u.subgradient(0.0)), float(u.left_derivative(1.0))])
    return np.max(-(vals[:, None] + slopes[:, None] * (t[None, :] - ends[:, None])), axis=0)


def expected_bound_feasible(u: Utility1D, v: Utility1D, grid: int = 201) -> tuple[bool, float]:
    """Check that the state function that works for ``u`` also works for ``v``.

    Both utilities vanish at the prior mean and share expected utility, so the
    expected-score cap carries over; what remains is non-negativity of scores,
    i.e. ``required_kappa(v) <= required_kappa(u)`` on a state grid, plus
    convexity of ``v``.
    """
    states = np.linspace(0.0, 1.0, grid)
    excess = required_kappa(v, states) - required_kappa(u, states)
    worst = float(max(excess.max(), 0.0))
    convex = not isinstance(v, VShapedUtility) or v.a <= v.b + TOL
    return bool(worst <= TOL and convex), worst
