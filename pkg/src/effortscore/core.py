"""Distributions over posterior means, convex utilities and canonical scoring rules.

A canonical scoring rule for the mean is

    S(r, theta) = u(r) + xi(r) . (theta - r) + kappa(theta)

with ``u`` convex and ``xi`` a subgradient of ``u``.  Every rule built by this
package is canonical, so the incentive a rule gives for effort is the Jensen gap
``E_f[u(r)] - u(mean(f))`` of its utility over the distribution ``f`` of the
forecaster's posterior means.

Points are plain 1-d float arrays; batches of points are ``(m, n)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, DomainError, InfeasibleError

TOL = 1e-9
PROB_TOL = 1e-12


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite 1-d float array, optionally of length ``dim``."""
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1 or p.size == 0:
        raise DimensionError(f"a point must be a non-empty vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DomainError(f"point has non-finite coordinates: {p}")
    if dim is not None and p.size != dim:
        raise DimensionError(f"expected a point of dimension {dim}, got {p.size}")
    return p


def as_points(x, dim: int | None = None) -> np.ndarray:
    """Coerce to an ``(m, n)`` array.  A flat sequence is read as m 1-d points."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d array of points, got shape {a.shape}")
    if dim is not None and a.shape[1] != dim:
        raise DimensionError(f"expected points of dimension {dim}, got {a.shape[1]}")
    if not np.all(np.isfinite(a)):
        raise DomainError("points have non-finite coordinates")
    return a


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned rectangle ``[lower_1, upper_1] x ... x [lower_n, upper_n]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = as_point(self.lower), as_point(self.upper)
        if lo.size != hi.size:
            raise DimensionError("box bounds have different lengths")
        if not np.all(lo < hi):
            raise DomainError(f"box needs lower < upper in every dimension: {lo}, {hi}")
        object.__setattr__(self, "lower", _frozen(lo))
        object.__setattr__(self, "upper", _frozen(hi))

    @classmethod
    def unit(cls, n: int) -> "Box":
        return cls(np.zeros(n), np.ones(n))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def midpoint(self) -> np.ndarray:
        return (self.lower + self.upper) / 2

    def contains(self, points, tol: float = TOL) -> bool:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return bool(np.all(pts >= self.lower - tol) and np.all(pts <= self.upper + tol))

    def corners(self) -> np.ndarray:
        """All 2**n vertices, in lexicographic order of (lower, upper) choices."""
        bits = np.array(np.meshgrid(*[[0, 1]] * self.dim, indexing="ij")).reshape(self.dim, -1).T
        return self.lower + bits * self.widths

    def grid(self, k: int = 21) -> np.ndarray:
        """Uniform ``k**n`` grid including the corners."""
        axes = [np.linspace(lo, hi, k) for lo, hi in zip(self.lower, self.upper)]
        return np.array(np.meshgrid(*axes, indexing="ij")).reshape(self.dim, -1).T


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Finite distribution over (posterior-mean) points.

    ``support`` is an ``(m, n)`` array of distinct points and ``probs`` the
    matching probabilities.  A 1-d support may be given as a flat sequence.
    """

    support: np.ndarray
    probs: np.ndarray
    box: Box | None = None

    def __post_init__(self):
        support = as_points(self.support)
        probs = np.asarray(self.probs, dtype=float).reshape(-1)
        if support.shape[0] == 0:
            raise DomainError("distribution has empty support")
        if probs.size != support.shape[0]:
            raise DimensionError(f"{support.shape[0]} support points but {probs.size} probabilities")
        if np.any(probs < -PROB_TOL) or not np.all(np.isfinite(probs)):
            raise DomainError("probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > PROB_TOL * max(1, probs.size):
            raise DomainError(f"probabilities sum to {probs.sum()!r}, not 1")
        if np.unique(support, axis=0).shape[0] != support.shape[0]:
            raise DomainError("support points must be distinct")
        if self.box is not None and not self.box.contains(support):
            raise DomainError("support leaves the attached box")
        object.__setattr__(self, "support", _frozen(support))
        object.__setattr__(self, "probs", _frozen(np.clip(probs, 0.0, None)))

    @classmethod
    def point_mass(cls, point) -> "FiniteDistribution":
        return cls(as_point(point)[None, :], [1.0])

    @classmethod
    def uniform(cls, points) -> "FiniteDistribution":
        pts = as_points(points)
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    @classmethod
    def merged(cls, points, probs, tol: float = TOL) -> "FiniteDistribution":
        """Build a distribution, summing the mass of points closer than ``tol``.

        Zero-probability points are dropped.
        """
        pts = as_points(points)
        probs = np.asarray(probs, dtype=float).reshape(-1)
        keep = probs > 0
        pts, probs = pts[keep], probs[keep]
        order = np.lexsort(pts.T[::-1])
        out_pts: list[np.ndarray] = []
        out_probs: list[float] = []
        for i in order:
            for j, q in enumerate(out_pts):
                if np.max(np.abs(q - pts[i])) <= tol:
                    out_probs[j] += probs[i]
                    break
            else:
                out_pts.append(pts[i])
                out_probs.append(probs[i])
        total = sum(out_probs)
        return cls(np.array(out_pts), np.array(out_probs) / total)

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    @property
    def size(self) -> int:
        return self.support.shape[0]

    def mean(self) -> np.ndarray:
        return self.probs @ self.support

    def variance(self) -> float:
        """Variance of a 1-d distribution."""
        if self.dim != 1:
            raise DimensionError("variance is defined here for 1-d distributions only")
        x = self.support[:, 0]
        mu = self.probs @ x
        return float(self.probs @ (x - mu) ** 2)

    def std(self) -> float:
        return float(np.sqrt(max(self.variance(), 0.0)))

    def sample(self, k: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(self.size, size=k, p=self.probs)
        return self.support[idx]


# ---------------------------------------------------------------------------
# utilities


class Utility1D:
    """A convex function of one real variable.

    Subclasses evaluate elementwise on arrays.  ``subgradient`` returns the
    right derivative, so a report sitting on a kink takes the right slope.
    """

    dim = 1

    def __call__(self, x):
        raise NotImplementedError

    def subgradient(self, x):
        raise NotImplementedError

    def left_derivative(self, x):
        raise NotImplementedError

    def derivative_increase(self, lo: float, hi: float) -> float:
        """Increase of the derivative strictly inside ``(lo, hi)``."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class PiecewiseLinearConvexUtility(Utility1D):
    """Continuous piecewise-linear convex function on ``[lo, hi]``.

    ``breakpoints`` are the interior kinks (sorted), ``slopes`` has one entry
    per segment (``len(breakpoints) + 1``) and ``anchor = (x0, v0)`` fixes the
    additive constant.  Evaluation outside the domain extends the end segments.
    """

    breakpoints: np.ndarray
    slopes: np.ndarray
    anchor: tuple[float, float] = (0.0, 0.0)
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        sl = np.asarray(self.slopes, dtype=float).reshape(-1)
        lo, hi = map(float, self.domain)
        if sl.size != bp.size + 1:
            raise DimensionError(f"{bp.size} breakpoints need {bp.size + 1} slopes, got {sl.size}")
        if np.any(np.diff(bp) < 0):
            raise DomainError("breakpoints must be sorted")
        if bp.size and (bp[0] < lo or bp[-1] > hi):
            raise DomainError("breakpoints must lie inside the domain")
        if np.any(np.diff(sl) < -TOL):
            raise DomainError(f"slopes must be nondecreasing for convexity: {sl}")
        object.__setattr__(self, "breakpoints", _frozen(bp))
        object.__setattr__(self, "slopes", _frozen(sl))
        object.__setattr__(self, "anchor", (float(self.anchor[0]), float(self.anchor[1])))
        object.__setattr__(self, "domain", (lo, hi))

    def _integrate(self, x, x0, v0):
        x = np.asarray(x, dtype=float)
        return v0 + self._primitive(x) - self._primitive(np.asarray(x0))

    def _primitive(self, x):
        # integral of the slope from the first breakpoint (or 0 if none)
        bp, sl = self.breakpoints, self.slopes
        if bp.size == 0:
            return sl[0] * x
        seg_len = np.diff(bp)
        cum = np.concatenate([[0.0], np.cumsum(sl[1:-1] * seg_len)])
        k = np.searchsorted(bp, x, side="right")
        base = np.where(k == 0, 0.0, cum[np.maximum(k - 1, 0)])
        start = bp[np.maximum(k - 1, 0)]
        return np.where(k == 0, sl[0] * (x - bp[0]), base + sl[k] * (x - start))

    def __call__(self, x):
        x0, v0 = self.anchor
        return self._integrate(x, x0, v0)

    def subgradient(self, x):
        k = np.searchsorted(self.breakpoints, np.asarray(x, dtype=float), side="right")
        return self.slopes[k]

    def left_derivative(self, x):
        k = np.searchsorted(self.breakpoints, np.asarray(x, dtype=float), side="left")
        return self.slopes[k]

    def derivative_increase(self, lo, hi):
        bp = self.breakpoints
        inside = (bp > lo) & (bp < hi)
        idx = np.nonzero(inside)[0]
        return float(np.sum(self.slopes[idx + 1] - self.slopes[idx]))

    def shifted(self, slope: float = 0.0, const: float = 0.0) -> "PiecewiseLinearConvexUtility":
        """``u(x) + slope * x + const``."""
        x0, v0 = self.anchor
        return PiecewiseLinearConvexUtility(
            self.breakpoints, self.slopes + slope, (x0, v0 + slope * x0 + const), self.domain
        )


@dataclass(frozen=True)
class VShapedUtility(Utility1D):
    """``a * (x - mu)`` left of ``mu`` and ``b * (x - mu)`` right of it."""

    mu: float
    a: float
    b: float

    def __post_init__(self):
        if self.a > self.b + TOL:
            raise DomainError(f"V-shape needs a <= b, got a={self.a}, b={self.b}")

    def __call__(self, x):
        d = np.asarray(x, dtype=float) - self.mu
        return np.where(d < 0, self.a * d, self.b * d)

    def subgradient(self, x):
        d = np.asarray(x, dtype=float) - self.mu
        return np.where(d < 0, self.a, self.b) * np.ones_like(d)

    def left_derivative(self, x):
        d = np.asarray(x, dtype=float) - self.mu
        return np.where(d <= 0, self.a, self.b) * np.ones_like(d)

    def derivative_increase(self, lo, hi):
        return float(self.b - self.a) if lo < self.mu < hi else 0.0

    def to_piecewise(self, domain=(0.0, 1.0)) -> PiecewiseLinearConvexUtility:
        return PiecewiseLinearConvexUtility([self.mu], [self.a, self.b], (self.mu, 0.0), domain)


@dataclass(frozen=True)
class QuadraticUtility(Utility1D):
    """``u(x) = x**2``, the utility of the quadratic scoring rule."""

    def __call__(self, x):
        return np.asarray(x, dtype=float) ** 2

    def subgradient(self, x):
        return 2.0 * np.asarray(x, dtype=float)

    left_derivative = subgradient

    def derivative_increase(self, lo, hi):
        return 2.0 * (hi - lo)


@dataclass(frozen=True, eq=False)
class MaxAffineUtility:
    """``u(r) = max_i (x_i . r - p_i)``; convex by construction.

    Among tied pieces the subgradient is the lexicographically largest
    allocation, which in one dimension is the right slope.
    """

    allocations: np.ndarray
    payments: np.ndarray

    def __post_init__(self):
        x = as_points(self.allocations)
        p = np.asarray(self.payments, dtype=float).reshape(-1)
        if p.size != x.shape[0]:
            raise DimensionError("one payment per allocation is required")
        object.__setattr__(self, "allocations", _frozen(x))
        object.__setattr__(self, "payments", _frozen(p))
        # lexicographically descending order, so argmax picks the largest tie
        order = np.lexsort(x.T[::-1])[::-1]
        object.__setattr__(self, "_order", order)

    @property
    def dim(self) -> int:
        return self.allocations.shape[1]

    def _pieces(self, r):
        return r @ self.allocations[self._order].T - self.payments[self._order]

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self._pieces(r).max(axis=-1)

    def subgradient(self, r):
        vals = self._pieces(np.asarray(r, dtype=float))
        top = vals.max(axis=-1, keepdims=True)
        # first piece within tolerance of the max in descending-allocation order
        k = np.argmax(vals >= top - 1e-12, axis=-1)
        return self.allocations[self._order][k]


def utility_values(utility, points) -> np.ndarray:
    """Evaluate any utility on an ``(m, n)`` batch of points."""
    pts = np.asarray(points, dtype=float)
    if isinstance(utility, Utility1D):
        if pts.shape[-1] != 1:
            raise DimensionError(f"1-d utility applied to {pts.shape[-1]}-d points")
        return np.asarray(utility(pts[..., 0]), dtype=float)
    if pts.shape[-1] != utility.dim:
        raise DimensionError(f"{utility.dim}-d utility applied to {pts.shape[-1]}-d points")
    return np.asarray(utility(pts), dtype=float)


def subgradient_values(subgradient, utility, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if isinstance(utility, Utility1D):
        g = subgradient(pts[..., 0])
        return np.asarray(g, dtype=float)[..., None] * np.ones_like(pts)
    return np.asarray(subgradient(pts), dtype=float)


# ---------------------------------------------------------------------------
# state functions


@dataclass(frozen=True)
class ConstantKappa:
    value: float

    def __call__(self, states):
        s = np.asarray(states, dtype=float)
        return np.full(s.shape[:-1], float(self.value))


@dataclass(frozen=True, eq=False)
class TableKappa:
    """State function tabulated on a finite state set."""

    states: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", _frozen(as_points(self.states)))
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=float).reshape(-1)))
        if self.values.size != self.states.shape[0]:
            raise DimensionError("one kappa value per state is required")

    def __call__(self, states):
        s = np.asarray(states, dtype=float)
        flat = s.reshape(-1, s.shape[-1])
        dist = np.max(np.abs(flat[:, None, :] - self.states[None, :, :]), axis=-1)
        j = dist.argmin(axis=1)
        if np.any(dist[np.arange(flat.shape[0]), j] > TOL):
            raise DomainError("kappa is tabulated only on the instance's states")
        return self.values[j].reshape(s.shape[:-1])


@dataclass(frozen=True)
class FunctionKappa:
    """Closed-form state function of a 1-d or n-d state."""

    fn: Callable[[np.ndarray], np.ndarray]
    label: str = "kappa"

    def __call__(self, states):
        return np.asarray(self.fn(np.asarray(states, dtype=float)), dtype=float)


# ---------------------------------------------------------------------------
# scoring rules


@dataclass(frozen=True, eq=False)
class CanonicalScoringRule:
    """``S(r, theta) = u(r) + xi(r) . (theta - r) + kappa(theta)``."""

    utility: object
    kappa: Callable = field(default_factory=lambda: ConstantKappa(0.0))
    subgradient: Callable | None = None
    bound: float = 1.0
    name: str = "canonical"

    def __post_init__(self):
        if self.subgradient is None:
            object.__setattr__(self, "subgradient", self.utility.subgradient)

    @property
    def dim(self) -> int:
        return self.utility.dim

    def utility_at(self, reports) -> np.ndarray:
        return utility_values(self.utility, reports)

    def gradient_at(self, reports) -> np.ndarray:
        return subgradient_values(self.subgradient, self.utility, reports)

    def score(self, report, state) -> float:
        r = as_point(report)
        t = as_point(state)
        if r.size != self.dim or t.size != self.dim:
            raise DimensionError(
                f"rule has dimension {self.dim}, report {r.size}, state {t.size}"
            )
        return float(self.score_matrix(r[None], t[None])[0, 0])

    def score_matrix(self, reports, states) -> np.ndarray:
        """Scores for every (report, state) pair: shape ``(len(reports), len(states))``."""
        R = as_points(reports, self.dim)
        T = as_points(states, self.dim)
        u = self.utility_at(R)
        g = self.gradient_at(R)
        offset = u - np.einsum("ij,ij->i", g, R)
        return offset[:, None] + g @ T.T + np.asarray(self.kappa(T))[None, :]

    def expected_score(self, report, belief: FiniteDistribution) -> float:
        return float(self.score_matrix(as_point(report)[None], belief.support)[0] @ belief.probs)


def score(rule, report, state) -> float:
    """Score of ``report`` when ``state`` is realized."""
    return rule.score(report, state)


def objective(utility, dist: FiniteDistribution) -> float:
    """Incentive for effort ``E_f[u(r)] - u(mean(f))``.

    ``utility`` may also be a scoring rule, in which case its utility is used.
    """
    if dist.size == 0:
        raise DomainError("empty distribution")
    u = getattr(utility, "utility", utility)
    vals = utility_values(u, dist.support)
    at_mean = utility_values(u, dist.mean()[None])[0]
    return float(dist.probs @ vals - at_mean)


def fit_kappa(
    utility,
    subgradient=None,
    states=None,
    bound: float = 1.0,
    reports=None,
    mode: str = "floor",
) -> TableKappa:
    """Tabulate a state function making the canonical rule bounded in ``[0, bound]``.

    ``mode="floor"`` sets ``kappa(theta) = -min_r [u(r) + xi(r) (theta - r)]`` so
    the lowest score at every state is exactly 0.  ``mode="cap"`` instead sets
    ``kappa(theta) = bound - u(theta)`` so the highest score is exactly the cap.
    Reports default to the states; the states are always among the tested reports.
    Raises :class:`InfeasibleError` if ``u(theta) - u(r) - xi(r)(theta - r)`` exceeds
    the bound anywhere on the tested pairs.
    """
    if subgradient is None:
        subgradient = utility.subgradient
    if isinstance(states, Box):
        states = states.grid()
    T = as_points(states)
    R = T if reports is None else np.vstack([as_points(reports, T.shape[1]), T])
    u_r = utility_values(utility, R)
    g_r = subgradient_values(subgradient, utility, R)
    # tangent[i, j] = u(r_i) + xi(r_i) . (theta_j - r_i)
    tangent = (u_r - np.einsum("ij,ij->i", g_r, R))[:, None] + g_r @ T.T
    u_t = utility_values(utility, T)
    gap = u_t[None, :] - tangent
    i, j = np.unravel_index(np.argmax(gap), gap.shape)
    if gap[i, j] > bound + TOL:
        raise InfeasibleError(
            f"score range {gap[i, j]:.6g} exceeds bound {bound} at report {R[i]} and state {T[j]}",
            witness=(R[i], T[j]),
        )
    if mode == "floor":
        values = -tangent.min(axis=0)
    elif mode == "cap":
        values = bound - u_t
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return TableKappa(T, values)


@dataclass(frozen=True, eq=False)
class ProperCheck:
    is_proper: bool
    worst_violation: float
    belief_index: int | None = None
    report: np.ndarray | None = None

    def __bool__(self):
        return self.is_proper


def verify_proper(rule, report_grid, beliefs: Sequence[FiniteDistribution], tol: float = TOL) -> ProperCheck:
    """Check on grids that reporting the belief's mean is a best response.

    Returns the largest expected gain any grid report has over the truthful
    report, with the belief and report attaining it.
    """
    R = as_points(report_grid, rule.dim)
    worst, witness = -np.inf, (None, None)
    for k, belief in enumerate(beliefs):
        truthful = rule.expected_score(belief.mean(), belief)
        deviations = rule.score_matrix(R, belief.support) @ belief.probs
        i = int(np.argmax(deviations))
        gain = float(deviations[i] - truthful)
        if gain > worst:
            worst, witness = gain, (k, R[i])
    ok = worst <= tol
    return ProperCheck(ok, max(worst, 0.0), *(witness if not ok else (None, None)))


def score_range(rule, reports, states) -> tuple[float, float]:
    """Minimum and maximum score over a grid of reports and states."""
    S = rule.score_matrix(reports, states)
    return float(S.min()), float(S.max())


def supporting_violation(utility, subgradient, points) -> float:
    """Largest amount by which a claimed subgradient fails to support ``u``."""
    P = as_points(points)
    u = utility_values(utility, P)
    g = subgradient_values(subgradient, utility, P)
    tangent = (u - np.einsum("ij,ij->i", g, P))[:, None] + g @ P.T
    return float(max(0.0, np.max(tangent - u[None, :])))


def two_point_reduction(dist: FiniteDistribution) -> FiniteDistribution:
    """Collapse a 1-d distribution to its conditional means below and above the mean."""
    if dist.dim != 1:
        raise DimensionError("two-point reduction needs a 1-d distribution")
    x, p = dist.support[:, 0], dist.probs
    mu = p @ x
    low = x < mu
    pts, probs = [], []
    for side in (low, ~low):
        mass = p[side].sum()
        if mass > 0:
            pts.append(p[side] @ x[side] / mass)
            probs.append(mass)
    return FiniteDistribution(np.array(pts)[:, None], np.array(probs))
