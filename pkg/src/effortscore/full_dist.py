"""Eliciting a whole distribution over finitely many states.

A belief over ``d`` states is a point of the ``d``-simplex, and the realized
state is a vertex of it, so full-distribution elicitation is mean elicitation
with the indicator vectors as states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PROB_TOL, FiniteDistribution, _frozen, as_points, utility_values
from .errors import DimensionError, DomainError
from .multi_dim import LpScoringSolution, MeanElicitInstance, lp_optimal
from .single_dim import opt_value


@dataclass(frozen=True, eq=False)
class FullDistInstance:
    """Posteriors (rows of probabilities over ``states``) with their probabilities."""

    states: tuple
    posteriors: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        G = as_points(self.posteriors)
        f = np.asarray(self.probs, dtype=float).reshape(-1)
        if G.shape[1] != len(self.states):
            raise DimensionError(f"posteriors have {G.shape[1]} entries for {len(self.states)} states")
        if G.shape[0] != f.size:
            raise DimensionError("one probability per posterior is required")
        if np.any(G < -PROB_TOL) or np.any(np.abs(G.sum(axis=1) - 1) > PROB_TOL * max(1, G.shape[1])):
            raise DomainError("every posterior must be a probability vector")
        if np.any(f < 0) or abs(f.sum() - 1) > PROB_TOL * max(1, f.size):
            raise DomainError("posterior probabilities must sum to 1")
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "posteriors", _frozen(G))
        object.__setattr__(self, "probs", _frozen(f))

    @property
    def num_states(self) -> int:
        return len(self.states)

    def prior(self) -> np.ndarray:
        return self.probs @ self.posteriors


def to_mean_instance(inst: FullDistInstance, bound: float = 1.0) -> MeanElicitInstance:
    """Indicator encoding: states become the standard basis of ``R^d``."""
    dist = FiniteDistribution.merged(inst.posteriors, inst.probs, tol=0.0)
    return MeanElicitInstance(np.eye(inst.num_states), dist, bound)


def optimal_full_dist(inst: FullDistInstance, bound: float = 1.0, backend="simplex") -> LpScoringSolution:
    return lp_optimal(to_mean_instance(inst, bound), backend)


def gap_instance(epsilon: float) -> FullDistInstance:
    """States ``{0, 1/2 - eps, 1/2 + eps, 1}`` with point-mass posteriors.

    The outer states carry ``eps/2`` each and the inner ones ``(1 - eps)/2``.
    """
    _check_eps(epsilon)
    states = (0.0, 0.5 - epsilon, 0.5 + epsilon, 1.0)
    probs = np.array([epsilon / 2, (1 - epsilon) / 2, (1 - epsilon) / 2, epsilon / 2])
    return FullDistInstance(states, np.eye(4), probs)


def _check_eps(epsilon: float) -> None:
    if not 0 < epsilon <= 0.5:
        raise DomainError(f"epsilon must lie in (0, 1/2], got {epsilon}")


class HighLowIndicatorUtility:
    """``|P(high) - 1/2|`` on the simplex: symmetric V-shape on the belief that the state is high."""

    def __init__(self, high_mask):
        self.mask = np.asarray(high_mask, dtype=float)
        self.dim = self.mask.size

    def __call__(self, G):
        return np.abs(np.asarray(G, dtype=float) @ self.mask - 0.5)

    def subgradient(self, G):
        q = np.asarray(G, dtype=float) @ self.mask
        side = np.where(q < 0.5, -1.0, 1.0)
        return side[..., None] * self.mask


def mean_vs_full_gap(epsilon: float) -> tuple[float, float]:
    """``(best incentive for eliciting the mean, incentive of the high/low indicator rule)``."""
    inst = gap_instance(epsilon)
    means = FiniteDistribution.merged(np.array(inst.states)[:, None], inst.probs, tol=0.0)
    mean_opt = opt_value(means)
    values = np.array(inst.states)
    u = HighLowIndicatorUtility(values > 0.5)
    full_lower = float(inst.probs @ utility_values(u, inst.posteriors) - utility_values(u, inst.prior()[None])[0])
    return mean_opt, full_lower
