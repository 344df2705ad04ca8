"""Posterior means induced by a discrete prior and a signal channel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PROB_TOL, TOL, FiniteDistribution, _frozen, as_points
from .errors import DimensionError, DomainError


@dataclass(frozen=True, eq=False)
class SignalModel:
    """Prior over a finite state grid and a likelihood matrix ``P(signal | state)``.

    ``likelihood`` has one row per state and one column per signal.
    """

    theta_grid: np.ndarray
    prior: np.ndarray
    likelihood: np.ndarray

    def __post_init__(self):
        theta = as_points(self.theta_grid)
        prior = np.asarray(self.prior, dtype=float).reshape(-1)
        lik = np.atleast_2d(np.asarray(self.likelihood, dtype=float))
        if prior.size != theta.shape[0] or lik.shape[0] != theta.shape[0]:
            raise DimensionError("prior and likelihood need one entry / row per state")
        if np.any(prior < 0) or abs(prior.sum() - 1) > PROB_TOL * max(1, prior.size):
            raise DomainError("prior must be a probability vector")
        if np.any(lik < 0) or np.any(np.abs(lik.sum(axis=1) - 1) > PROB_TOL * max(1, lik.shape[1])):
            raise DomainError("every likelihood row must be a probability vector")
        object.__setattr__(self, "theta_grid", _frozen(theta))
        object.__setattr__(self, "prior", _frozen(prior))
        object.__setattr__(self, "likelihood", _frozen(lik))

    @classmethod
    def bernoulli(cls, theta, prior) -> "SignalModel":
        """One coin flip with success probability equal to the state."""
        theta = np.asarray(theta, dtype=float).reshape(-1)
        return cls(theta, prior, np.column_stack([1 - theta, theta]))

    @classmethod
    def uniform_bernoulli(cls, lo: float, hi: float, points: int = 401) -> "SignalModel":
        """Uniform prior on ``[lo, hi]`` discretized on ``points`` equally spaced states."""
        theta = np.linspace(lo, hi, points)
        return cls.bernoulli(theta, np.full(points, 1.0 / points))

    def prior_mean(self) -> np.ndarray:
        return self.prior @ self.theta_grid


def posterior_mean_distribution(model: SignalModel) -> FiniteDistribution:
    """Distribution of ``E[theta | s]`` over signals ``s``; zero-probability signals drop out."""
    joint = model.prior[:, None] * model.likelihood  # states x signals
    p_signal = joint.sum(axis=0)
    keep = p_signal > 0
    means = (joint[:, keep].T @ model.theta_grid) / p_signal[keep, None]
    return FiniteDistribution.merged(means, p_signal[keep] / p_signal[keep].sum(), tol=TOL)
