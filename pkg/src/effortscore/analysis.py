"""Optimize and evaluate rules on parsed instances.

Everything runs in unit coordinates: states are mapped affinely onto
``[0, 1]^n`` and scores scaled by the bound ``B``.  Objectives are invariant
under relabeling the states, so this only rescales the reported numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Box,
    FiniteDistribution,
    QuadraticUtility,
    TableKappa,
    objective,
    score_range,
    verify_proper,
)
from .errors import DimensionError, DomainError
from .instances import Instance
from .multi_dim import (
    MeanElicitInstance,
    lp_optimal,
    max_over_separate_rule,
    separate_rule,
    symmetric_v_shaped,
)
from .single_dim import opt_value, optimal_v_shaped, quadratic_rule, zero_rule

RULES = ("quadratic", "v-shaped", "max-over-separate", "separate", "lp", "zero")
PROPER_TOL = 1e-7


@dataclass(frozen=True)
class UnitView:
    """An instance mapped onto the unit box."""

    box: Box
    states: np.ndarray
    dist: FiniteDistribution
    bound: float
    state_prior: tuple[np.ndarray, np.ndarray] | None

    @property
    def dim(self) -> int:
        return self.dist.dim

    def to_unit(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.box.lower) / self.box.widths

    def from_unit(self, points) -> np.ndarray:
        return self.box.lower + np.asarray(points, dtype=float) * self.box.widths


def unit_view(inst: Instance) -> UnitView:
    box = inst.box()
    if np.any(box.widths <= 0):
        raise DomainError("the states do not span every coordinate; drop constant coordinates first")
    mi = inst.mean_instance()
    scale = lambda P: (np.asarray(P, dtype=float) - box.lower) / box.widths  # noqa: E731
    f = inst.posterior_means()
    dist = FiniteDistribution(np.clip(scale(f.support), 0.0, 1.0), f.probs)
    prior = inst.state_prior()
    if prior is not None:
        prior = (scale(prior[0]), prior[1])
    return UnitView(box, scale(mi.states), dist, inst.bound, prior)


def quadratic_objective(dist: FiniteDistribution) -> float:
    """Objective of the normalized quadratic rule ``1 - |theta - r|^2 / n`` on the unit box."""
    if dist.dim == 1:
        return objective(QuadraticUtility(), dist)
    return float(np.mean(dist.probs @ (dist.support - dist.mean()) ** 2))


def optimize_closed_form(inst: Instance) -> list[tuple[str, float]]:
    view = unit_view(inst)
    if view.dim != 1:
        raise DimensionError(f"the closed form covers one-dimensional instances, this one has dimension {view.dim}")
    B, w = view.bound, float(view.box.widths[0])
    mu = float(view.dist.mean()[0])
    c = 0.0 if mu <= 0 or mu >= 1 else 1.0 / (2 * max(mu, 1 - mu))
    return [
        ("opt_value", B * opt_value(view.dist)),
        ("mu", float(view.from_unit([mu])[0])),
        ("slope_left", -B * c / w),
        ("slope_right", B * c / w),
        ("kappa", B / 2 if c > 0 else 0.0),
        ("quadratic_objective", B * quadratic_objective(view.dist)),
    ]


def optimize_lp(inst: Instance, backend="simplex"):
    """Exact optimum. Returns ``(rows, solution)`` with the solution in original coordinates."""
    view = unit_view(inst)
    sol = lp_optimal(inst.mean_instance(), backend)
    rows = [
        ("opt_value", sol.value),
        ("ic_residual", sol.ic_residual()),
        ("bound_residual", sol.bound_residual()),
        ("quadratic_objective", view.bound * quadratic_objective(view.dist)),
    ]
    for k, r in enumerate(sol.reports):
        rows += [(f"r[{k}][{j}]", float(v)) for j, v in enumerate(r)]
        rows += [(f"x[{k}][{j}]", float(v)) for j, v in enumerate(sol.allocations[k])]
        rows.append((f"p[{k}]", float(sol.payments[k])))
    return rows, sol


def build_rule(name: str, view: UnitView, backend="simplex"):
    """Rule on the unit box with bound 1."""
    mu = view.dist.mean()
    n = view.dim
    if name == "zero":
        return zero_rule(n)
    if name == "quadratic":
        if n != 1:
            raise DimensionError("the quadratic rule is one-dimensional")
        return quadratic_rule()
    if name == "v-shaped":
        return optimal_v_shaped(float(mu[0])) if n == 1 else symmetric_v_shaped(Box.unit(n), mu)
    if name == "max-over-separate":
        return max_over_separate_rule(mu)
    if name == "separate":
        return separate_rule(mu)
    if name == "lp":
        return lp_optimal(MeanElicitInstance(view.states, view.dist, 1.0), backend).rule()
    raise ValueError(f"unknown rule {name!r}; expected one of {', '.join(RULES)}")


def _check_states(rule, view: UnitView) -> np.ndarray:
    kappa = getattr(rule, "kappa", None)
    if isinstance(kappa, TableKappa):
        return view.states
    k = {1: 101, 2: 21, 3: 11}.get(view.dim, 3)
    return np.vstack([Box.unit(view.dim).grid(k), view.states])


def _beliefs(states: np.ndarray, rng: np.random.Generator, count: int = 40) -> list[FiniteDistribution]:
    pick = states if len(states) <= 60 else states[rng.choice(len(states), 60, replace=False)]
    out = [FiniteDistribution.point_mass(s) for s in pick]
    for _ in range(count):
        k = int(rng.integers(2, min(4, len(states)) + 1)) if len(states) > 1 else 1
        idx = rng.choice(len(states), k, replace=False)
        out.append(FiniteDistribution.merged(states[idx], rng.dirichlet(np.ones(k)), tol=0.0))
    return out


def evaluate_rule(name: str, inst: Instance, seed: int = 0, backend="simplex") -> dict[str, float]:
    view = unit_view(inst)
    rule = build_rule(name, view, backend)
    B = view.bound
    mu = view.dist.mean()
    result = {"objective": B * objective(rule, view.dist)}
    prior_score = math.nan
    if view.state_prior is not None:
        states, probs = view.state_prior
        try:
            prior_score = B * float(rule.score_matrix(mu[None], states)[0] @ probs)
        except DomainError:
            pass
    result["prior_report_score"] = prior_score
    states = _check_states(rule, view)
    rng = np.random.default_rng(seed)
    k = {1: 101, 2: 21, 3: 11}.get(view.dim, 3)
    reports = np.vstack([Box.unit(view.dim).grid(k), view.dist.support, mu[None]])
    check = verify_proper(rule, reports, _beliefs(states, rng), tol=PROPER_TOL)
    lo, hi = score_range(rule, reports, states)
    result.update(
        proper=1.0 if check.is_proper else 0.0,
        worst_violation=B * check.worst_violation,
        score_min=B * lo,
        score_max=B * hi,
    )
    return result
