"""Bounded proper scoring rules that maximize the incentive to exert effort."""

from .bayes import SignalModel, posterior_mean_distribution
from .core import (
    Box,
    CanonicalScoringRule,
    ConstantKappa,
    FiniteDistribution,
    FunctionKappa,
    MaxAffineUtility,
    PiecewiseLinearConvexUtility,
    QuadraticUtility,
    TableKappa,
    VShapedUtility,
    fit_kappa,
    objective,
    score,
    score_range,
    two_point_reduction,
    verify_proper,
)
from .errors import DimensionError, DomainError, InfeasibleError, InstanceError, ScoringError, SolverError
from .full_dist import FullDistInstance, gap_instance, mean_vs_full_gap, optimal_full_dist, to_mean_instance
from .lp import LinearProgram, LpResult, Status, solve
from .multi_dim import (
    MaxOverSeparateRule,
    MeanElicitInstance,
    build_mean_lp,
    choose_and_report_score,
    lp_optimal,
    max_over_separate_rule,
    perturbed_rule_loss,
    sample_count,
    separate_gap_analytic,
    separate_gap_instance,
    separate_rule,
    symmetric_v_shaped,
)
from .single_dim import (
    benchmark,
    expected_bound_v_shape,
    opt_value,
    optimal_v_shaped,
    pigeonhole_adversary,
    quadratic_rule,
    quadratic_worst_case,
    zero_rule,
)

__version__ = "0.1.0"
