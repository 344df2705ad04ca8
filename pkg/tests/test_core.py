import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from effortscore.core import (
    Box,
    CanonicalScoringRule,
    ConstantKappa,
    FiniteDistribution,
    MaxAffineUtility,
    PiecewiseLinearConvexUtility,
    QuadraticUtility,
    TableKappa,
    VShapedUtility,
    fit_kappa,
    objective,
    score,
    score_range,
    supporting_violation,
    two_point_reduction,
    verify_proper,
)
from effortscore.errors import DimensionError, DomainError, InfeasibleError
from effortscore.multi_dim import max_over_separate_rule
from effortscore.single_dim import opt_value, optimal_v_shaped, quadratic_rule


def bernoulli_beliefs(k=21):
    return [FiniteDistribution.merged([[0.0], [1.0]], [1 - q, q]) for q in np.linspace(0, 1, k)]


# --- Box -----------------------------------------------------------------


def test_box_corners_and_grid():
    b = Box([0, 0], [1, 2])
    assert b.dim == 2
    assert np.allclose(b.corners(), [[0, 0], [0, 2], [1, 0], [1, 2]])
    g = b.grid(3)
    assert g.shape == (9, 2)
    assert np.allclose(b.midpoint, [0.5, 1])
    assert b.contains(g) and not b.contains([[1.5, 0]])


def test_box_rejects_inverted():
    with pytest.raises((DomainError, ValueError)):
        Box([1.0], [0.0])


# --- FiniteDistribution ---------------------------------------------------


def test_distribution_validation():
    with pytest.raises(DomainError):
        FiniteDistribution([[0.0], [1.0]], [0.5, 0.6])
    with pytest.raises(DomainError):
        FiniteDistribution([[0.0], [0.0]], [0.5, 0.5])
    with pytest.raises(DimensionError):
        FiniteDistribution([[0.0], [1.0]], [1.0])
    with pytest.raises(DomainError):
        FiniteDistribution(np.zeros((0, 1)), [])


def test_distribution_flat_support_and_moments():
    d = FiniteDistribution([0.0, 1.0], [0.25, 0.75])
    assert d.dim == 1 and d.size == 2
    assert d.mean()[0] == pytest.approx(0.75)
    assert d.variance() == pytest.approx(0.1875)


def test_merged_collapses_close_points():
    d = FiniteDistribution.merged([[0.5], [0.5 + 1e-12], [1.0], [0.2]], [0.25, 0.25, 0.5, 0.0])
    assert d.size == 2
    assert np.allclose(d.probs, [0.5, 0.5])


def test_distribution_is_read_only():
    d = FiniteDistribution.uniform([[0.0], [1.0]])
    with pytest.raises(ValueError):
        d.probs[0] = 1.0


# --- utilities -------------------------------------------------------------


def test_piecewise_linear_evaluation_and_derivatives():
    u = PiecewiseLinearConvexUtility([0.5], [-1.0, 1.0], (0.5, 0.0))
    assert np.allclose(u([0.0, 0.5, 1.0]), [0.5, 0.0, 0.5])
    assert u.subgradient(0.5) == 1.0  # right derivative on the kink
    assert u.left_derivative(0.5) == -1.0
    assert u.derivative_increase(0.0, 1.0) == pytest.approx(2.0)
    assert u.derivative_increase(0.5, 1.0) == 0.0


def test_v_shape_matches_piecewise_form():
    v = VShapedUtility(0.3, -0.4, 0.9)
    x = np.linspace(0, 1, 11)
    assert np.allclose(v(x), v.to_piecewise()(x))
    with pytest.raises((DomainError, ValueError)):
        VShapedUtility(0.3, 1.0, -1.0)


def test_max_affine_ties_take_largest_allocation():
    u = MaxAffineUtility([[-1.0], [1.0]], [-0.5, 0.5])  # |r - 0.5| shifted
    assert u(np.array([[0.5]]))[0] == pytest.approx(0.0)
    assert u.subgradient(np.array([[0.5]]))[0, 0] == 1.0


# --- score --------------------------------------------------------------------


def test_quadratic_score_example():
    assert score(quadratic_rule(), 0.5, 1.0) == pytest.approx(0.75)


def test_v_shape_score_example():
    rule = optimal_v_shaped(0.8)
    assert score(rule, 1.0, 1.0) == pytest.approx(0.5 + 0.625 * 0.2)


@given(st.floats(0, 1), st.floats(0, 1))
def test_truthful_report_on_realized_state_is_best(r, theta):
    rule = quadratic_rule()
    assert score(rule, theta, theta) >= score(rule, r, theta) - 1e-12


def test_score_dimension_mismatch():
    with pytest.raises(DimensionError):
        score(quadratic_rule(), [0.1, 0.2], 0.5)


def test_score_matrix_matches_pointwise():
    rule = optimal_v_shaped(0.3)
    R = np.linspace(0, 1, 5)[:, None]
    T = np.linspace(0, 1, 4)[:, None]
    M = rule.score_matrix(R, T)
    assert M.shape == (5, 4)
    for i in range(5):
        for j in range(4):
            assert M[i, j] == pytest.approx(score(rule, R[i], T[j]))


# --- objective ------------------------------------------------------------------


def test_objective_examples(intro_exact):
    v = VShapedUtility(0.5, -1.0, 1.0)
    assert objective(v, FiniteDistribution.uniform([[0.0], [1.0]])) == pytest.approx(0.5)
    assert objective(v, FiniteDistribution.point_mass([0.37])) == 0.0
    assert objective(optimal_v_shaped(0.8), intro_exact) == pytest.approx(1 / 60, abs=1e-6)


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=6, unique=True), st.integers(0, 2**31))
def test_objective_nonnegative_for_convex(points, seed):
    rng = np.random.default_rng(seed)
    d = FiniteDistribution(np.array(points)[:, None], rng.dirichlet(np.ones(len(points))))
    for u in (QuadraticUtility(), VShapedUtility(0.4, -0.7, 0.3)):
        assert objective(u, d) >= -1e-12


# --- fit_kappa ----------------------------------------------------------------------


def test_fit_kappa_quadratic_cap():
    T = np.linspace(0, 1, 11)[:, None]
    kappa = fit_kappa(QuadraticUtility(), states=T, mode="cap")
    assert np.allclose(kappa(T), 1 - T[:, 0] ** 2)


def test_fit_kappa_constant_zero():
    zero = VShapedUtility(0.5, 0.0, 0.0)
    kappa = fit_kappa(zero, states=Box.unit(1))
    assert np.allclose(kappa.values, 0.0)


def test_fit_kappa_v_shape_floor():
    kappa = fit_kappa(VShapedUtility(0.5, -1.0, 1.0), states=[[0.0], [1.0]])
    assert np.allclose(kappa.values, [0.5, 0.5])


def test_fit_kappa_infeasible_with_witness():
    with pytest.raises(InfeasibleError) as info:
        fit_kappa(VShapedUtility(0.5, -2.0, 2.0), states=[[0.0], [1.0]])
    assert info.value.witness is not None


def test_fitted_rule_is_bounded():
    u = QuadraticUtility()
    T = np.linspace(0, 1, 21)[:, None]
    for mode in ("floor", "cap"):
        rule = CanonicalScoringRule(u, fit_kappa(u, states=T, mode=mode))
        lo, hi = score_range(rule, T, T)
        assert lo >= -1e-12 and hi <= 1 + 1e-12


def test_table_kappa_rejects_unknown_state():
    k = TableKappa([[0.0], [1.0]], [0.1, 0.2])
    assert np.allclose(k(np.array([[1.0], [0.0]])), [0.2, 0.1])
    with pytest.raises(DomainError):
        k(np.array([[0.5]]))


# --- verify_proper --------------------------------------------------------------


def test_quadratic_is_proper_on_grid():
    check = verify_proper(quadratic_rule(), np.linspace(0, 1, 21), bernoulli_beliefs())
    assert check and check.worst_violation <= 1e-12


def test_decreasing_subgradient_is_caught():
    # r^2 paired with the slope -2r instead of 2r
    rule = CanonicalScoringRule(QuadraticUtility(), ConstantKappa(1.0), subgradient=lambda r: -2 * np.asarray(r))
    check = verify_proper(rule, np.linspace(0, 1, 21), bernoulli_beliefs())
    assert not check
    assert check.belief_index is not None and check.report is not None
    assert check.worst_violation > 0


def test_max_over_separate_proper_on_2d_grid(rng):
    rule = max_over_separate_rule([0.3, 0.6])
    corners = Box.unit(2).corners()
    beliefs = [FiniteDistribution.point_mass(c) for c in corners]
    beliefs += [FiniteDistribution(corners, rng.dirichlet(np.ones(4))) for _ in range(30)]
    assert verify_proper(rule, Box.unit(2).grid(21), beliefs)


def test_supporting_violation():
    u = QuadraticUtility()
    pts = np.linspace(0, 1, 11)
    assert supporting_violation(u, u.subgradient, pts) <= 1e-12
    assert supporting_violation(u, lambda r: -2 * np.asarray(r), pts) > 0


# --- two_point_reduction ------------------------------------------------------------


def test_two_point_reduction_examples():
    d = two_point_reduction(FiniteDistribution.uniform([[0.0], [0.5], [1.0]]))
    assert np.allclose(d.support[:, 0], [0.0, 0.75])
    assert np.allclose(d.probs, [1 / 3, 2 / 3])
    assert opt_value(d) == pytest.approx(1 / 3)
    pm = FiniteDistribution.point_mass([0.4])
    assert np.allclose(two_point_reduction(pm).support, pm.support)
    u01 = FiniteDistribution.uniform([[0.0], [1.0]])
    r = two_point_reduction(u01)
    assert np.allclose(r.support, u01.support) and np.allclose(r.probs, u01.probs)


@settings(max_examples=60)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=8, unique=True), st.integers(0, 2**31))
def test_two_point_reduction_preserves_mean_and_opt(points, seed):
    rng = np.random.default_rng(seed)
    d = FiniteDistribution(np.array(points)[:, None], rng.dirichlet(np.ones(len(points))))
    r = two_point_reduction(d)
    assert r.size <= 2
    assert r.mean()[0] == pytest.approx(d.mean()[0], abs=1e-12)
    assert opt_value(r) == pytest.approx(opt_value(d), abs=1e-12)
