import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mintool.area import AREA, field_B, lift_array, quadratic
from mintool.campaign import DomainError, ball_samples, pair_samples
from mintool.inequalities import (
    alg_violations,
    cauchy_binet_residual,
    coefficient_matrix,
    delta_of_k,
    det_sum_identity,
    elliptic_coefficient_bounds,
    genf_check,
    growth_bound_gaps,
    lambda_constant,
    main_campaign,
    main_inequality_gap,
    monotone_term,
    mu_estimate,
    mu_ratio,
    pair_det_identity,
    poll_form_min_eigenvalue,
    reg_inequality_check,
    tab_pairing,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


# -- identities -----------------------------------------------------------------

@settings(max_examples=80, deadline=None)
@given(st.integers(1, 5).flatmap(lambda n: arrays(float, (n, 2), elements=finite)))
def test_cauchy_binet(X):
    assert abs(cauchy_binet_residual(X)) <= 1e-12 * (1 + np.sum(X * X) ** 2)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 6).flatmap(lambda m: arrays(float, (2, m, 2), elements=finite)))
def test_pair_det_identity(XY):
    X, Y = XY
    assert abs(pair_det_identity(X, Y)) <= 1e-12 * (1 + np.sum(X * X) + np.sum(Y * Y))


@settings(max_examples=80, deadline=None)
@given(arrays(float, (2, 2, 2), elements=finite))
def test_det_sum_identity(M):
    assert abs(det_sum_identity(M[0], M[1])) <= 1e-12 * (1 + np.sum(M * M))


def test_identity_shape_checks():
    with pytest.raises(ValueError):
        pair_det_identity(np.zeros((2, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        det_sum_identity(np.zeros((3, 2)), np.zeros((3, 2)))


def test_tab_pairing_on_lifts_is_minus_monotone_term():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((30, 3, 2))
    Y = rng.standard_normal((30, 3, 2))
    assert np.allclose(tab_pairing(lift_array(X), lift_array(Y)), -monotone_term(X, Y))


# -- growth bounds --------------------------------------------------------------

def test_growth_bounds_at_zero():
    g = growth_bound_gaps(np.zeros((2, 2)))
    # |A(0)| = 0, |B(0)| = sqrt 2, lower bound 1/2, upper bound 2
    assert np.isclose(g["A_upper"], 0.0)
    assert np.isclose(g["B_lower"], np.sqrt(2) - 0.5)
    assert np.isclose(g["B_upper"], 2 - np.sqrt(2))


def test_growth_bounds_random():
    rng = np.random.default_rng(1)
    for n in (1, 2, 4):
        X = ball_samples(rng, 2000, n, 10.0)
        for gap in growth_bound_gaps(X).values():
            assert gap.min() >= -1e-10


# -- delta(k) and the main inequality -------------------------------------------

def test_delta_of_k_values():
    assert np.isclose(delta_of_k(2.0), 0.9 * (np.sqrt(2) - 1))
    assert delta_of_k(1.4142) == pytest.approx(0.9)
    assert delta_of_k(np.sqrt(2)) == pytest.approx(0.9, abs=1e-6)
    ks = np.array([1.5, 2.0, 5.0, 50.0])
    assert np.all(np.diff(delta_of_k(ks)) < 0)


def test_delta_of_k_domain():
    with pytest.raises(DomainError):
        delta_of_k(1.0)
    with pytest.raises(DomainError):
        delta_of_k(np.inf)


def test_poll_form_eigenvalue():
    # diag(2, 3) shifted by 1
    assert np.isclose(poll_form_min_eigenvalue(3.0, 2.0, 0.0, 1.0), 1.0)
    assert np.isclose(poll_form_min_eigenvalue(1.0, 1.0, 1.0, 0.0), 0.0)


def test_main_gap_vanishes_on_diagonal():
    X = np.array([[0.4, -0.2], [1.0, 0.3]])
    assert main_inequality_gap(X, X) == pytest.approx(0.0, abs=1e-15)


def test_main_gap_precondition():
    X = np.array([[3.0, 0.0], [0.0, 0.0]])  # |B(X)| > 3
    Y = np.zeros((2, 2))
    with pytest.raises(DomainError):
        main_inequality_gap(X, Y, k=2.0)


def test_main_campaign_small():
    rep = main_campaign(samples=6000, seed=3)
    assert not rep.violated
    assert rep.min_gap >= -1e-9


def test_main_campaign_fixed_k():
    rep = main_campaign(samples=3000, n_values=(2,), k=5.0, seed=7)
    assert rep.n_samples > 0 and not rep.violated


def test_pair_samples_stay_in_ball():
    rng = np.random.default_rng(2)
    X, Y = pair_samples(rng, 1000, 2, 5.0)
    assert np.all(np.sqrt(np.sum(X * X, axis=(1, 2))) <= 5.0 + 1e-12)
    assert np.all(np.sqrt(np.sum(Y * Y, axis=(1, 2))) <= 5.0 + 1e-12)


# -- mu and the sign bound ------------------------------------------------------

def test_mu_ratio_degenerate_is_nan():
    X = np.zeros((1, 2, 2))
    assert np.isnan(mu_ratio(X, X)[0])


def test_mu_estimate_frozen():
    est = mu_estimate(1.0, 2, 20_000, seed=0)
    assert est.value == pytest.approx(0.40606589625035666, rel=1e-12)
    assert est.method == "random-search"


def test_mu_sign_bound_holds_with_half_mu():
    est = mu_estimate(1.0, 2, 20_000, seed=0)
    rng = np.random.default_rng(5)
    X, Y = pair_samples(rng, 20_000, 2, 1.0)
    assert alg_violations(X, Y, 0.5 * est.value) == 0


def test_mu_estimate_domain():
    with pytest.raises(DomainError):
        mu_estimate(0.0)


# -- perturbative inequality ----------------------------------------------------

def test_lambda_constant_frozen():
    est = lambda_constant(1.0)
    assert est.extra["k"] == 5.0
    assert est.value == pytest.approx(956.4222474141034, rel=1e-10)
    assert est.extra["delta"] == pytest.approx(0.5 * delta_of_k(5.0))


def test_reg_inequality_no_violations():
    consts = lambda_constant(1.0)
    rng = np.random.default_rng(9)
    X, Y = pair_samples(rng, 5000, 2, 1.5)
    assert not reg_inequality_check(X, Y, 1.0, consts).violated


def test_reg_inequality_domain():
    X = np.full((1, 2, 2), 2.0)
    with pytest.raises(DomainError):
        reg_inequality_check(X, X, 1.0)


def test_genf_positive_for_small_perturbation():
    rep = genf_check(AREA + quadratic(1e-3), 1.0, samples=5000)
    assert rep.extra["c"] > 0 and not rep.violated


def test_genf_flags_far_perturbation():
    rep = genf_check(AREA + quadratic(-0.6), 1.0, samples=5000)
    assert rep.violated and rep.extra["c"] < 0


# -- elliptic bounds ------------------------------------------------------------

def test_coefficient_matrix_at_zero_is_identity():
    assert np.allclose(coefficient_matrix(np.zeros((2, 2))), np.eye(2))
    c1, c2 = elliptic_coefficient_bounds(np.zeros((1, 2, 2)))
    assert c1.value == pytest.approx(1.0) and c2.value == pytest.approx(1.0)


def test_coefficient_matrix_determinant_one():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((100, 3, 2))
    assert np.allclose(np.linalg.det(coefficient_matrix(X)), 1.0)
    assert np.allclose(coefficient_matrix(X)[:, 0, 1], field_B(X)[:, 0, 0])


def test_elliptic_bounds_domain():
    with pytest.raises(DomainError):
        elliptic_coefficient_bounds(np.full((1, 2, 2), 3.0), R=1.0)
    with pytest.raises(ValueError):
        elliptic_coefficient_bounds(np.zeros((0, 2, 2)))
