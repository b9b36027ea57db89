import numpy as np
import pytest

from mintool.area import AREA, EnergyDensity, area_density, area_gradient, area_plus_quadratic, quadratic
from mintool.campaign import ball_samples
from mintool.convexity import (
    NumericalInstabilityError,
    RankOneDirection,
    area_second_variation_closed_form,
    c2_distance,
    is_rank_one,
    lh_bracket_terms,
    lh_gap_area,
    lh_gap_campaign,
    mu_rank_one_test,
    perturbed_lh_check,
    rank_one_samples,
    second_variation,
    tau_estimate,
)


def test_direction_is_normalised():
    d = RankOneDirection([3.0, 4.0], [0.0, 2.0])
    assert np.allclose(d.a, [0.6, 0.8])
    assert np.allclose(d.b, [0.0, 1.0])
    assert np.isclose(np.linalg.norm(d.matrix), 1.0)
    with pytest.raises(ValueError):
        RankOneDirection([1.0], [1.0, 0.0, 0.0])


def test_rank_one_detection():
    assert is_rank_one(np.outer([1.0, 2.0], [3.0, -1.0]))
    assert not is_rank_one(np.eye(2))
    assert not is_rank_one(np.zeros((2, 2)))
    assert is_rank_one(np.array([[1.0, 2.0]]))
    rng = np.random.default_rng(0)
    assert np.all(is_rank_one(rank_one_samples(rng, 100, 3)))


def test_second_variation_at_zero_is_one():
    # D^2 area(0) is the identity on n x 2 matrices
    Y = RankOneDirection([1.0, 0.0], [0.0, 1.0])
    assert np.isclose(second_variation(AREA, np.zeros((2, 2)), Y), 1.0)
    assert np.isclose(area_second_variation_closed_form(np.zeros((2, 2)), Y.matrix), 1.0)


def test_closed_form_matches_hessian():
    rng = np.random.default_rng(1)
    for n in (1, 2, 3, 4):
        X = ball_samples(rng, 500, n, 5.0)
        Y = rank_one_samples(rng, 500, n)
        exact = second_variation(AREA, X, Y)
        assert np.allclose(area_second_variation_closed_form(X, Y), exact, rtol=1e-10, atol=1e-12)


def test_second_variation_finite_difference_path():
    f = EnergyDensity(area_density, area_gradient, name="area-fd-only")
    X = np.array([[0.5, -0.3], [0.2, 0.1]])
    Y = RankOneDirection([1.0, 1.0], [1.0, -2.0])
    fd = second_variation(f, X, Y)
    assert np.isclose(fd, second_variation(AREA, X, Y), rtol=1e-5)


def test_second_variation_flags_rough_density():
    rough = EnergyDensity(lambda X: np.abs(np.sum(X, axis=(-2, -1))) ** 2.5,
                          lambda X: np.zeros_like(X), name="rough")
    Y = RankOneDirection([1.0], [1.0, 0.0])
    with pytest.raises(NumericalInstabilityError):
        second_variation(rough, np.zeros((1, 2)), Y)


def test_gap_zero_at_origin_and_brackets():
    Y = RankOneDirection([1.0, 0.0], [1.0, 0.0])
    assert lh_gap_area(np.zeros((2, 2)), Y) == pytest.approx(0.0, abs=1e-15)
    rng = np.random.default_rng(2)
    X = ball_samples(rng, 2000, 3, 4.0)
    D = rank_one_samples(rng, 2000, 3)
    for key, v in lh_bracket_terms(X, D).items():
        assert v.min() >= -1e-9 * (1 + 4.0 ** 6), key


def test_gap_input_checks():
    with pytest.raises(ValueError):
        lh_gap_area(np.zeros((2, 2)), np.eye(2) / np.sqrt(2))
    with pytest.raises(ValueError):
        lh_gap_area(np.zeros((2, 2)), 2.0 * np.outer([1.0, 0.0], [1.0, 0.0]))


def test_gap_campaign_nonnegative():
    res = lh_gap_campaign(samples=8000, seed=3)
    assert min(res["min"].values()) >= -1e-9


def test_tau_matches_one_row_closed_form():
    # n = 1: the smallest Hessian eigenvalue at |X| = r is (1 + r^2)^(-3/2)
    rep = tau_estimate(0.5, n=1, samples=20_000, seed=0)
    floor = (1 + 0.75 ** 2) ** -1.5
    assert floor - 1e-12 <= rep.tau <= 1.05 * floor
    assert not rep.flagged


def test_tau_decreases_with_radius():
    taus = [tau_estimate(R, samples=5000).tau for R in (0.5, 1.0, 2.0)]
    assert taus[0] > taus[1] > taus[2] > 0


def test_tau_rejects_bad_radius():
    with pytest.raises(ValueError):
        tau_estimate(0.0)


def test_negative_control_is_flagged():
    rep = perturbed_lh_check(AREA + quadratic(-0.6), 1.0, samples=5000)
    assert rep.flagged and rep.tau < 0
    assert not perturbed_lh_check(area_plus_quadratic(1e-3), 1.0, samples=5000).flagged


def test_mu_rank_one_convexity_along_lines():
    t = np.linspace(-1, 1, 9)
    d = RankOneDirection([1.0, 0.0], [0.0, 1.0])
    X = np.array([[0.2, 0.1], [-0.3, 0.4]])
    tau = tau_estimate(1.0, samples=5000).tau
    assert mu_rank_one_test(AREA, X, d, 0.9 * tau, t)
    # |X|^2 is exactly 2-convex along unit directions
    assert mu_rank_one_test(quadratic(1.0), X, d, 2.0, t)
    assert not mu_rank_one_test(quadratic(1.0), X, d, 2.5, t)


def test_mu_rank_one_needs_three_points():
    with pytest.raises(ValueError):
        mu_rank_one_test(AREA, np.zeros((1, 2)), RankOneDirection([1.0], [1.0, 0.0]), 0.1, [0.0, 1.0])


def test_c2_distance_quadratic_perturbation():
    # at |X| = 2R the three terms add up to eps (4R^2 + 4R + 2)
    assert c2_distance(area_plus_quadratic(1e-3), 1.0, 0.5, n=1) == pytest.approx(1e-2, rel=1e-10)
    assert c2_distance(AREA, 1.0, 0.5) == 0.0
    with pytest.raises(ValueError):
        c2_distance(AREA, 1.0, 0.0)
