import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mintool.area import (
    AREA,
    J,
    BCoefficients,
    LiftedGradient,
    area_density,
    area_gradient,
    area_gradient_cofactor_sum,
    area_hessian,
    as_gradient,
    b_coeffs,
    b_from_coeffs,
    cof,
    constant,
    dist_to_CA,
    field_A,
    field_B,
    field_B_explicit,
    field_B_f,
    gradient_from_json,
    gradient_to_json,
    lift,
    lift_array,
    lift_f,
    lift_jacobian,
    quadratic,
    subminor_dets,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def matrices(n_max=4):
    return st.integers(1, n_max).flatmap(lambda n: arrays(float, (n, 2), elements=finite))


# -- frozen values --------------------------------------------------------------

def test_area_at_zero_and_identity():
    assert area_density(np.zeros((3, 2))) == 1.0
    # |X|^2 = 2, det = 1
    assert np.isclose(area_density(np.eye(2)), 2.0)
    assert np.isclose(area_density([[3.0, 4.0]]), np.sqrt(26.0))


def test_area_of_conformal_matrix():
    # X = [[a, -b], [b, a]]: area = 1 + a^2 + b^2
    X = np.array([[1.5, -0.5], [0.5, 1.5]])
    assert np.isclose(area_density(X), 1 + 1.5 ** 2 + 0.5 ** 2)


def test_B_at_zero():
    B = field_B(np.zeros((2, 2)))
    assert np.allclose(B, [[0.0, -1.0], [1.0, 0.0]])
    assert np.allclose(B, -J)


def test_B_for_one_row():
    # n = 1, X = (1, 0): area = sqrt(2), B = ((0, -1), (2, 0)) / sqrt(2)
    B = field_B([[1.0, 0.0]])
    assert np.allclose(B, np.array([[0.0, -1.0], [2.0, 0.0]]) / np.sqrt(2))


def test_cofactor_convention():
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.allclose(M @ cof(M), -2.0 * np.eye(2))


def test_subminor_dets_of_three_rows():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    assert np.allclose(subminor_dets(X), [1.0, 1.0, -1.0])


def test_as_gradient_rejects_bad_input():
    with pytest.raises(ValueError):
        as_gradient(np.zeros(3))
    with pytest.raises(ValueError):
        as_gradient(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        as_gradient([[np.nan, 0.0]])


# -- derivatives ----------------------------------------------------------------

def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((3, 2))
    h = 1e-6
    fd = np.zeros_like(X)
    for i in range(3):
        for a in range(2):
            E = np.zeros_like(X)
            E[i, a] = h
            fd[i, a] = (area_density(X + E) - area_density(X - E)) / (2 * h)
    assert np.allclose(area_gradient(X), fd, atol=1e-8)


def test_hessian_matches_finite_differences():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((2, 2))
    H = area_hessian(X)
    h = 1e-5
    for j in range(2):
        for b in range(2):
            E = np.zeros_like(X)
            E[j, b] = h
            col = (area_gradient(X + E) - area_gradient(X - E)) / (2 * h)
            assert np.allclose(H[:, :, j, b], col, atol=1e-8)


def test_hessian_at_zero_is_identity():
    H = area_hessian(np.zeros((2, 2))).reshape(4, 4)
    assert np.allclose(H, np.eye(4))


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_gradient_cofactor_form(X):
    assert np.allclose(area_gradient(X), area_gradient_cofactor_sum(X), rtol=1e-10, atol=1e-10)


# -- A and B --------------------------------------------------------------------

@settings(max_examples=80, deadline=None)
@given(matrices(5))
def test_B_two_formulas_agree(X):
    assert np.allclose(field_B(X), field_B_explicit(X), rtol=1e-10, atol=1e-10)


@settings(max_examples=80, deadline=None)
@given(matrices(5))
def test_B_trace_det_and_signs(X):
    B = field_B(X)
    scale = 1.0 + np.sum(X * X)
    assert abs(np.trace(B)) <= 1e-10 * scale
    assert abs(np.linalg.det(B) - 1.0) <= 1e-10 * scale
    assert B[0, 1] < 0 < B[1, 0]


@settings(max_examples=40, deadline=None)
@given(matrices(3))
def test_B_for_area_density_matches_generic_formula(X):
    assert np.allclose(field_B(X), field_B_f(AREA, X), rtol=1e-10, atol=1e-10)


def test_A_is_gradient_times_J():
    X = np.array([[0.2, -1.0], [0.4, 0.3]])
    assert np.allclose(field_A(X), area_gradient(X) @ J)


def test_b_coeffs_roundtrip():
    X = np.array([[0.7, 0.1], [-0.3, 1.2]])
    c = b_coeffs(X)
    assert np.isclose(c.alpha * c.beta - c.gamma ** 2, 1.0)
    assert np.allclose(b_from_coeffs(c.alpha, c.beta, c.gamma), field_B(X))
    assert np.allclose(c.matrix(), field_B(X))


def test_b_coeffs_validation():
    with pytest.raises(ValueError):
        BCoefficients(1.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        BCoefficients(-1.0, -1.0, 0.0)


# -- densities ------------------------------------------------------------------

def test_density_sum_and_constant():
    f = AREA + quadratic(0.5) + constant(2.0)
    X = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert np.isclose(f(X), np.sqrt(2.0) + 0.5 + 2.0)
    assert np.allclose(f.hessian(np.zeros((1, 2))).reshape(2, 2), 2.0 * np.eye(2))


def test_finite_difference_hessian_fallback():
    from mintool.area import EnergyDensity

    f = EnergyDensity(area_density, area_gradient, name="area-fd")
    assert f.hessian_source == "finite-difference"
    X = np.array([[0.3, 0.1], [0.2, -0.4]])
    assert np.allclose(f.hessian(X), area_hessian(X), atol=1e-7)


# -- lifting and distance -------------------------------------------------------

def test_lift_blocks_and_json():
    X = np.array([[0.1, 0.2], [0.3, 0.4]])
    L = lift(X)
    assert L.stacked().shape == (6, 2)
    assert np.allclose(L.stacked(), lift_array(X))
    back = LiftedGradient.from_json(json.loads(json.dumps(L.to_json())))
    assert np.array_equal(back.stacked(), L.stacked())
    assert np.array_equal(gradient_from_json(gradient_to_json(X)), X)


def test_lift_f_for_area_is_lift():
    X = np.array([[0.5, -0.1]])
    assert np.allclose(lift_f(X, AREA).stacked(), lift(X).stacked())


def test_lift_jacobian_matches_finite_differences():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((2, 2))
    Jm = lift_jacobian(X)
    h = 1e-6
    E = np.zeros_like(X)
    E[1, 0] = h
    fd = (lift_array(X + E) - lift_array(X - E)) / (2 * h)
    assert np.allclose(Jm[:, :, 1, 0], fd, atol=1e-7)


def test_distance_zero_on_lifted_points():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((20, 2, 2))
    res = dist_to_CA(lift_array(X))
    assert np.max(res.value) < 1e-10


def test_distance_of_rotated_B_block():
    # (0; 0; J) sits at distance 2 sqrt(2) from lift(0) = (0; 0; -J)
    L = np.vstack([np.zeros((2, 2)), np.zeros((2, 2)), J])
    res = dist_to_CA(L, starts=5)
    assert np.isclose(res.value, 2 * np.sqrt(2), atol=1e-6)


def test_distance_is_an_upper_bound_and_bounded_by_offset():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((50, 2, 2))
    D = 0.1 * rng.standard_normal((50, 6, 2))
    res = dist_to_CA(lift_array(X) + D, starts=2)
    assert np.all(res.value <= np.sqrt(np.sum(D * D, axis=(-2, -1))) + 1e-12)
    assert np.allclose(res.value, np.sqrt(np.sum((lift_array(res.minimizer) - lift_array(X) - D) ** 2, axis=(-2, -1))))


def test_distance_shape_check():
    with pytest.raises(ValueError):
        dist_to_CA(np.zeros((5, 2)))
