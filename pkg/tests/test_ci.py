import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mintool.area import J, field_A, field_B
from mintool.ci.algebra import (
    algebra_campaign,
    check_lemma_algebra,
    classify,
    h1,
    h2,
    in_H1,
    in_H2,
    project_H1,
    project_H2,
    rank_one_connection,
)
from mintool.ci.geometry import (
    AffinePiece,
    PiecewiseAffineMap,
    clip_halfplane,
    convex_intersection,
    edge_quadrature,
    polygon_area,
    unit_square,
)
from mintool.ci.laminate import (
    B0,
    C0,
    LaminateInfeasibleError,
    LaminateSpec,
    audit_laminate,
    boundary_affine_fit,
    build_laminate,
    dist_to_segment,
    gradient_stats,
    h1h2_critical_map,
    null_lagrangian_check,
    outer_residual_on_grid,
)

coef = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
HEXAGON = np.array([[np.cos(a), np.sin(a)] for a in np.linspace(0, 2 * np.pi, 7)[:-1]])


# -- H1 / H2 --------------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(coef, coef)
def test_A_and_B_on_H1_and_H2(a, b):
    for X in (h1(a, b), h2(a, b)):
        assert np.allclose(field_A(X), X @ J, atol=1e-10 * (1 + abs(a) + abs(b)) ** 3)
        assert np.allclose(field_B(X), -J, atol=1e-10 * (1 + a * a + b * b))


def test_membership_and_projections():
    assert in_H1(B0) and in_H2(C0)
    assert not in_H1(C0) and not in_H2(B0)
    assert np.allclose(project_H1(np.eye(2)), 0.0)
    X = np.array([[2.0, 1.0], [3.0, -1.0]])
    assert np.allclose(project_H1(X) + project_H2(X), X)
    assert classify(B0) == "H1" and classify(C0) == "H2" and classify(np.diag([1.0, 2.0])) == "other"
    assert classify(np.zeros((3, 2))) == "other"


def test_algebra_example_and_errors():
    rep = check_lemma_algebra(np.array([[2.0, 1.0], [1.0, -2.0]]))
    assert rep.ok and np.allclose(rep.B_value, -J)
    with pytest.raises(ValueError):
        check_lemma_algebra(np.diag([1.0, 2.0]))
    with pytest.raises(ValueError):
        in_H1(np.zeros((3, 2)))


def test_algebra_campaign():
    assert algebra_campaign(2000, seed=1).ok


def test_rank_one_connection():
    a, b, scale = rank_one_connection(B0, C0)
    assert np.allclose(a, [1.0, 0.0]) and np.allclose(b, [1.0, 0.0]) and scale == pytest.approx(2.0)
    assert rank_one_connection(B0, B0) is None
    assert rank_one_connection(np.eye(2), np.zeros((2, 2))) is None
    B = np.array([[0.3, 0.1], [0.2, 0.0], [1.0, 1.0]])
    a, b, s = rank_one_connection(B, B - 0.7 * np.outer([1.0, 2.0, 2.0], [0.6, 0.8]) / 3)
    assert np.allclose(s * np.outer(a, b), 0.7 * np.outer([1.0, 2.0, 2.0], [0.6, 0.8]) / 3)


# -- geometry -------------------------------------------------------------------

def test_polygon_area_and_clipping():
    sq = unit_square()
    assert polygon_area(sq) == 1.0
    assert polygon_area(sq[::-1]) == -1.0
    half = clip_halfplane(sq, np.array([1.0, 0.0]), 0.5)
    assert polygon_area(half) == pytest.approx(0.5)
    assert len(clip_halfplane(sq, np.array([1.0, 0.0]), -1.0)) == 0
    tri = np.array([[0.5, 0.5], [2.0, 0.5], [0.5, 2.0]])
    assert polygon_area(convex_intersection(tri, sq)) == pytest.approx(0.25)
    # x + y <= 1.5 cuts the corner triangle of area 1/8
    tri2 = np.array([[0.0, 0.0], [1.5, 0.0], [0.0, 1.5]])
    assert polygon_area(convex_intersection(tri2, sq)) == pytest.approx(1.0 - 0.125)
    assert len(convex_intersection(sq + 3.0, sq)) == 0


def test_affine_piece_validation():
    with pytest.raises(ValueError):
        AffinePiece(unit_square()[::-1], np.eye(2), np.zeros(2))
    p = AffinePiece(unit_square(), [[1.0, 2.0]], [3.0])
    assert np.allclose(p([1.0, 1.0]), [6.0])


def test_map_audit_detects_overlap_and_gaps():
    sq = unit_square()
    good = PiecewiseAffineMap([AffinePiece(sq, np.eye(2), np.zeros(2))], sq)
    assert good.audit().ok
    bad = PiecewiseAffineMap([AffinePiece(sq, np.eye(2), np.zeros(2)),
                              AffinePiece(0.5 * sq, np.eye(2), np.zeros(2))], sq)
    rep = bad.audit()
    assert rep.overlap_area == pytest.approx(0.25) and not rep.ok
    gap = PiecewiseAffineMap([AffinePiece(0.5 * sq, np.eye(2), np.zeros(2))], sq)
    assert gap.audit().area_error == pytest.approx(0.75)


def test_map_continuity_and_evaluation():
    left = np.array([[0.0, 0.0], [0.5, 0.0], [0.5, 1.0], [0.0, 1.0]])
    right = left + [0.5, 0.0]
    A = np.array([[1.0, 0.0]])
    cont = PiecewiseAffineMap([AffinePiece(left, A, [0.0]), AffinePiece(right, 2 * A, [-0.5])], unit_square())
    assert cont.audit().ok
    assert np.allclose(cont.evaluate([[0.25, 0.3], [0.75, 0.3]]), [[0.25], [1.0]])
    with pytest.raises(ValueError):
        cont.evaluate([[2.0, 2.0]])
    jump = PiecewiseAffineMap([AffinePiece(left, A, [0.0]), AffinePiece(right, 2 * A, [0.0])], unit_square())
    assert jump.continuity_error() == pytest.approx(0.5)


def test_map_json_roundtrip(tmp_path):
    spec = LaminateSpec(B0, C0, 0.5, 0.1)
    pm = build_laminate(spec)
    pm.write_json(tmp_path / "map.json")
    back = PiecewiseAffineMap.from_json(json.loads((tmp_path / "map.json").read_text()))
    assert np.array_equal(back.matrices(), pm.matrices())
    assert back.meta["period"] == pm.meta["period"]
    svg = pm.to_svg(classify)
    assert svg.startswith("<svg") and svg.count("<polygon") == len(pm.pieces)


def test_edge_quadrature_integrates_perimeter():
    pts, wts, normal = edge_quadrature(unit_square(), order=4)
    assert wts.sum() == pytest.approx(4.0)
    assert np.allclose(normal[0], [0.0, -1.0])
    # divergence theorem for F = x: boundary flux equals 2 |square|
    flux = np.sum(wts * np.einsum("eqk,ek->eq", pts, normal))
    assert flux == pytest.approx(2.0)


# -- laminates ------------------------------------------------------------------

def test_laminate_spec_validation():
    with pytest.raises(ValueError):
        LaminateSpec(np.eye(2), np.zeros((2, 2)), 0.5, 0.1)
    with pytest.raises(ValueError):
        LaminateSpec(B0, C0, 1.5, 0.1)
    with pytest.raises(ValueError):
        LaminateSpec(B0, C0, 0.5, 0.0)
    assert np.allclose(LaminateSpec(B0, C0, 0.25, 0.1).A, [[-0.5, 0.0], [0.0, -1.0]])


def test_dist_to_segment():
    assert dist_to_segment(B0, B0, C0) == 0.0
    assert dist_to_segment(0.5 * (B0 + C0), B0, C0) == pytest.approx(0.0)
    assert dist_to_segment(B0 + np.array([[0.0, 0.0], [0.0, 1.0]]), B0, C0) == pytest.approx(1.0)
    assert dist_to_segment(2 * B0 - C0, B0, C0) == pytest.approx(2.0)


def test_laminate_default_pair():
    spec = LaminateSpec(B0, C0, 0.5, 0.1)
    pm = build_laminate(spec)
    a = audit_laminate(pm, spec)
    assert a.ok
    assert a.fraction_B >= 0.45 and a.fraction_C >= 0.45
    assert abs(null_lagrangian_check(pm)) <= 1e-10
    A, c = boundary_affine_fit(pm)
    assert np.allclose(A, spec.A) and np.allclose(c, 0.0)


def test_laminate_oblique_on_hexagon():
    nu = np.array([np.cos(0.4), np.sin(0.4)])
    C = np.array([[0.2, 0.1], [0.1, -0.3]])
    B = C + 1.5 * np.outer(nu, nu)
    spec = LaminateSpec(B, C, 0.4, 0.05)
    pm = build_laminate(spec, HEXAGON)
    a = audit_laminate(pm, spec)
    assert a.ok and a.geometry_ok


def test_laminate_three_rows():
    B = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    C = B - np.outer([1.0, 0.0, 1.0], [0.0, 1.0])
    spec = LaminateSpec(B, C, 0.3, 0.1)
    pm = build_laminate(spec)
    assert audit_laminate(pm, spec).ok


def test_laminate_endpoints_are_affine():
    pm = build_laminate(LaminateSpec(B0, C0, 1.0, 0.1))
    assert len(pm.pieces) == 1
    assert gradient_stats(pm, [B0])["fractions"] == [1.0]
    assert gradient_stats(pm, [])["remainder"] == 1.0


def test_laminate_infeasible_reports_minimal_epsilon():
    with pytest.raises(LaminateInfeasibleError) as info:
        build_laminate(LaminateSpec(B0, C0, 0.5, 1e-4))
    assert 1e-4 < info.value.minimal_epsilon < 0.01


def test_boundary_fit_rejects_non_affine_trace():
    sq = unit_square()
    left = np.array([[0.0, 0.0], [0.5, 0.0], [0.5, 1.0], [0.0, 1.0]])
    pm = PiecewiseAffineMap([AffinePiece(left, [[1.0, 0.0]], [0.0]), AffinePiece(left + [0.5, 0.0], [[0.0, 0.0]], [0.5])], sq)
    with pytest.raises(ValueError):
        boundary_affine_fit(pm)


# -- H1/H2 critical map ---------------------------------------------------------

def test_critical_map():
    pm, audit = h1h2_critical_map(epsilon=0.1)
    assert audit.ok
    assert audit.distinct_gradients == 2 and audit.B_constant_error <= 1e-12
    assert max(abs(v) for v in audit.weak_inner) <= 1e-8
    assert audit.fractions == pytest.approx([0.5, 0.5])
    assert audit.outer_residual > 1.0
    assert outer_residual_on_grid(pm, 32) > 1.0
    # sawtooth amplitude stays below epsilon
    V, own = pm.vertices()
    f = np.einsum("kij,kj->ki", pm.matrices()[own], V) + pm.offsets()[own]
    assert np.max(np.abs(f - V @ (0.5 * (B0 + C0)).T)) <= 0.1 + 1e-12
