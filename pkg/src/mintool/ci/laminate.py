"""Simple laminates: piecewise-affine maps whose gradients oscillate between two
rank-one-connected matrices, with a collar that restores affine boundary data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..area import field_B, subminor_dets
from ..campaign import SCHEMA_VERSION
from .algebra import classify, in_H1, in_H2, rank_one_connection
from .geometry import (
    AffinePiece,
    PiecewiseAffineMap,
    check_convex_ccw,
    clip_halfplane,
    edge_quadrature,
    inward_edges,
    polygon_area,
    unit_square,
)

MAX_PIECES = 1_000_000


class LaminateInfeasibleError(ValueError):
    def __init__(self, message: str, minimal_epsilon: float):
        super().__init__(message)
        self.minimal_epsilon = minimal_epsilon


@dataclass(frozen=True)
class LaminateSpec:
    B: np.ndarray
    C: np.ndarray
    t: float
    epsilon: float

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if B.shape != C.shape or B.shape[1] != 2:
            raise ValueError("B and C must both be n x 2")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if rank_one_connection(B, C) is None:
            raise ValueError("rank(B - C) must be one")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def A(self) -> np.ndarray:
        return self.t * self.B + (1.0 - self.t) * self.C


def dist_to_segment(X, B, C) -> np.ndarray:
    """Frobenius distance from X (..., n, 2) to the segment [B, C]."""
    X = np.asarray(X, dtype=float)
    D = B - C
    lam = np.clip(np.sum((X - C) * D, axis=(-2, -1)) / np.sum(D * D), 0.0, 1.0)
    R = X - C - lam[..., None, None] * D
    return np.sqrt(np.sum(R * R, axis=(-2, -1)))


def _collar_slope(spec: LaminateSpec, a: np.ndarray, normal: np.ndarray) -> float:
    """Largest kappa with A + kappa a (x) normal within epsilon of [B, C]."""
    M = np.outer(a, normal)
    target = spec.epsilon * (1.0 - 1e-9)
    def d(k):
        return float(dist_to_segment(spec.A + k * M, spec.B, spec.C))
    hi = spec.epsilon
    while d(hi) <= target and hi < 1e8:
        hi *= 2.0
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if d(mid) <= target else (lo, mid)
    return lo


def _strips(xi_min, xi_max, t, P):
    """(start, end, h at start, slope, is_B) of the sawtooth pieces covering [xi_min, xi_max]."""
    k = 0
    out = []
    while True:
        s0 = xi_min + k * P
        if s0 >= xi_max:
            break
        mid = s0 + t * P
        if t > 0:
            out.append((s0, min(mid, xi_max), 0.0, 1.0 - t, True))
        if t < 1 and mid < xi_max:
            out.append((mid, min(s0 + P, xi_max), t * (1.0 - t) * P, -t, False))
        k += 1
    return out


def _assemble(spec, domain, P, a, nu, scale):
    """Pieces of f = A x + a g with g = min(scale h(x . nu), min_e kappa_e dist_e(x))."""
    A = spec.A
    n_e, c_e = inward_edges(domain)
    kappa = np.array([_collar_slope(spec, a, ne) for ne in n_e])
    xi = domain @ nu
    pieces = []
    for (s0, s1, h0, slope, is_b) in _strips(xi.min(), xi.max(), spec.t, P):
        V = clip_halfplane(domain, -nu, -s0)
        V = clip_halfplane(V, nu, s1)
        if len(V) < 3 or polygon_area(V) <= 0:
            continue
        # candidates: value = grad . x + const
        cand_grad = [scale * slope * nu] + [k * ne for k, ne in zip(kappa, n_e)]
        cand_c = [scale * (h0 - slope * s0)] + [-k * ce for k, ce in zip(kappa, c_e)]
        cg = np.array(cand_grad)
        cc = np.array(cand_c)
        vals = V @ cg.T + cc  # (verts, candidates)
        # candidates that are the minimum somewhere on this strip
        active = [j for j in range(len(cc)) if j == 0 or np.min(vals[:, j] - vals[:, 0]) < 0]
        if np.all(vals[:, 0] <= vals[:, 1:].min(axis=1) if len(cc) > 1 else True) and len(active) == 1:
            regions = [(0, V)]
        else:
            regions = []
            for j in active:
                W = V
                for i in active:
                    if i != j and len(W):
                        W = clip_halfplane(W, cg[j] - cg[i], cc[i] - cc[j])
                if len(W) >= 3 and polygon_area(W) > 1e-15 * polygon_area(domain):
                    regions.append((j, W))
        for j, W in regions:
            M = A + np.outer(a, cg[j])
            off = a * cc[j]
            tag = ("B" if is_b else "C") if j == 0 else f"collar{j - 1}"
            pieces.append(AffinePiece(W, M, off, tag))
        if len(pieces) > MAX_PIECES:
            raise OverflowError
    return pieces, kappa


def fractions_exact(pmap: PiecewiseAffineMap, B, C, tol: float = 1e-12) -> tuple[float, float]:
    M = pmap.matrices()
    w = pmap.areas()
    tot = polygon_area(pmap.domain)
    fb = float(np.sum(w[np.max(np.abs(M - B), axis=(-2, -1)) <= tol]) / tot)
    fc = float(np.sum(w[np.max(np.abs(M - C), axis=(-2, -1)) <= tol]) / tot)
    return fb, fc


def _plan(spec: LaminateSpec, domain: np.ndarray, a, nu, scale) -> tuple[float, float]:
    """Starting period and predicted piece count for ``spec``.

    The period starts at eps / (4 |B - C| diam) and is halved past the point
    where the collar, which costs about sum_e len_e scale t (1-t) P / (2 kappa_e)
    of area, could still break the volume fractions.
    """
    diam = float(np.max(np.linalg.norm(domain[:, None] - domain[None], axis=-1)))
    P = spec.epsilon / (4.0 * scale * diam)
    n_e, _ = inward_edges(domain)
    lens = np.linalg.norm(np.roll(domain, -1, axis=0) - domain, axis=1)
    kappa = np.array([_collar_slope(spec, a, ne) for ne in n_e])
    per_P = scale * spec.t * (1 - spec.t) * np.sum(lens / kappa) / (2.0 * polygon_area(domain))
    while P > spec.epsilon / per_P:
        P *= 0.5
    width = float(np.ptp(domain @ nu))
    # two strips per period, each cut into its core and up to two collar pieces
    return P, 6.0 * width / P


def _minimal_epsilon(spec, domain, a, nu, scale) -> float:
    lo, hi = spec.epsilon, 1.0
    for _ in range(60):
        mid = np.sqrt(lo * hi)
        trial = LaminateSpec(spec.B, spec.C, spec.t, mid)
        if _plan(trial, domain, a, nu, scale)[1] <= MAX_PIECES:
            hi = mid
        else:
            lo = mid
    return float(hi)


def build_laminate(spec: LaminateSpec, domain=None, max_halvings: int = 20) -> PiecewiseAffineMap:
    """Laminate between B and C with boundary values A x on a convex polygon.

    The sawtooth period is halved until the volume fractions of gradient
    exactly B and exactly C reach (1 - eps) t and (1 - eps)(1 - t).
    """
    domain = check_convex_ccw(unit_square() if domain is None else domain)
    A = spec.A
    if spec.t in (0.0, 1.0):
        piece = AffinePiece(domain, A, np.zeros(A.shape[0]), "B" if spec.t == 1.0 else "C")
        return PiecewiseAffineMap([piece], domain, {"period": None, "kappa": [], "t": spec.t, "epsilon": spec.epsilon})
    a, nu, scale = rank_one_connection(spec.B, spec.C)
    need_b = (1.0 - spec.epsilon) * spec.t
    need_c = (1.0 - spec.epsilon) * (1.0 - spec.t)
    P, predicted = _plan(spec, domain, a, nu, scale)
    for _ in range(max_halvings):
        if predicted > MAX_PIECES:
            break
        try:
            pieces, kappa = _assemble(spec, domain, P, a, nu, scale)
        except OverflowError:
            break
        pmap = PiecewiseAffineMap(pieces, domain, {
            "period": P, "kappa": kappa.tolist(), "t": spec.t, "epsilon": spec.epsilon,
            "direction": nu.tolist(), "amplitude": a.tolist(), "jump": scale,
        })
        fb, fc = fractions_exact(pmap, spec.B, spec.C)
        if fb >= need_b and fc >= need_c:
            return pmap
        P *= 0.5
        predicted *= 2.0
    raise LaminateInfeasibleError(
        f"eps = {spec.epsilon} needs more than {MAX_PIECES} pieces",
        minimal_epsilon=_minimal_epsilon(spec, domain, a, nu, scale),
    )


@dataclass
class LaminateAudit:
    boundary_error: float
    sup_error: float
    max_segment_distance: float
    fraction_B: float
    fraction_C: float
    required_B: float
    required_C: float
    geometry_ok: bool
    null_lagrangian: float

    @property
    def ok(self) -> bool:
        return (self.boundary_error <= 1e-10 and self.sup_error <= self.required_sup
                and self.max_segment_distance <= self.required_sup and self.fraction_B >= self.required_B
                and self.fraction_C >= self.required_C and self.geometry_ok and abs(self.null_lagrangian) <= 1e-10)

    required_sup: float = 0.0

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "boundary_error", "sup_error", "max_segment_distance", "fraction_B", "fraction_C",
            "required_B", "required_C", "geometry_ok", "null_lagrangian", "required_sup")}
        d["ok"] = self.ok
        d["schema_version"] = SCHEMA_VERSION
        return d


def audit_laminate(pmap: PiecewiseAffineMap, spec: LaminateSpec) -> LaminateAudit:
    """Check boundary trace, sup distance to A x, gradients near [B, C] and volume fractions."""
    A = spec.A
    bp, bv = pmap.boundary_points()
    boundary_error = float(np.max(np.abs(bv - bp @ A.T)))
    allv, owner = pmap.vertices()
    M, b = pmap.matrices(), pmap.offsets()
    # f - A x is affine on each piece, so its sup is attained at vertices
    fv = np.einsum("kij,kj->ki", M[owner], allv) + b[owner]
    sup_error = float(np.max(np.linalg.norm(fv - allv @ A.T, axis=1)))
    seg = float(np.max(dist_to_segment(M, spec.B, spec.C)))
    fb, fc = fractions_exact(pmap, spec.B, spec.C)
    geo = pmap.audit()
    return LaminateAudit(
        boundary_error, sup_error, seg, fb, fc,
        (1.0 - spec.epsilon) * spec.t, (1.0 - spec.epsilon) * (1.0 - spec.t),
        geo.ok, null_lagrangian_check(pmap), spec.epsilon,
    )


def gradient_stats(pmap: PiecewiseAffineMap, targets, tol: float = 1e-12) -> dict:
    """Area fraction of pieces whose gradient is within ``tol`` of each target (first match wins)."""
    M = pmap.matrices()
    w = pmap.areas() / polygon_area(pmap.domain)
    free = np.ones(len(M), dtype=bool)
    fractions = []
    for T in targets:
        hit = free & (np.max(np.abs(M - np.asarray(T, dtype=float)), axis=(-2, -1)) <= tol)
        fractions.append(float(np.sum(w[hit])))
        free &= ~hit
    return {"fractions": fractions, "remainder": float(np.sum(w[free]))}


def boundary_affine_fit(pmap: PiecewiseAffineMap, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares affine map through the boundary trace; raises if the trace is not affine."""
    P, V = pmap.boundary_points()
    X = np.hstack([P, np.ones((len(P), 1))])
    coef, *_ = np.linalg.lstsq(X, V, rcond=None)
    resid = float(np.max(np.abs(X @ coef - V)))
    if resid > tol * max(1.0, float(np.max(np.abs(V)))):
        raise ValueError(f"boundary trace is not affine (residual {resid:.3e})")
    return coef[:2].T, coef[2]


def null_lagrangian_check(pmap: PiecewiseAffineMap) -> float:
    """Sum over pieces of det(D_piece - A) area, A the affine boundary map.

    For n > 2 the sum runs over all 2 x 2 row minors, each a null Lagrangian.
    """
    A, _ = boundary_affine_fit(pmap)
    D = pmap.matrices() - A
    dets = subminor_dets(D) if D.shape[1] > 2 else (D[:, 0, 0] * D[:, 1, 1] - D[:, 0, 1] * D[:, 1, 0])[:, None]
    if D.shape[1] == 1:
        return 0.0
    return float(np.sum(np.sum(dets, axis=-1) * pmap.areas()))


# -- H1/H2 laminate ------------------------------------------------------------------

B0 = np.array([[1.0, 0.0], [0.0, -1.0]])
C0 = np.array([[-1.0, 0.0], [0.0, -1.0]])


def weak_test_fields(domain: np.ndarray):
    """Five smooth vector fields vanishing on the boundary of a convex polygon."""
    n_e, c_e = inward_edges(domain)

    def vanish(x):
        return np.prod(x @ n_e.T - c_e, axis=-1)

    def d_vanish(x):
        L = x @ n_e.T - c_e
        g = np.zeros(x.shape)
        for e in range(len(c_e)):
            g += np.prod(np.delete(L, e, axis=-1), axis=-1)[..., None] * n_e[e]
        return g

    polys = [
        (lambda x: np.stack([np.ones(x.shape[:-1]), np.zeros(x.shape[:-1])], -1), lambda x: np.zeros(x.shape + (2,))),
        (lambda x: np.stack([x[..., 1], x[..., 0] ** 2], -1),
         lambda x: np.stack([np.stack([0 * x[..., 0], 1 + 0 * x[..., 0]], -1),
                             np.stack([2 * x[..., 0], 0 * x[..., 0]], -1)], -2)),
        (lambda x: np.stack([np.sin(3 * x[..., 0]), np.cos(2 * x[..., 1])], -1),
         lambda x: np.stack([np.stack([3 * np.cos(3 * x[..., 0]), 0 * x[..., 0]], -1),
                             np.stack([0 * x[..., 0], -2 * np.sin(2 * x[..., 1])], -1)], -2)),
        (lambda x: np.stack([x[..., 0] * x[..., 1], -x[..., 1] ** 3], -1),
         lambda x: np.stack([np.stack([x[..., 1], x[..., 0]], -1),
                             np.stack([0 * x[..., 0], -3 * x[..., 1] ** 2], -1)], -2)),
        (lambda x: np.stack([np.exp(x[..., 0] - x[..., 1]), x[..., 0]], -1),
         lambda x: np.stack([np.stack([np.exp(x[..., 0] - x[..., 1]), -np.exp(x[..., 0] - x[..., 1])], -1),
                             np.stack([1 + 0 * x[..., 0], 0 * x[..., 0]], -1)], -2)),
    ]
    fields = []
    for q, dq in polys:
        def phi(x, q=q):
            return vanish(x)[..., None] * q(x)

        def dphi(x, q=q, dq=dq):
            return vanish(x)[..., None, None] * dq(x) + q(x)[..., :, None] * d_vanish(x)[..., None, :]
        fields.append((phi, dphi))
    return fields


def weak_divergence_residual(pmap: PiecewiseAffineMap, flux, tests, order: int = 8) -> list[float]:
    """sum_p  int_{dp} (F_p n) . Phi ds  =  int <F, D Phi> dx  for piecewise-constant F.

    ``flux(matrix) -> 2 x 2``; the contributions of an interior edge cancel
    between its two sides, so the sum probes only the jumps of F and the
    boundary values of Phi.
    """
    out = []
    for phi, _ in tests:
        total = 0.0
        for p in pmap.pieces:
            F = flux(p.matrix)
            pts, wts, nrm = edge_quadrature(p.cell, order)
            Fn = nrm @ F.T  # (edges, 2)
            total += float(np.sum(wts * np.einsum("ek,eqk->eq", Fn, phi(pts))))
        out.append(total)
    return out


def inner_flux(X) -> np.ndarray:
    """(Du)^T D area - area Id, written as -B J."""
    from ..area import J

    return -field_B(X) @ J


def curl_flux(X) -> np.ndarray:
    """Rows of B rotated so the divergence form tests curl(B)."""
    from ..area import J

    return field_B(X) @ J


@dataclass
class CriticalMapAudit:
    all_in_H1_H2: bool
    B_constant_error: float
    weak_inner: list
    weak_curl: list
    distinct_gradients: int
    fractions: list
    outer_residual: float | None = None

    @property
    def ok(self) -> bool:
        return (self.all_in_H1_H2 and self.B_constant_error <= 1e-10 and self.distinct_gradients >= 2
                and max(abs(v) for v in self.weak_inner) <= 1e-8 and max(abs(v) for v in self.weak_curl) <= 1e-10)

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in ("all_in_H1_H2", "B_constant_error", "weak_inner", "weak_curl",
                                          "distinct_gradients", "fractions", "outer_residual")}
        d["ok"] = self.ok
        d["schema_version"] = SCHEMA_VERSION
        return d


def h1h2_critical_map(domain=None, epsilon: float = 0.1, outer_grid: int | None = 64):
    """Stripes alternating between B0 in H1 and C0 in H2, no collar.

    The stripe period 1/m is the largest with sup |psi - A x| <= epsilon and an
    integer number of periods across the domain.  ``outer_grid`` sets the
    grid used to record the (large) outer residual; None skips it.
    """
    from ..area import J

    domain = check_convex_ccw(unit_square() if domain is None else domain)
    a, nu, scale = rank_one_connection(B0, C0)
    xi = domain @ nu
    width = float(xi.max() - xi.min())
    # amplitude of the sawtooth is scale t (1 - t) P = P / 2
    m = int(np.ceil(width * scale * 0.25 / epsilon))
    P = width / m
    A = 0.5 * (B0 + C0)
    pieces = []
    for s0, s1, h0, slope, is_b in _strips(xi.min(), xi.max(), 0.5, P):
        V = clip_halfplane(clip_halfplane(domain, -nu, -s0), nu, s1)
        if len(V) < 3:
            continue
        g = scale * slope * nu
        c = scale * (h0 - slope * s0)
        pieces.append(AffinePiece(V, A + np.outer(a, g), a * c, "B" if is_b else "C"))
    pmap = PiecewiseAffineMap(pieces, domain, {"period": P, "stripes": len(pieces), "epsilon": epsilon})
    M = pmap.matrices()
    member = bool(np.all(in_H1(M) | in_H2(M)))
    Berr = float(np.max(np.abs(field_B(M) + J)))
    distinct = len({tuple(np.round(x, 12).ravel()) for x in M})
    tests = weak_test_fields(domain)
    audit = CriticalMapAudit(
        member, Berr,
        weak_divergence_residual(pmap, inner_flux, tests),
        weak_divergence_residual(pmap, curl_flux, tests),
        distinct, gradient_stats(pmap, [B0, C0])["fractions"],
    )
    if outer_grid is not None:
        audit.outer_residual = outer_residual_on_grid(pmap, outer_grid)
    return pmap, audit


def sample_on_grid(pmap: PiecewiseAffineMap, N: int):
    """Nodal values on the unit-spaced grid of the domain's bounding box with spacing width / N."""
    from ..mms.fields import DiscreteField, Grid

    lo = pmap.domain.min(axis=0)
    span = np.ptp(pmap.domain, axis=0)
    h = float(span[0]) / N
    ny = int(round(float(span[1]) / h)) - 1
    grid = Grid(N - 1, ny, h, (float(lo[0]), float(lo[1])))
    X, Y = grid.coords()
    return DiscreteField(grid, pmap.evaluate(np.stack([X, Y], axis=-1)))


def outer_residual_on_grid(pmap: PiecewiseAffineMap, N: int) -> float:
    from ..mms.solver import el_residual

    return el_residual(sample_on_grid(pmap, N))[1]


def gradient_class_svg(pmap: PiecewiseAffineMap) -> str:
    return pmap.to_svg(classify)
