"""Convex polygons and piecewise-affine maps on them."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import shapely

from ..campaign import SCHEMA_VERSION, _jsonable


def polygon_area(V) -> float:
    """Signed shoelace area (positive for counter-clockwise vertices)."""
    V = np.asarray(V, dtype=float)
    x, y = V[:, 0], V[:, 1]
    return 0.5 * float(x[:-1] @ y[1:] - x[1:] @ y[:-1] + x[-1] * y[0] - x[0] * y[-1])


def clip_halfplane(V: np.ndarray, c: np.ndarray, d: float) -> np.ndarray:
    """Part of the convex polygon V with c . x <= d (Sutherland-Hodgman, one plane)."""
    if len(V) == 0:
        return V
    # plain floats: these polygons have a handful of vertices, so numpy overhead dominates
    cx, cy, d = float(c[0]), float(c[1]), float(d)
    pts = V.tolist()
    s = [cx * x + cy * y - d for x, y in pts]
    if max(s) <= 0:
        return V
    if min(s) > 0:
        return V[:0]
    out = []
    k = len(pts)
    for i in range(k):
        j = i + 1 if i + 1 < k else 0
        si, sj = s[i], s[j]
        if si <= 0:
            out.append(pts[i])
        if (si < 0 < sj) or (sj < 0 < si):
            lam = si / (si - sj)
            xi, yi = pts[i]
            xj, yj = pts[j]
            out.append([xi + lam * (xj - xi), yi + lam * (yj - yi)])
    return np.array(out) if out else V[:0]


def convex_intersection(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Intersection of two convex CCW polygons by clipping P with each edge of Q."""
    W = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    for k in range(len(Q)):
        a, b = Q[k], Q[(k + 1) % len(Q)]
        e = b - a
        if not np.any(e):
            continue
        normal = np.array([e[1], -e[0]])
        W = clip_halfplane(W, normal, float(normal @ a))
        if len(W) < 3:
            return W[:0]
    return W


def unit_square() -> np.ndarray:
    return np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def inward_edges(domain: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inward unit normals n_e and offsets c_e so that dist to edge e is n_e . x - c_e."""
    D = np.asarray(domain, dtype=float)
    E = np.roll(D, -1, axis=0) - D
    n = np.stack([-E[:, 1], E[:, 0]], axis=1)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    return n, np.sum(n * D, axis=1)


def check_convex_ccw(domain) -> np.ndarray:
    D = np.asarray(domain, dtype=float)
    if D.ndim != 2 or D.shape[1] != 2 or len(D) < 3:
        raise ValueError("domain must be a list of at least three 2D vertices")
    E = np.roll(D, -1, axis=0) - D
    cross = E[:, 0] * np.roll(E[:, 1], -1) - E[:, 1] * np.roll(E[:, 0], -1)
    if np.any(cross <= 0):
        raise ValueError("domain must be a strictly convex polygon with counter-clockwise vertices")
    return D


@dataclass
class AffinePiece:
    cell: np.ndarray  # (k, 2) CCW vertices
    matrix: np.ndarray  # (n, 2)
    offset: np.ndarray  # (n,)
    tag: str = ""

    def __post_init__(self):
        self.cell = np.asarray(self.cell, dtype=float)
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        self.offset = np.asarray(self.offset, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.cell)):
            raise ValueError("cell vertices must be finite")
        self.area = polygon_area(self.cell)
        if self.area <= 0:
            raise ValueError("cell must have positive area and counter-clockwise orientation")

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.matrix.T + self.offset


@dataclass
class AuditReport:
    area_error: float
    overlap_area: float
    outside: float
    continuity_error: float
    pieces: int
    tol: float = 1e-10

    @property
    def ok(self) -> bool:
        return max(self.area_error, self.overlap_area, self.outside, self.continuity_error) <= self.tol

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in ("area_error", "overlap_area", "outside", "continuity_error", "pieces", "tol")}
        d["ok"] = self.ok
        return d


@dataclass
class PiecewiseAffineMap:
    pieces: list
    domain: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.domain = check_convex_ccw(self.domain)
        self._tree = None
        self._cache = {}

    # -- bulk views (pieces are treated as immutable once the map exists) ---
    @property
    def n(self) -> int:
        return self.pieces[0].matrix.shape[0]

    def _bulk(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    def matrices(self) -> np.ndarray:
        return self._bulk("M", lambda: np.stack([p.matrix for p in self.pieces]))

    def offsets(self) -> np.ndarray:
        return self._bulk("b", lambda: np.stack([p.offset for p in self.pieces]))

    def areas(self) -> np.ndarray:
        return self._bulk("area", lambda: np.array([p.area for p in self.pieces]))

    def vertices(self) -> tuple[np.ndarray, np.ndarray]:
        """All cell vertices stacked, with the owning piece index of each."""
        return self._bulk("V", lambda: (
            np.concatenate([p.cell for p in self.pieces]),
            np.concatenate([np.full(len(p.cell), k) for k, p in enumerate(self.pieces)]),
        ))

    def edge_midpoints(self) -> tuple[np.ndarray, np.ndarray]:
        def make():
            V, own = self.vertices()
            nxt = np.arange(len(V)) + 1
            # wrap the last vertex of each cell to its first
            last = np.r_[own[1:] != own[:-1], True]
            starts = np.r_[0, np.flatnonzero(last)[:-1] + 1]
            nxt[last] = starts
            return 0.5 * (V + V[nxt]), own
        return self._bulk("mid", make)

    def polygons(self) -> np.ndarray:
        coords, idx = self.vertices()
        return shapely.polygons(shapely.linearrings(coords, indices=idx))

    def frame(self) -> np.ndarray:
        """Rotation taking the dominant edge direction to the x-axis.

        Thin oblique cells have bounding boxes far larger than themselves;
        the spatial index is built in this frame so that stripes get tight boxes.
        """
        def make():
            V, _ = self.vertices()
            Mid, _ = self.edge_midpoints()
            E = 2.0 * (Mid - V)
            L = np.hypot(E[:, 0], E[:, 1])
            ok = L > 0
            z = np.sum((E[ok, 0] + 1j * E[ok, 1]) ** 2 / L[ok])
            th = 0.5 * np.angle(z) if abs(z) > 0 else 0.0
            c, s = np.cos(th), np.sin(th)
            return np.array([[c, s], [-s, c]])
        return self._bulk("frame", make)

    def _index_points(self, P) -> np.ndarray:
        return np.asarray(P, dtype=float) @ self.frame().T

    def _index_polygons(self) -> np.ndarray:
        coords, idx = self.vertices()
        return self._bulk("ipoly", lambda: shapely.polygons(shapely.linearrings(self._index_points(coords), indices=idx)))

    def tree(self) -> shapely.STRtree:
        """STRtree over the cells expressed in ``frame()`` coordinates."""
        if self._tree is None:
            self._tree = shapely.STRtree(self._index_polygons())
        return self._tree

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.domain)) + np.ptp(self.domain))

    def locate(self, points) -> np.ndarray:
        """Index of one piece containing each point (-1 outside the domain)."""
        P = np.asarray(points, dtype=float).reshape(-1, 2)
        q = self.tree().query(shapely.points(self._index_points(P)), predicate="dwithin", distance=1e-12 * self.scale)
        out = np.full(len(P), -1)
        first = np.unique(q[0], return_index=True)
        out[first[0]] = q[1][first[1]]
        return out

    def evaluate(self, points) -> np.ndarray:
        P = np.asarray(points, dtype=float)
        flat = P.reshape(-1, 2)
        idx = self.locate(flat)
        if np.any(idx < 0):
            raise ValueError("some points lie outside the domain")
        M, b = self.matrices()[idx], self.offsets()[idx]
        vals = np.einsum("kij,kj->ki", M, flat) + b
        return vals.reshape(P.shape[:-1] + (self.n,))

    # -- audits -------------------------------------------------------------
    def continuity_error(self) -> float:
        """Max disagreement of neighbouring piece maps at every edge midpoint and vertex."""
        V, ov = self.vertices()
        Mid, om = self.edge_midpoints()
        P = np.concatenate([V, Mid])
        own = np.concatenate([ov, om])
        qi, qj = self.tree().query(shapely.points(self._index_points(P)), predicate="dwithin",
                                   distance=1e-12 * self.scale)
        M, b = self.matrices(), self.offsets()
        mine = np.einsum("kij,kj->ki", M[own[qi]], P[qi]) + b[own[qi]]
        theirs = np.einsum("kij,kj->ki", M[qj], P[qi]) + b[qj]
        return float(np.max(np.abs(mine - theirs))) if len(qi) else 0.0

    def audit(self, tol: float = 1e-10) -> AuditReport:
        areas = self.areas()
        dom_area = polygon_area(self.domain)
        polys = self._index_polygons()
        tree = self.tree()
        # bounding-box candidates, a GEOS overlay as a filter, exact clipping as the arbiter:
        # GEOS can misjudge thin slivers that share a nearly collinear edge
        i, j = tree.query(polys)
        keep = i < j
        i, j = i[keep], j[keep]
        overlap = 0.0
        if len(i):
            rough = shapely.area(shapely.intersection(polys[i], polys[j]))
            for a, b in zip(i[rough > 0], j[rough > 0]):
                W = convex_intersection(self.pieces[a].cell, self.pieces[b].cell)
                overlap += max(polygon_area(W), 0.0) if len(W) >= 3 else 0.0
        n_e, c_e = inward_edges(self.domain)
        allv = self.vertices()[0]
        outside = float(max(0.0, -np.min(allv @ n_e.T - c_e)))
        return AuditReport(
            abs(float(np.sum(areas)) - dom_area) / dom_area, overlap / dom_area, outside,
            self.continuity_error(), len(self.pieces), tol,
        )

    def boundary_points(self, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
        """Piece vertices and edge midpoints on the domain boundary, with their values."""
        n_e, c_e = inward_edges(self.domain)
        V, ov = self.vertices()
        Mid, om = self.edge_midpoints()
        P = np.concatenate([V, Mid])
        own = np.concatenate([ov, om])
        on = np.min(np.abs(P @ n_e.T - c_e), axis=1) <= tol * self.scale
        P, own = P[on], own[on]
        vals = np.einsum("kij,kj->ki", self.matrices()[own], P) + self.offsets()[own]
        return P, vals

    # -- I/O ----------------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "domain": self.domain.tolist(),
            "meta": _jsonable(self.meta),
            "pieces": [
                {"vertices": p.cell.tolist(), "matrix": p.matrix.tolist(), "offset": p.offset.tolist(), "tag": p.tag}
                for p in self.pieces
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "PiecewiseAffineMap":
        pieces = [AffinePiece(np.array(q["vertices"]), np.array(q["matrix"]), np.array(q["offset"]), q.get("tag", ""))
                  for q in data["pieces"]]
        return cls(pieces, np.array(data["domain"]), dict(data.get("meta", {})))

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True) + "\n", encoding="utf-8")

    def to_svg(self, classify=None, size: int = 600) -> str:
        """Cell decomposition coloured by ``classify(matrix) -> label``."""
        colors = {"H1": "#3b6fb6", "H2": "#d9822b", "other": "#9a9a9a"}
        lo = self.domain.min(axis=0)
        span = float(np.max(np.ptp(self.domain, axis=0)))
        sc = size / span
        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">']
        for p in self.pieces:
            label = classify(p.matrix) if classify else "other"
            pts = " ".join(f"{(x - lo[0]) * sc:.4f},{size - (y - lo[1]) * sc:.4f}" for x, y in p.cell)
            parts.append(f'<polygon points="{pts}" fill="{colors.get(label, colors["other"])}" '
                         f'stroke="black" stroke-width="0.2" data-class="{label}"/>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"


def edge_quadrature(V: np.ndarray, order: int = 8):
    """Gauss-Legendre points, weights (times edge length) and outward normals on each edge of V."""
    x, w = np.polynomial.legendre.leggauss(order)
    s = 0.5 * (x + 1.0)
    A, B = V, np.roll(V, -1, axis=0)
    E = B - A
    L = np.linalg.norm(E, axis=1)
    normal = np.stack([E[:, 1], -E[:, 0]], axis=1) / L[:, None]  # outward for CCW
    pts = A[:, None, :] + s[None, :, None] * E[:, None, :]
    wts = 0.5 * w[None, :] * L[:, None]
    return pts, wts, normal
