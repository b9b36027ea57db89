"""Potentials of a discrete stationary map: v with Dv = A(Du), w with Dw = B(Du),
and the scalar z whose rotated gradient is w."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..area import dist_to_CA, field_A, field_B
from ..campaign import SCHEMA_VERSION, _jsonable
from .fields import DiscreteField


class DivergenceError(ValueError):
    pass


def _curl(F: np.ndarray, h: float) -> np.ndarray:
    """d_y F_x - d_x F_y for a field of shape (Nx, Ny, ..., 2)."""
    return np.gradient(F[..., 0], h, axis=1, edge_order=2) - np.gradient(F[..., 1], h, axis=0, edge_order=2)


def integrate_gradient(F: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Potentials of a gradient field F (Nx, Ny, m, 2) along two path families.

    Returns (phi, phi_alt): phi follows the bottom edge then goes up; phi_alt
    follows the left edge then goes across.  Both vanish at the bottom-left
    node.
    """
    Fx, Fy = F[..., 0], F[..., 1]
    bottom = cumulative_trapezoid(Fx[:, 0], dx=h, axis=0, initial=0.0)
    phi = bottom[:, None] + cumulative_trapezoid(Fy, dx=h, axis=1, initial=0.0)
    left = cumulative_trapezoid(Fy[0, :], dx=h, axis=0, initial=0.0)
    phi_alt = left[None, :] + cumulative_trapezoid(Fx, dx=h, axis=0, initial=0.0)
    return phi, phi_alt


@dataclass
class PotentialReport:
    curl_A: float
    curl_B: float
    path_discrepancy_v: float
    path_discrepancy_w: float
    tol_curl: float
    integrable: bool

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **_jsonable(asdict(self))}


def build_potentials(u: DiscreteField, tol_curl: float = 0.05) -> tuple[DiscreteField, DiscreteField, PotentialReport]:
    """Integrate P = A(Du) to v and Q = B(Du) to w from nodal gradients.

    Curl residuals are the max over nodes at least two steps inside the ring
    (the one-sided boundary stencils are only first-order for curls).
    """
    grid, h = u.grid, u.grid.h
    Du = u.nodal_gradient()
    P, Q = field_A(Du), field_B(Du)
    cA, cB = np.abs(_curl(P, h)), np.abs(_curl(Q, h))
    core = (slice(2, -2), slice(2, -2))
    curl_A = float(np.max(cA[core])) if cA[core].size else 0.0
    curl_B = float(np.max(cB[core])) if cB[core].size else 0.0
    v, v_alt = integrate_gradient(P, h)
    w, w_alt = integrate_gradient(Q, h)
    rep = PotentialReport(
        curl_A, curl_B,
        float(np.max(np.abs(v - v_alt))), float(np.max(np.abs(w - w_alt))),
        tol_curl, max(curl_A, curl_B) <= tol_curl,
    )
    return DiscreteField(grid, v), DiscreteField(grid, w), rep


@dataclass
class MongeAmpereReport:
    det_residual_max: float
    det_residual_field: np.ndarray
    min_laplacian: float
    min_eigenvalue: float
    max_divergence: float
    audit_layers: int

    @property
    def laplacian_positive(self) -> bool:
        return self.min_laplacian > 0

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("det_residual_field")
        d["laplacian_positive"] = self.laplacian_positive
        return {"schema_version": SCHEMA_VERSION, **_jsonable(d)}


def hessian_2d(z: np.ndarray, h: float) -> np.ndarray:
    """Centered second differences of a scalar grid function at interior nodes, (nx, ny, 2, 2)."""
    zxx = (z[2:, 1:-1] - 2 * z[1:-1, 1:-1] + z[:-2, 1:-1]) / h ** 2
    zyy = (z[1:-1, 2:] - 2 * z[1:-1, 1:-1] + z[1:-1, :-2]) / h ** 2
    zxy = (z[2:, 2:] - z[2:, :-2] - z[:-2, 2:] + z[:-2, :-2]) / (4 * h ** 2)
    return np.stack([np.stack([zxx, zxy], -1), np.stack([zxy, zyy], -1)], -2)


def ma_potential(w: DiscreteField, tol_div: float = 0.05, layers: int = 2) -> tuple[DiscreteField, MongeAmpereReport]:
    """Integrate (w_2, -w_1) to z and audit det D^2 z = 1, Laplacian > 0.

    Audited nodes are those at least ``layers`` steps inside the ring; the
    gradients feeding w are one-sided at the ring, which spoils second
    differences there.
    """
    if w.components != 2:
        raise ValueError("w must have two components")
    h = w.grid.h
    Dw = w.nodal_gradient()  # (Nx, Ny, 2, 2)
    div = Dw[..., 0, 0] + Dw[..., 1, 1]
    core = (slice(layers, -layers), slice(layers, -layers))
    dcore = np.abs(div[core])
    if dcore.size and dcore.max() > tol_div:
        i, j = np.unravel_index(int(np.argmax(dcore)), dcore.shape)
        raise DivergenceError(f"div w = {dcore.max():.3e} exceeds {tol_div} at node ({i + layers}, {j + layers})")
    rot = np.stack([w.values[..., 1], -w.values[..., 0]], axis=-1)  # grad z
    # integrate through the gradient of each component: F[..., 0, a] = rot_a
    z, _ = integrate_gradient(rot[:, :, None, :], h)
    H = hessian_2d(z[..., 0], h)  # interior nodes, offset by one
    inner = (slice(layers - 1, -(layers - 1) or None),) * 2 if layers > 1 else (slice(None),) * 2
    Hc = H[inner]
    det = Hc[..., 0, 0] * Hc[..., 1, 1] - Hc[..., 0, 1] ** 2
    lap = Hc[..., 0, 0] + Hc[..., 1, 1]
    eig = np.linalg.eigvalsh(Hc)[..., 0]
    rep = MongeAmpereReport(
        float(np.max(np.abs(det - 1.0))), det - 1.0, float(np.min(lap)), float(np.min(eig)),
        float(dcore.max()) if dcore.size else 0.0, layers,
    )
    return DiscreteField(w.grid, z), rep


def inclusion_residual(U: DiscreteField, starts: int = 1, seed: int = 0) -> np.ndarray:
    """Nodewise distance of the discrete gradient of a (2n+2)-component field to the constraint set."""
    m = U.components
    if m < 4 or m % 2:
        raise ValueError("stacked field needs 2n + 2 components")
    DU = U.nodal_gradient()
    return dist_to_CA(DU, starts=starts, seed=seed).value
