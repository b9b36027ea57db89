"""Discrete area functional on a tensor grid and its stationary points.

Each cell carries the averaged gradient of its four corner values.  Both
residuals below are exact derivatives (or the same scatter) of that cell
gradient, so affine data give residuals that vanish identically.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..area import area_density, area_gradient, area_hessian
from ..campaign import SCHEMA_VERSION, _jsonable
from .fields import DiscreteField, Grid

# corner offsets (di, dj) and the sign of each corner in the x / y difference
_CORNERS = np.array([[0, 0], [1, 0], [0, 1], [1, 1]])
_SIGN = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]])


@dataclass
class SolveReport:
    iterations: int
    final_energy: float
    el_residual_norm: float
    inner_residual_norm: float
    converged: bool
    method: str = "newton"
    newton_steps: int = 0
    descent_steps: int = 0
    message: str = ""

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **_jsonable(asdict(self))}


# -- cell operators ----------------------------------------------------------------

def _corner_index(grid: Grid) -> np.ndarray:
    """Flat node index of each cell corner, shape (cells, 4)."""
    Nx, Ny = grid.shape
    ci, cj = np.meshgrid(np.arange(Nx - 1), np.arange(Ny - 1), indexing="ij")
    ci, cj = ci.ravel(), cj.ravel()
    return (ci[:, None] + _CORNERS[:, 0]) * Ny + (cj[:, None] + _CORNERS[:, 1])


def cell_gradients(values: np.ndarray, h: float) -> np.ndarray:
    """Four-point averaged gradient of each cell, shape (nx+1, ny+1, m, 2)."""
    u00, u10 = values[:-1, :-1], values[1:, :-1]
    u01, u11 = values[:-1, 1:], values[1:, 1:]
    dx = (u10 - u00 + u11 - u01) / (2.0 * h)
    dy = (u01 - u00 + u11 - u10) / (2.0 * h)
    return np.stack([dx, dy], axis=-1)


def _scatter(grid: Grid, cell_flux: np.ndarray) -> np.ndarray:
    """Transpose of the cell-gradient map applied to a (cells, m, 2) flux, times 1/h."""
    Nx, Ny = grid.shape
    m = cell_flux.shape[-2]
    F = cell_flux.reshape(Nx - 1, Ny - 1, m, 2)
    out = np.zeros((Nx, Ny, m))
    for (di, dj), (sx, sy) in zip(_CORNERS, _SIGN):
        out[di:Nx - 1 + di, dj:Ny - 1 + dj] += 0.5 * (sx * F[..., 0] + sy * F[..., 1])
    return out / grid.h


def discrete_energy(u: DiscreteField) -> float:
    """Sum over cells of area(Du_cell) h^2."""
    Du = cell_gradients(u.values, u.grid.h)
    return float(np.sum(area_density(Du)) * u.grid.h ** 2)


def _flux_residual(grid: Grid, flux: np.ndarray) -> tuple[np.ndarray, float]:
    # r = -(1/h^2) d/du [h^2 sum <flux, Du_cell>], zero on the ring
    r = -_scatter(grid, flux)
    r[0, :] = r[-1, :] = r[:, 0] = r[:, -1] = 0.0
    return r, float(np.max(np.abs(r)))


def el_residual(u: DiscreteField) -> tuple[np.ndarray, float]:
    """Conservative divergence of D area(Du) per interior node and component; norm is max |.|."""
    Du = cell_gradients(u.values, u.grid.h)
    return _flux_residual(u.grid, area_gradient(Du))


def inner_variation_residual(u: DiscreteField) -> tuple[np.ndarray, float]:
    """Same discrete divergence applied to T = (Du)^T D area(Du) - area(Du) Id (two components)."""
    Du = cell_gradients(u.values, u.grid.h)
    T = np.swapaxes(Du, -1, -2) @ area_gradient(Du) - area_density(Du)[..., None, None] * np.eye(2)
    return _flux_residual(u.grid, T)


# -- assembly --------------------------------------------------------------------

class _System:
    """Interior unknowns of an n-component Dirichlet problem."""

    def __init__(self, grid: Grid, ring: np.ndarray):
        self.grid = grid
        self.n = ring.shape[2]
        self.base = ring.copy()
        self.base[1:-1, 1:-1] = 0.0
        Nx, Ny = grid.shape
        self.corner = _corner_index(grid)
        interior = grid.interior_mask().ravel()
        self.dof_of_node = np.full(Nx * Ny, -1)
        self.dof_of_node[interior] = np.arange(int(interior.sum()))
        self.ndof = int(interior.sum()) * self.n
        # local weights w[p, a] = d(Du[., a]) / d(u at corner p)
        self.w = _SIGN / (2.0 * grid.h)

    def field(self, x: np.ndarray) -> np.ndarray:
        vals = self.base.copy()
        vals[1:-1, 1:-1] = x.reshape(self.grid.nx, self.grid.ny, self.n)
        return vals

    def unknowns(self, vals: np.ndarray) -> np.ndarray:
        return vals[1:-1, 1:-1].reshape(-1).copy()

    def energy(self, x):
        return float(np.sum(area_density(cell_gradients(self.field(x), self.grid.h))) * self.grid.h ** 2)

    def gradient(self, x):
        Du = cell_gradients(self.field(x), self.grid.h)
        g = _scatter(self.grid, area_gradient(Du).reshape(-1, self.n, 2)) * self.grid.h ** 2
        return g[1:-1, 1:-1].reshape(-1)

    def _assemble(self, H: np.ndarray) -> sp.csr_matrix:
        """h^2 G^T H G restricted to interior unknowns; H has shape (cells, n, 2, n, 2)."""
        n = self.n
        K = np.einsum("pa,ckalb,qb->cpkql", self.w, H, self.w) * self.grid.h ** 2
        dof = self.dof_of_node[self.corner]  # (cells, 4)
        comp = np.arange(n)
        gi = dof[:, :, None] * n + comp  # (cells, 4, n)
        valid = (dof >= 0)[:, :, None] & np.ones(n, dtype=bool)
        rows = np.broadcast_to(gi[:, :, :, None, None], K.shape)
        cols = np.broadcast_to(gi[:, None, None, :, :], K.shape)
        keep = np.broadcast_to(valid[:, :, :, None, None], K.shape) & np.broadcast_to(valid[:, None, None, :, :], K.shape)
        return sp.csr_matrix((K[keep], (rows[keep], cols[keep])), shape=(self.ndof, self.ndof))

    def hessian(self, x):
        Du = cell_gradients(self.field(x), self.grid.h).reshape(-1, self.n, 2)
        return self._assemble(area_hessian(Du))

    def laplacian(self):
        cells = self.corner.shape[0]
        eye = np.einsum("kl,ab->kalb", np.eye(self.n), np.eye(2))
        return self._assemble(np.broadcast_to(eye, (cells,) + eye.shape))

    def residual_norm(self, x):
        return float(np.max(np.abs(self.gradient(x)))) / self.grid.h ** 2 if self.ndof else 0.0


def harmonic_extension(grid: Grid, ring_values: np.ndarray) -> DiscreteField:
    """Discrete harmonic extension (quadratic energy with the same cell gradient)."""
    sysm = _System(grid, np.asarray(ring_values, dtype=float))
    L = sysm.laplacian().tocsc()
    # gradient of the quadratic energy at x = 0 is the boundary load
    Du = cell_gradients(sysm.field(np.zeros(sysm.ndof)), grid.h)
    load = (_scatter(grid, Du.reshape(-1, sysm.n, 2)) * grid.h ** 2)[1:-1, 1:-1].reshape(-1)
    x = spla.spsolve(L, -load)
    return DiscreteField(grid, sysm.field(x))


def ring_from_boundary(grid: Grid, boundary) -> np.ndarray:
    """Sample Dirichlet data on the ring; interior filled with zeros."""
    if isinstance(boundary, DiscreteField):
        if boundary.grid != grid:
            raise ValueError("boundary field lives on a different grid")
        vals = boundary.values.copy()
    else:
        X, Y = grid.coords()
        vals = np.asarray(boundary(X, Y), dtype=float).reshape(grid.shape + (-1,))
    ring = np.zeros_like(vals)
    mask = grid.boundary_mask()
    ring[mask] = vals[mask]
    return ring


def solve_dirichlet(
    grid: Grid,
    boundary,
    tol: float = 1e-10,
    max_iter: int = 100,
    method: str = "newton",
    initial: DiscreteField | None = None,
) -> tuple[DiscreteField, SolveReport]:
    """Minimise the discrete area with Dirichlet data ``boundary``.

    ``boundary`` is a callable (X, Y) -> values or a DiscreteField whose ring
    is used.  ``newton`` takes Newton steps with an Armijo line search and
    falls back to Laplacian-preconditioned descent when the Newton direction
    is not a descent direction; ``descent`` uses only the latter.
    """
    if method not in ("newton", "descent"):
        raise ValueError("method must be 'newton' or 'descent'")
    ring = ring_from_boundary(grid, boundary)
    sysm = _System(grid, ring)
    x = sysm.unknowns(initial.values if initial is not None else harmonic_extension(grid, ring).values)
    lap = spla.splu(sysm.laplacian().tocsc())
    E = sysm.energy(x)
    g = sysm.gradient(x)
    res = sysm.residual_norm(x)
    it = n_newton = n_desc = 0
    message = ""
    while res > tol and it < max_iter:
        it += 1
        d = None
        if method == "newton":
            try:
                d = spla.spsolve(sysm.hessian(x).tocsc(), -g)
                if not np.all(np.isfinite(d)) or g @ d >= -1e-14 * np.linalg.norm(g) * np.linalg.norm(d):
                    d = None
            except RuntimeError:
                d = None
        used_newton = d is not None
        if d is None:
            d = -lap.solve(g)
        slope = g @ d
        step, accepted = 1.0, False
        for _ in range(40):
            xn = x + step * d
            En = sysm.energy(xn)
            # the Armijo test loses meaning at roundoff; fall back to residual decrease there
            if En <= E + 1e-4 * step * slope or (
                abs(En - E) <= 1e-14 * abs(E) and sysm.residual_norm(xn) < res
            ):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            message = "line search exhausted"
            break
        n_newton += used_newton
        n_desc += not used_newton
        x, E = xn, min(En, E)
        g = sysm.gradient(x)
        res = sysm.residual_norm(x)
    u = DiscreteField(grid, sysm.field(x))
    _, inner = inner_variation_residual(u)
    if res > tol and not message:
        message = "iteration limit reached"
    rep = SolveReport(it, discrete_energy(u), res, inner, res <= tol, method, n_newton, n_desc, message)
    return u, rep
