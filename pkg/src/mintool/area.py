"""Matrix calculus of the area density on n x 2 gradients.

All functions accept a single matrix of shape ``(n, 2)`` or a stack of shape
``(..., n, 2)`` and broadcast over the leading axes.  Norms are Frobenius.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Optional

import numpy as np

J = np.array([[0.0, 1.0], [-1.0, 0.0]])
J.setflags(write=False)
ID2 = np.eye(2)
ID2.setflags(write=False)


def as_gradient(X) -> np.ndarray:
    """Validate and return ``X`` as a float array of shape (..., n, 2)."""
    X = np.asarray(X, dtype=float)
    if X.ndim < 2 or X.shape[-1] != 2 or X.shape[-2] < 1:
        raise ValueError(f"expected shape (..., n, 2) with n >= 1, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("gradient matrix has non-finite entries")
    return X


def frob(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return np.sqrt(np.sum(M * M, axis=(-2, -1)))


def inner(M, N) -> np.ndarray:
    return np.sum(np.asarray(M) * np.asarray(N), axis=(-2, -1))


def det2(M) -> np.ndarray:
    M = np.asarray(M)
    return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]


def cof(M) -> np.ndarray:
    """Cofactor in the convention M @ cof(M) = det(M) Id (the adjugate)."""
    M = np.asarray(M, dtype=float)
    out = np.empty_like(M)
    out[..., 0, 0] = M[..., 1, 1]
    out[..., 0, 1] = -M[..., 0, 1]
    out[..., 1, 0] = -M[..., 1, 0]
    out[..., 1, 1] = M[..., 0, 0]
    return out


def subminor_pairs(n: int) -> list[tuple[int, int]]:
    """Row pairs (a, b), a < b, zero-based.  Pairs with a = b have zero minor."""
    return list(combinations(range(n), 2))


def subminor_dets(X) -> np.ndarray:
    """det(X^{ab}) for every row pair a < b, ordered as ``subminor_pairs``."""
    X = as_gradient(X)
    n = X.shape[-2]
    pairs = subminor_pairs(n)
    if not pairs:
        return np.zeros(X.shape[:-2] + (0,))
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    return X[..., a, 0] * X[..., b, 1] - X[..., a, 1] * X[..., b, 0]


def gram(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.swapaxes(X, -1, -2) @ X


def _area_sq(X) -> np.ndarray:
    G = gram(X)
    return 1.0 + G[..., 0, 0] + G[..., 1, 1] + np.maximum(det2(G), 0.0)


def area_density(X) -> np.ndarray:
    """sqrt(1 + |X|^2 + sum_{a<b} det(X^{ab})^2)."""
    return np.sqrt(_area_sq(as_gradient(X)))


def area_gradient(X) -> np.ndarray:
    """D(area)(X) = X (Id + cof(X^T X)) / area(X).

    Column-wise this is ``beta x_j1 - gamma x_j2`` and ``alpha x_j2 - gamma x_j1``.
    """
    X = as_gradient(X)
    G = gram(X)
    P = X @ (ID2 + cof(G))
    return P / np.sqrt(_area_sq(X))[..., None, None]


def area_gradient_cofactor_sum(X) -> np.ndarray:
    """Same gradient, assembled literally as (X + sum det(X^{ab}) C_ab(X)) / area."""
    X = as_gradient(X)
    n = X.shape[-2]
    num = X.copy()
    for (a, b), d in zip(subminor_pairs(n), np.moveaxis(subminor_dets(X), -1, 0)):
        sub = X[..., [a, b], :]
        num[..., [a, b], :] += d[..., None, None] * np.swapaxes(cof(sub), -1, -2)
    return num / area_density(X)[..., None, None]


def area_hessian(X) -> np.ndarray:
    """Second derivative of the area density as an array (..., n, 2, n, 2)."""
    X = as_gradient(X)
    n = X.shape[-2]
    G = gram(X)
    adjG = cof(G)
    a2 = _area_sq(X)
    a1 = np.sqrt(a2)
    P = X @ (ID2 + adjG)
    In = np.eye(n)
    # D^2 (area^2)/2 in index form (i a, j b)
    H = np.broadcast_to(np.einsum("ij,ab->iajb", In, ID2), X.shape[:-2] + (n, 2, n, 2)).copy()
    H += np.einsum("ij,...ab->...iajb", In, adjG)
    H += 2.0 * np.einsum("...ia,...jb->...iajb", X, X)
    H -= np.einsum("...ja,...ib->...iajb", X, X)
    rows = X @ np.swapaxes(X, -1, -2)  # X_i . X_j
    H -= np.einsum("...ij,ab->...iajb", rows, ID2)
    H = H / a1[..., None, None, None, None]
    H -= np.einsum("...ia,...jb->...iajb", P, P) / (a1 ** 3)[..., None, None, None, None]
    return H


def field_A(X) -> np.ndarray:
    """A(X) = D(area)(X) J."""
    return area_gradient(X) @ J


def field_B(X) -> np.ndarray:
    """B(X) = (X^T X J - (1 + |X|^2) J) / area(X)."""
    X = as_gradient(X)
    G = gram(X)
    tr = G[..., 0, 0] + G[..., 1, 1]
    num = G @ J - (1.0 + tr)[..., None, None] * J
    return num / area_density(X)[..., None, None]


def field_B_explicit(X) -> np.ndarray:
    """B(X) from the entrywise formula ((-(X1,X2), -1-|X2|^2), (1+|X1|^2, (X1,X2))) / area."""
    X = as_gradient(X)
    c1, c2 = X[..., 0], X[..., 1]
    s11 = np.sum(c1 * c1, axis=-1)
    s22 = np.sum(c2 * c2, axis=-1)
    s12 = np.sum(c1 * c2, axis=-1)
    out = np.empty(X.shape[:-2] + (2, 2))
    out[..., 0, 0] = -s12
    out[..., 0, 1] = -1.0 - s22
    out[..., 1, 0] = 1.0 + s11
    out[..., 1, 1] = s12
    return out / area_density(X)[..., None, None]


@dataclass(frozen=True)
class BCoefficients:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        if abs(self.alpha * self.beta - self.gamma ** 2 - 1.0) > 1e-10 * (1 + self.alpha * self.beta):
            raise ValueError("alpha*beta - gamma^2 must equal 1")

    def matrix(self) -> np.ndarray:
        return np.array([[-self.gamma, -self.alpha], [self.beta, self.gamma]])


def b_coeffs_array(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised (alpha, beta, gamma) = (-B12, B21, -B11)."""
    B = field_B(X)
    return -B[..., 0, 1], B[..., 1, 0], -B[..., 0, 0]


def b_coeffs(X) -> BCoefficients:
    X = as_gradient(X)
    if X.ndim != 2:
        raise ValueError("b_coeffs takes a single matrix; use b_coeffs_array for stacks")
    al, be, ga = b_coeffs_array(X)
    return BCoefficients(float(al), float(be), float(ga))


def b_from_coeffs(alpha, beta, gamma) -> np.ndarray:
    alpha, beta, gamma = np.broadcast_arrays(alpha, beta, gamma)
    out = np.empty(np.shape(alpha) + (2, 2))
    out[..., 0, 0] = -gamma
    out[..., 0, 1] = -alpha
    out[..., 1, 0] = beta
    out[..., 1, 1] = gamma
    return out


# -- energy densities -------------------------------------------------------

def _fd_hessian(grad_fn, X, step=1e-4):
    X = np.asarray(X, dtype=float)
    n = X.shape[-2]
    out = np.empty(X.shape[:-2] + (n, 2, n, 2))
    for j in range(n):
        for b in range(2):
            E = np.zeros((n, 2))
            E[j, b] = step
            out[..., :, :, j, b] = (grad_fn(X + E) - grad_fn(X - E)) / (2 * step)
    return 0.5 * (out + np.einsum("...iajb->...jbia", out))


@dataclass(frozen=True)
class EnergyDensity:
    """A C^2 density on n x 2 matrices with vectorised value and gradient.

    ``hessian_fn`` may be omitted; it is then synthesised by central
    differences of the gradient (step 1e-4) and ``hessian_source`` says so.
    """

    value_fn: Callable[[np.ndarray], np.ndarray]
    gradient_fn: Callable[[np.ndarray], np.ndarray]
    hessian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    smoothness_order: int = 2
    name: str = "f"
    fd_step: float = 1e-4
    hessian_source: str = field(init=False, default="analytic")

    def __post_init__(self):
        if self.smoothness_order < 2:
            raise ValueError("smoothness_order must be >= 2")
        object.__setattr__(self, "hessian_source", "analytic" if self.hessian_fn else "finite-difference")

    def __call__(self, X):
        return self.value_fn(np.asarray(X, dtype=float))

    def gradient(self, X):
        return self.gradient_fn(np.asarray(X, dtype=float))

    def hessian(self, X):
        X = np.asarray(X, dtype=float)
        if self.hessian_fn is not None:
            return self.hessian_fn(X)
        return _fd_hessian(self.gradient_fn, X, self.fd_step)

    def __add__(self, other: "EnergyDensity") -> "EnergyDensity":
        hess = None
        if self.hessian_fn is not None and other.hessian_fn is not None:
            def hess(X, f=self, g=other):
                return f.hessian_fn(X) + g.hessian_fn(X)
        return EnergyDensity(
            value_fn=lambda X, f=self, g=other: f.value_fn(X) + g.value_fn(X),
            gradient_fn=lambda X, f=self, g=other: f.gradient_fn(X) + g.gradient_fn(X),
            hessian_fn=hess,
            smoothness_order=min(self.smoothness_order, other.smoothness_order),
            name=f"{self.name} + {other.name}",
        )


AREA = EnergyDensity(area_density, area_gradient, area_hessian, smoothness_order=10**6, name="area")


def quadratic(eps: float) -> EnergyDensity:
    """eps * |X|^2."""
    def hess(X):
        X = np.asarray(X)
        n = X.shape[-2]
        H = 2.0 * eps * np.einsum("ij,ab->iajb", np.eye(n), ID2)
        return np.broadcast_to(H, X.shape[:-2] + H.shape).copy()

    return EnergyDensity(
        value_fn=lambda X: eps * np.sum(np.asarray(X) ** 2, axis=(-2, -1)),
        gradient_fn=lambda X: 2.0 * eps * np.asarray(X, dtype=float),
        hessian_fn=hess,
        smoothness_order=10**6,
        name=f"{eps:g}|X|^2",
    )


def constant(c: float) -> EnergyDensity:
    def hess(X):
        X = np.asarray(X)
        n = X.shape[-2]
        return np.zeros(X.shape[:-2] + (n, 2, n, 2))

    return EnergyDensity(
        value_fn=lambda X: np.full(np.shape(X)[:-2], float(c)),
        gradient_fn=lambda X: np.zeros(np.shape(X)),
        hessian_fn=hess,
        smoothness_order=10**6,
        name=f"{c:g}",
    )


def area_plus_quadratic(eps: float) -> EnergyDensity:
    return AREA + quadratic(eps)


def field_A_f(f: EnergyDensity, X) -> np.ndarray:
    return f.gradient(X) @ J


def field_B_f(f: EnergyDensity, X) -> np.ndarray:
    X = as_gradient(X)
    return np.swapaxes(X, -1, -2) @ f.gradient(X) @ J - np.asarray(f(X))[..., None, None] * J


# -- lifting ------------------------------------------------------------------

@dataclass(frozen=True)
class LiftedGradient:
    """Stacked (2n+2) x 2 matrix (X; A(X); B(X))."""

    x_block: np.ndarray
    a_block: np.ndarray
    b_block: np.ndarray

    def __post_init__(self):
        for name in ("x_block", "a_block", "b_block"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.x_block.shape != self.a_block.shape or self.b_block.shape != (2, 2):
            raise ValueError("inconsistent block shapes")

    @property
    def n(self) -> int:
        return self.x_block.shape[0]

    def stacked(self) -> np.ndarray:
        return np.vstack([self.x_block, self.a_block, self.b_block])

    @classmethod
    def from_stacked(cls, L) -> "LiftedGradient":
        L = np.asarray(L, dtype=float)
        n = (L.shape[0] - 2) // 2
        if L.shape != (2 * n + 2, 2) or n < 1:
            raise ValueError(f"expected shape (2n+2, 2), got {L.shape}")
        return cls(L[:n], L[n:2 * n], L[2 * n:])

    def to_json(self) -> dict:
        return {"n": self.n, "rows": self.stacked().tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "LiftedGradient":
        L = cls.from_stacked(np.array(obj["rows"], dtype=float))
        if L.n != obj["n"]:
            raise ValueError("n field does not match the row count")
        return L


def gradient_to_json(X) -> dict:
    X = as_gradient(X)
    return {"n": X.shape[0], "rows": X.tolist()}


def gradient_from_json(obj: dict) -> np.ndarray:
    X = as_gradient(np.array(obj["rows"], dtype=float).reshape(-1, 2))
    if X.shape[0] != obj["n"]:
        raise ValueError("n field does not match the row count")
    return X


def lift_array(X) -> np.ndarray:
    """Vectorised lift: (..., n, 2) -> (..., 2n+2, 2)."""
    X = as_gradient(X)
    return np.concatenate([X, field_A(X), field_B(X)], axis=-2)


def lift_f_array(X, f: EnergyDensity) -> np.ndarray:
    X = as_gradient(X)
    return np.concatenate([X, field_A_f(f, X), field_B_f(f, X)], axis=-2)


def lift(X) -> LiftedGradient:
    X = as_gradient(X)
    return LiftedGradient(X, field_A(X), field_B(X))


def lift_f(X, f: EnergyDensity) -> LiftedGradient:
    X = as_gradient(X)
    return LiftedGradient(X, field_A_f(f, X), field_B_f(f, X))


def lift_jacobian(X) -> np.ndarray:
    """Derivative of ``lift_array`` as an array (..., 2n+2, 2, n, 2)."""
    X = as_gradient(X)
    n = X.shape[-2]
    shape = X.shape[:-2]
    H = area_hessian(X)
    P = area_gradient(X)
    out = np.zeros(shape + (2 * n + 2, 2, n, 2))
    out[..., :n, :, :, :] = np.broadcast_to(np.einsum("ij,ab->iajb", np.eye(n), ID2), shape + (n, 2, n, 2))
    # dA[H] = D^2 area[H] J
    out[..., n:2 * n, :, :, :] = np.einsum("...iajb,ac->...icjb", H, J)
    # dB[E] = (E^T P + X^T D^2area[E]) J - <P, E> J
    dXtP = np.zeros(shape + (2, 2, n, 2))
    for b in range(2):
        # E = e_j e_b^T: row b of E^T P is P_j
        dXtP[..., b, :, :, b] = np.swapaxes(P, -1, -2)
    dXtP += np.einsum("...ia,...icjb->...acjb", X, H)
    dB = np.einsum("...acjb,cd->...adjb", dXtP, J)
    dB -= np.einsum("...jb,ad->...adjb", P, J)
    out[..., 2 * n:, :, :, :] = dB
    return out


# -- distance to the constraint set --------------------------------------------

@dataclass(frozen=True)
class DistanceResult:
    value: np.ndarray
    minimizer: np.ndarray
    converged: np.ndarray

    def to_json(self) -> dict:
        return {
            "value": np.asarray(self.value).tolist(),
            "minimizer": np.asarray(self.minimizer).tolist(),
            "converged": np.asarray(self.converged).tolist(),
        }


def _lm_minimize(L, X0, max_iter=200, gtol=1e-13):
    """Batched Levenberg-Marquardt for min_X |L - lift(X)|^2.

    Works on the flattened batch and only iterates the entries that have
    not yet met the stopping test.
    """
    batch = X0.shape[:-2]
    n = X0.shape[-2]
    m = 2 * n
    X = X0.reshape((-1, n, 2)).copy()
    Lf = L.reshape((-1,) + L.shape[-2:])
    N = X.shape[0]
    r = (lift_array(X) - Lf).reshape(N, -1)
    cost = np.sum(r * r, axis=-1)
    lam = np.full(N, 1e-3)
    done = cost == 0.0
    eye = np.eye(m)
    for _ in range(max_iter):
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        Xa, ra, ca, la = X[idx], r[idx], cost[idx], lam[idx]
        Jm = lift_jacobian(Xa).reshape(idx.size, -1, m)
        g = np.einsum("ikm,ik->im", Jm, ra)
        conv = np.sqrt(np.sum(g * g, axis=-1)) <= gtol * (1.0 + np.sqrt(ca))
        JtJ = np.einsum("ikm,ikl->iml", Jm, Jm)
        diag = np.einsum("imm->im", JtJ)
        A = JtJ + (la[:, None] * (diag + 1e-12))[:, :, None] * eye
        step = -np.linalg.solve(A, g[..., None])[..., 0]
        Xn = Xa + step.reshape(idx.size, n, 2)
        rn = (lift_array(Xn) - Lf[idx]).reshape(idx.size, -1)
        cn = np.sum(rn * rn, axis=-1)
        accept = (cn < ca) & ~conv
        X[idx] = np.where(accept[:, None, None], Xn, Xa)
        r[idx] = np.where(accept[:, None], rn, ra)
        small = np.sqrt(np.sum(step * step, axis=-1)) <= 1e-15 * (1.0 + np.sqrt(np.sum(Xa * Xa, axis=(-2, -1))))
        # a relative cost decrease below 1e-15 is as good as converged
        stalled = accept & (ca - cn <= 1e-15 * ca)
        done[idx] = conv | (~accept & small) | stalled | (cn == 0.0)
        cost[idx] = np.where(accept, cn, ca)
        lam[idx] = np.where(accept, np.maximum(la / 3.0, 1e-12), np.minimum(la * 4.0, 1e12))
    return X.reshape(batch + (n, 2)), np.sqrt(cost).reshape(batch), done.reshape(batch)


def dist_to_CA(L, starts: int = 5, seed: int = 0, max_iter: int = 200) -> DistanceResult:
    """Upper bound on dist(L, C_A) by multi-start local minimisation.

    ``L`` has shape (..., 2n+2, 2).  The first start is L's x-block; the
    remaining ``starts - 1`` are seeded random perturbations of it.  The value
    returned is always |L - lift(X*)| for the best X* found, hence a feasible
    upper bound; ``converged`` reports whether the best start met the
    first-order stopping test.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim < 2 or L.shape[-1] != 2 or (L.shape[-2] - 2) % 2 or L.shape[-2] < 4:
        raise ValueError(f"expected shape (..., 2n+2, 2), got {L.shape}")
    n = (L.shape[-2] - 2) // 2
    rng = np.random.default_rng(seed)
    seed_x = L[..., :n, :]
    scale = 0.5 * (1.0 + frob(seed_x))
    best_val = best_X = best_conv = None
    for s in range(starts):
        if s == 0:
            X0 = seed_x.copy()
        else:
            X0 = seed_x + scale[..., None, None] * rng.standard_normal(seed_x.shape)
        X, val, conv = _lm_minimize(L, X0, max_iter=max_iter)
        if best_val is None:
            best_val, best_X, best_conv = val, X, conv
        else:
            better = val < best_val
            best_val = np.where(better, val, best_val)
            best_X = np.where(better[..., None, None], X, best_X)
            best_conv = np.where(better, conv, best_conv)
    return DistanceResult(best_val, best_X, best_conv)
