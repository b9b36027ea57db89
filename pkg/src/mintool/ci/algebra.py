"""The subspaces H1 = {((a,b),(b,-a))} and H2 = {((a,-b),(b,a))} and rank-one connections."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..area import J, field_A, field_B

MEMBERSHIP_TOL = 1e-10


def _check_square(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-2:] != (2, 2):
        raise ValueError("expected 2 x 2 matrices")
    return X


def in_H1(X, tol: float = MEMBERSHIP_TOL):
    X = _check_square(X)
    return (np.abs(X[..., 0, 0] + X[..., 1, 1]) <= tol) & (np.abs(X[..., 0, 1] - X[..., 1, 0]) <= tol)


def in_H2(X, tol: float = MEMBERSHIP_TOL):
    X = _check_square(X)
    return (np.abs(X[..., 0, 0] - X[..., 1, 1]) <= tol) & (np.abs(X[..., 0, 1] + X[..., 1, 0]) <= tol)


def h1(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.stack([np.stack([a, b], -1), np.stack([b, -a], -1)], -2)


def h2(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.stack([np.stack([a, -b], -1), np.stack([b, a], -1)], -2)


def project_H1(X) -> np.ndarray:
    X = _check_square(X)
    return h1(0.5 * (X[..., 0, 0] - X[..., 1, 1]), 0.5 * (X[..., 0, 1] + X[..., 1, 0]))


def project_H2(X) -> np.ndarray:
    X = _check_square(X)
    return h2(0.5 * (X[..., 0, 0] + X[..., 1, 1]), 0.5 * (X[..., 1, 0] - X[..., 0, 1]))


def classify(X, tol: float = MEMBERSHIP_TOL) -> str:
    X = np.asarray(X, dtype=float)
    if X.shape != (2, 2):
        return "other"
    if in_H1(X, tol):
        return "H1"
    if in_H2(X, tol):
        return "H2"
    return "other"


@dataclass
class AlgebraReport:
    A_ok: bool
    B_ok: bool
    A_error: float
    B_error: float
    B_value: np.ndarray

    @property
    def ok(self) -> bool:
        return self.A_ok and self.B_ok


def check_lemma_algebra(X, tol: float = 1e-10) -> AlgebraReport:
    """On H1 and H2, field_A(X) = XJ and field_B(X) = -J."""
    X = _check_square(X)
    member = in_H1(X) | in_H2(X)
    if not np.all(member):
        raise ValueError("X must lie in H1 or H2")
    Aerr = np.max(np.abs(field_A(X) - X @ J), axis=(-2, -1))
    Bv = field_B(X)
    Berr = np.max(np.abs(Bv + J), axis=(-2, -1))
    Aerr, Berr = float(np.max(Aerr)), float(np.max(Berr))
    return AlgebraReport(Aerr <= tol, Berr <= tol, Aerr, Berr, Bv)


def algebra_campaign(samples: int = 10_000, bound: float = 10.0, seed: int = 0) -> AlgebraReport:
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(-bound, bound, (2, samples))
    X = np.concatenate([h1(a[: samples // 2], b[: samples // 2]), h2(a[samples // 2:], b[samples // 2:])])
    return check_lemma_algebra(X)


def rank_one_connection(B, C, tol: float = 1e-12):
    """(a, b, scale) with B - C = scale a (x) b, a and b unit; None unless rank(B - C) = 1."""
    D = np.asarray(B, dtype=float) - np.asarray(C, dtype=float)
    if D.ndim != 2:
        raise ValueError("expected matrices")
    U, s, Vt = np.linalg.svd(D)
    if s[0] == 0.0 or (len(s) > 1 and s[1] > tol * s[0]):
        return None
    a, b = U[:, 0], Vt[0]
    # fix the sign so the largest entry of a is positive
    if a[np.argmax(np.abs(a))] < 0:
        a, b = -a, -b
    return a, b, float(s[0])
