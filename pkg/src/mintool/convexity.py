"""Legendre-Hadamard machinery: second variations along rank-one lines,
the closed-form gap for the area density, and C^2 distances to the area."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .area import AREA, EnergyDensity, area_density, cof, frob, inner, subminor_dets, subminor_pairs
from .campaign import SCHEMA_VERSION, _jsonable, ball_samples, chunked_map


class NumericalInstabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class RankOneDirection:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 1 or b.shape != (2,):
            raise ValueError("a must be a vector in R^n and b a vector in R^2")
        object.__setattr__(self, "a", a / np.linalg.norm(a))
        object.__setattr__(self, "b", b / np.linalg.norm(b))

    @property
    def matrix(self) -> np.ndarray:
        return np.outer(self.a, self.b)

    @classmethod
    def random(cls, rng: np.random.Generator, n: int) -> "RankOneDirection":
        return cls(rng.standard_normal(n), rng.standard_normal(2))


def rank_one_samples(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """Unit-norm a (x) b with a, b uniform on their spheres; shape (count, n, 2)."""
    a = rng.standard_normal((count, n))
    b = rng.standard_normal((count, 2))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    return a[:, :, None] * b[:, None, :]


def is_rank_one(Y, tol: float = 1e-12) -> np.ndarray:
    s = np.linalg.svd(np.asarray(Y, dtype=float), compute_uv=False)
    if s.shape[-1] == 1:
        return s[..., 0] > 0
    return (s[..., -1] <= tol * np.maximum(s[..., 0], 1.0)) & (s[..., 0] > 0)


def _direction_matrix(direction) -> np.ndarray:
    return direction.matrix if isinstance(direction, RankOneDirection) else np.asarray(direction, dtype=float)


# -- second variations -------------------------------------------------------------

def second_variation(f: EnergyDensity, X, Y, steps=(1e-3, 1e-4), rtol: float = 1e-4) -> np.ndarray:
    """D^2 f(X)[Y, Y].

    Uses the analytic Hessian when ``f`` has one; otherwise central second
    differences at both ``steps``, which must agree to ``rtol``.
    """
    X = np.asarray(X, dtype=float)
    Y = _direction_matrix(Y)
    if f.hessian_fn is not None:
        return np.einsum("...ia,...iajb,...jb->...", Y, f.hessian_fn(X), Y)
    f0 = f(X)
    est = []
    for h in steps:
        est.append((f(X + h * Y) - 2.0 * f0 + f(X - h * Y)) / h ** 2)
    coarse, fine = est
    scale = np.maximum(np.abs(fine), 1e-8)
    if np.any(np.abs(coarse - fine) > rtol * scale + 1e-6):
        raise NumericalInstabilityError("finite-difference second variations disagree between steps")
    return fine


def _s_g_terms(X, Y):
    """Pieces of g(t) = area(X + tY) for rank-one Y: (g0, s0, s1, A, B, <X,Y>, det(X^T X))."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = X.shape[-2]
    dx = subminor_dets(X)
    if n >= 2:
        pairs = subminor_pairs(n)
        ia = np.array([p[0] for p in pairs])
        ib = np.array([p[1] for p in pairs])
        Xs = np.stack([X[..., ia, :], X[..., ib, :]], axis=-2)  # (..., pairs, 2, 2)
        Ys = np.stack([Y[..., ia, :], Y[..., ib, :]], axis=-2)
        lin = np.sum(Xs * np.swapaxes(cof(Ys), -1, -2), axis=(-2, -1))  # <X^ab, cof^T(Y^ab)>
    else:
        lin = np.zeros(X.shape[:-2] + (0,))
    xy = inner(X, Y)
    detG = np.sum(dx * dx, axis=-1)
    A = np.sum(lin * lin, axis=-1)
    B = np.sum(dx * lin, axis=-1)
    g0 = area_density(X)
    s0 = xy + B
    s1 = inner(Y, Y) + A
    return g0, s0, s1, A, B, xy, detG


def area_second_variation_closed_form(X, Y) -> np.ndarray:
    """g''(0) = (s'(0) g(0)^2 - s(0)^2) / g(0)^3 for rank-one Y."""
    g0, s0, s1, *_ = _s_g_terms(X, _direction_matrix(Y))
    return (s1 * g0 ** 2 - s0 ** 2) / g0 ** 3


def lh_bracket_terms(X, Y) -> dict[str, np.ndarray]:
    """The three nonnegative brackets of the gap expansion for unit rank-one Y."""
    _, _, _, A, B, xy, detG = _s_g_terms(X, _direction_matrix(Y))
    nx2 = inner(X, X)
    return {
        "cauchy_schwarz": nx2 - xy ** 2,
        "determinant": A * detG - B ** 2,
        "young": detG + A * nx2 - 2.0 * xy * B,
        "A": A,
    }


def lh_gap_area(X, direction) -> np.ndarray:
    """s'(0) g(0)^2 - s(0)^2 - 1 for a unit rank-one direction (nonnegative)."""
    Y = _direction_matrix(direction)
    if not np.all(is_rank_one(Y, 1e-10)):
        raise ValueError("direction is not rank one")
    if not np.allclose(frob(Y), 1.0, atol=1e-10):
        raise ValueError("direction must have unit norm")
    g0, s0, s1, *_ = _s_g_terms(X, Y)
    return s1 * g0 ** 2 - s0 ** 2 - 1.0


@dataclass
class LHReport:
    region_radius: float
    tau: float
    worst_X: np.ndarray
    worst_dir: np.ndarray
    samples: int
    density: str = "area"
    flagged: bool = False

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "region_radius": self.region_radius,
            "tau": self.tau,
            "worst_X": _jsonable(self.worst_X),
            "worst_dir": _jsonable(self.worst_dir),
            "samples": self.samples,
            "density": self.density,
            "flagged": self.flagged,
        }


def _lh_campaign(f: EnergyDensity, R: float, n: int, samples: int, seed: int) -> LHReport:
    rng = np.random.default_rng(seed)
    X = ball_samples(rng, samples, n, 1.5 * R)
    Y = rank_one_samples(rng, samples, n)
    vals = np.concatenate(chunked_map(lambda sl: second_variation(f, X[sl], Y[sl]), samples, chunk=5000))
    i = int(np.argmin(vals))
    return LHReport(1.5 * R, float(vals[i]), X[i], Y[i], samples, f.name, bool(vals[i] <= 0))


def tau_estimate(R: float, n: int = 2, samples: int = 20_000, seed: int = 0) -> LHReport:
    """Empirical LH constant of the area over B_{3R/2} x unit rank-one directions."""
    if R <= 0:
        raise ValueError("R must be positive")
    return _lh_campaign(AREA, R, n, samples, seed)


def perturbed_lh_check(f: EnergyDensity, R: float, n: int = 2, samples: int = 20_000, seed: int = 0) -> LHReport:
    """Same campaign for a general density; ``flagged`` when tau' <= 0."""
    return _lh_campaign(f, R, n, samples, seed)


def lh_gap_campaign(samples: int = 100_000, n_max: int = 4, R: float = 10.0, seed: int = 0) -> dict:
    """Minimum of the gap and of each bracket over random (X, direction), n <= n_max.

    Raw minima are reported together with minima scaled by 1 + |X|^6 (the
    brackets are degree-six polynomials, so roundoff grows like |X|^6).
    """
    rng = np.random.default_rng(seed)
    ns = 1 + np.arange(samples) % n_max
    keys = ("gap", "cauchy_schwarz", "determinant", "young")
    raw = dict.fromkeys(keys, np.inf)
    scaled = dict.fromkeys(keys, np.inf)
    witness = None
    for n in range(1, n_max + 1):
        cnt = int(np.sum(ns == n))
        X = ball_samples(rng, cnt, n, R)
        Y = rank_one_samples(rng, cnt, n)
        vals = {"gap": lh_gap_area(X, Y), **lh_bracket_terms(X, Y)}
        scale = 1.0 + frob(X) ** 6
        i = int(np.argmin(vals["gap"]))
        if vals["gap"][i] < raw["gap"]:
            witness = {"n": n, "X": X[i], "Y": Y[i]}
        for key in keys:
            raw[key] = min(raw[key], float(np.min(vals[key])))
            scaled[key] = min(scaled[key], float(np.min(vals[key] / scale)))
    return {"min": raw, "min_scaled": scaled, "witness": witness, "samples": samples}


# -- rank-one convexity along lines -------------------------------------------------

def mu_rank_one_test(f: EnergyDensity, X, direction, mu: float, t_grid: Sequence[float], tol: float = 1e-10) -> bool:
    """Uniform convexity of t -> f(X + tY) on every grid triple a < c < b.

    ``mu`` is normalised as a Legendre-Hadamard constant (phi'' >= mu), i.e. the
    checked inequality is phi(c) <= s phi(a) + (1-s) phi(b) - s(1-s)(mu/2)(b-a)^2
    with c = s a + (1-s) b.
    """
    t = np.sort(np.asarray(t_grid, dtype=float))
    if t.size < 3 or not np.all(np.isfinite(t)):
        raise ValueError("t_grid needs at least three finite points")
    X = np.asarray(X, dtype=float)
    Y = _direction_matrix(direction)
    phi = np.asarray(f(X[None] + t[:, None, None] * Y[None]), dtype=float)
    ia, ic, ib = np.array(list(itertools.combinations(range(t.size), 3))).T
    a, c, b = t[ia], t[ic], t[ib]
    s = (b - c) / (b - a)
    rhs = s * phi[ia] + (1 - s) * phi[ib] - s * (1 - s) * 0.5 * mu * (b - a) ** 2
    scale = 1.0 + np.abs(phi[ia]) + np.abs(phi[ib])
    return bool(np.all(phi[ic] <= rhs + tol * scale))


# -- C^2 distance -------------------------------------------------------------------

def _grid_in_ball(n: int, radius: float, step: float) -> np.ndarray:
    m = int(np.floor(radius / step + 1e-9))
    axis = step * np.arange(-m, m + 1)
    pts = np.stack(np.meshgrid(*([axis] * (2 * n)), indexing="ij"), axis=-1).reshape(-1, n, 2)
    return pts[frob(pts) <= radius * (1 + 1e-12)]


def c2_distance(f: EnergyDensity, R: float, grid_step: float, n: int = 1, g: EnergyDensity = AREA) -> float:
    """max over a grid of B_{2R} of |f-g| + |Df-Dg| + |D^2 f - D^2 g|_op.

    The operator norm is the spectral norm of the Hessian difference as a
    symmetric form on n x 2 matrices.  A grid maximum only bounds the
    supremum from below.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    X = _grid_in_ball(n, 2.0 * R, grid_step)
    d0 = np.abs(np.asarray(f(X)) - np.asarray(g(X)))
    d1 = frob(f.gradient(X) - g.gradient(X))
    H = (f.hessian(X) - g.hessian(X)).reshape(len(X), 2 * n, 2 * n)
    H = 0.5 * (H + np.swapaxes(H, -1, -2))
    d2 = np.max(np.abs(np.linalg.eigvalsh(H)), axis=-1)
    return float(np.max(d0 + d1 + d2))
