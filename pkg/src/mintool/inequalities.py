"""Sampling certificates for the growth bounds, determinant sign bounds,
the monotonicity inequality and the determinant identities.

Every campaign is deterministic in its seed and keeps the worst witness.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .area import (
    AREA,
    J,
    EnergyDensity,
    area_density,
    b_coeffs_array,
    cof,
    det2,
    field_A,
    field_A_f,
    field_B,
    field_B_f,
    frob,
    inner,
    subminor_dets,
)
from .campaign import (
    ConstantEstimate,
    DomainError,
    InequalityReport,
    ball_samples,
    chunked_map,
    pair_samples,
)

SQRT2 = math.sqrt(2.0)
MAIN_C = 4.0
DELTA_SAFETY = 0.9
K_SLACK = 1e-4


# -- identities -------------------------------------------------------------------

def cauchy_binet_residual(X) -> np.ndarray:
    """sum det(X^{ab})^2 - det(X^T X)."""
    X = np.asarray(X, dtype=float)
    G = np.swapaxes(X, -1, -2) @ X
    return np.sum(subminor_dets(X) ** 2, axis=-1) - det2(G)


def pair_det_identity(X, Y) -> np.ndarray:
    """<X, Y J> + sum_i det(X_i; Y_i) for m x 2 matrices (zero identically)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape or X.shape[-1] != 2:
        raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
    rowdets = X[..., 0] * Y[..., 1] - X[..., 1] * Y[..., 0]
    return inner(X, Y @ J) + np.sum(rowdets, axis=-1)


def det_sum_identity(M1, M2) -> np.ndarray:
    """det(M1 + M2) - det(M1) - det(M2) - <M1, cof(M2)^T>."""
    M1 = np.asarray(M1, dtype=float)
    M2 = np.asarray(M2, dtype=float)
    if M1.shape != M2.shape or M1.shape[-2:] != (2, 2):
        raise ValueError(f"shape mismatch: {M1.shape} vs {M2.shape}")
    return det2(M1 + M2) - det2(M1) - det2(M2) - inner(M1, np.swapaxes(cof(M2), -1, -2))


def tab_coefficients(n: int) -> dict[tuple[int, int], float]:
    """Nonzero t_ab (zero-based rows of a (2n+2) x 2 stack): pair row i with row n+i."""
    return {(i, n + i): -1.0 for i in range(n)}


def tab_pairing(Lam, Gam) -> np.ndarray:
    """sum_ab t_ab det((Lam - Gam)^{ab}) with ``tab_coefficients``.

    Equals <(Lam_2 - Gam_2) J, Lam_1 - Gam_1>; for lifted pairs this is
    <(A(X) - A(Y)) J, X - Y> = -<DA(X) - DA(Y), X - Y>.
    """
    Lam = np.asarray(Lam, dtype=float)
    Gam = np.asarray(Gam, dtype=float)
    if Lam.shape != Gam.shape or Lam.shape[-1] != 2 or (Lam.shape[-2] - 2) % 2:
        raise ValueError(f"shape mismatch: {Lam.shape} vs {Gam.shape}")
    n = (Lam.shape[-2] - 2) // 2
    D = Lam - Gam
    total = np.zeros(D.shape[:-2])
    for (a, b), t in tab_coefficients(n).items():
        total = total + t * (D[..., a, 0] * D[..., b, 1] - D[..., a, 1] * D[..., b, 0])
    return total


def monotone_term(X, Y) -> np.ndarray:
    """-<(A(X) - A(Y)) J, X - Y>, computed directly from the A field."""
    return -inner((field_A(X) - field_A(Y)) @ J, np.asarray(X) - np.asarray(Y))


# -- growth bounds and sign structure ----------------------------------------------

def growth_bound_gaps(X) -> dict[str, np.ndarray]:
    """Slack in |A| <= 2|X| and (1+|X|^2)/(2 area) <= |B| <= 2(1+|X|); >= 0 means satisfied."""
    X = np.asarray(X, dtype=float)
    nx = frob(X)
    nA = frob(field_A(X))
    nB = frob(field_B(X))
    return {
        "A_upper": 2 * nx - nA,
        "B_lower": nB - (1 + nx ** 2) / (2 * area_density(X)),
        "B_upper": 2 * (1 + nx) - nB,
    }


def b_property_residuals(X) -> dict[str, np.ndarray]:
    B = field_B(X)
    return {
        "trace": B[..., 0, 0] + B[..., 1, 1],
        "det_minus_one": det2(B) - 1.0,
        "B12": B[..., 0, 1],
        "B21": B[..., 1, 0],
    }


# -- monotonicity inequality ---------------------------------------------------------

def delta_of_k(k):
    """Uniform lower constant of the quadratic form beta a^2 - 2|gamma| a b + alpha b^2.

    Valid whenever |B(X)| <= k; needs k >= sqrt(2) since every B has |B| >= sqrt(2).
    """
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr < SQRT2 * (1 - K_SLACK)) or np.any(~np.isfinite(k_arr)):
        raise DomainError(f"k must be >= sqrt(2), got {k}")
    s = np.maximum(SQRT2 * k_arr, 2.0)
    d = DELTA_SAFETY * (s - np.sqrt(s * s - 4.0)) / 2.0
    return float(d) if np.ndim(d) == 0 else d


def poll_form_min_eigenvalue(alpha, beta, gamma, delta) -> np.ndarray:
    """Smallest eigenvalue of ((beta - delta, -|gamma|), (-|gamma|, alpha - delta))."""
    a = np.asarray(beta) - delta
    c = np.asarray(alpha) - delta
    g = np.abs(gamma)
    return 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + g * g)


def main_inequality_gap(X, Y, k=None, C: float = MAIN_C) -> np.ndarray:
    """LHS - delta(k)|X - Y|^2 of the monotonicity inequality (n-free form).

    With ``k=None`` each pair uses its own tight k = max(|B(X)|, |B(Y)|).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    nBX = frob(field_B(X))
    nBY = frob(field_B(Y))
    kk = np.maximum(nBX, nBY)
    if k is not None:
        bad = kk > k * (1 + 1e-12)
        if np.any(bad):
            which = "X" if np.any(nBX > k * (1 + 1e-12)) else "Y"
            raise DomainError(f"precondition |B({which})| <= k={k} violated (|B| = {float(np.max(kk)):.6g})")
        kk = np.full_like(kk, float(k))
    delta = delta_of_k(kk)
    D = X - Y
    dB = frob(field_B(X) - field_B(Y))
    nd = frob(D)
    lhs = monotone_term(X, Y) + C * dB * np.minimum(frob(X), frob(Y)) * nd
    return lhs - delta * nd ** 2


def main_inequality_gap_with_n(X, Y, C1: float = 2.0) -> np.ndarray:
    """The weaker bound with the row-count factor: LHS - (delta|d|^2 - n C1 |dB||Y||d|)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = X.shape[-2]
    kk = np.maximum(frob(field_B(X)), frob(field_B(Y)))
    delta = delta_of_k(kk)
    nd = frob(X - Y)
    dB = frob(field_B(X) - field_B(Y))
    return monotone_term(X, Y) - (delta * nd ** 2 - n * C1 * dB * np.minimum(frob(X), frob(Y)) * nd)


def main_campaign(
    samples: int = 100_000,
    n_values=(1, 2, 3),
    R: float = 5.0,
    C: float = MAIN_C,
    k: Optional[float] = None,
    seed: int = 0,
    tolerance: float = 1e-9,
) -> InequalityReport:
    """Sample pairs in B_R for each n; with a fixed ``k`` only pairs meeting |B| <= k count."""
    rng = np.random.default_rng(seed)
    per_n = [samples // len(n_values) + (1 if i < samples % len(n_values) else 0) for i in range(len(n_values))]
    worst = (math.inf, None)
    worst_n_form = math.inf
    used = 0
    for n, cnt in zip(n_values, per_n):
        X, Y = pair_samples(rng, cnt, n, R)
        if k is not None:
            keep = np.maximum(frob(field_B(X)), frob(field_B(Y))) <= k
            X, Y = X[keep], Y[keep]
        if len(X) == 0:
            continue

        def run(sl, X=X, Y=Y):
            return main_inequality_gap(X[sl], Y[sl], k=k, C=C)

        gaps = np.concatenate(chunked_map(run, len(X)))
        used += len(X)
        i = int(np.argmin(gaps))
        if gaps[i] < worst[0]:
            worst = (float(gaps[i]), {"n": n, "X": X[i], "Y": Y[i]})
        worst_n_form = min(worst_n_form, float(np.min(main_inequality_gap_with_n(X, Y))))
    return InequalityReport(
        name="main",
        domain_description=f"|X|,|Y| <= {R}, n in {list(n_values)}, C = {C}, k = {'per-pair' if k is None else k}",
        n_samples=used,
        min_gap=worst[0],
        tolerance=tolerance,
        witness=worst[1],
        extra={"min_gap_with_n_factor": worst_n_form},
    )


# -- determinant sign bound ---------------------------------------------------------

def mu_ratio(X, Y, degenerate: float = 1e-12) -> np.ndarray:
    """-det(B(X) - B(Y)) / |B(X) - B(Y)|^2, NaN where |dB| <= ``degenerate``."""
    dB = field_B(X) - field_B(Y)
    nrm2 = np.sum(dB * dB, axis=(-2, -1))
    out = np.full(nrm2.shape, np.nan)
    ok = nrm2 > degenerate ** 2
    out[ok] = -det2(dB)[ok] / nrm2[ok]
    return out


def mu_estimate(R: float, n: int = 2, samples: int = 100_000, seed: int = 0) -> ConstantEstimate:
    if R <= 0:
        raise DomainError("R must be positive")
    rng = np.random.default_rng(seed)
    X, Y = pair_samples(rng, samples, n, R)
    ratios = np.concatenate(chunked_map(lambda sl: mu_ratio(X[sl], Y[sl]), samples))
    valid = ~np.isnan(ratios)
    if not np.any(valid):
        raise DomainError("all sampled pairs are degenerate")
    idx = np.flatnonzero(valid)
    i = idx[int(np.argmin(ratios[valid]))]
    return ConstantEstimate(
        name="mu(R)",
        parameter=R,
        value=float(ratios[i]),
        method="random-search",
        samples=int(valid.sum()),
        worst_witness={"X": X[i], "Y": Y[i]},
        extra={"n": n, "seed": seed},
    )


def alg_violations(X, Y, mu: float) -> int:
    """Count pairs with det(B(X) - B(Y)) > -mu |B(X) - B(Y)|^2 (beyond 1e-12)."""
    dB = field_B(X) - field_B(Y)
    slack = -det2(dB) - mu * np.sum(dB * dB, axis=(-2, -1))
    return int(np.sum(slack < -1e-12))


# -- perturbative inequality ---------------------------------------------------------

def lambda_constant(
    R: float, n: int = 2, samples: int = 20_000, seed: int = 0, C: float = MAIN_C
) -> ConstantEstimate:
    """lambda(R) = 3 C R / (4 tau mu) with tau chosen so c - 3 C R tau / 4 = c / 2.

    c = delta(k) for k = 2(1 + 3R/2) (the growth bound on B over B_{3R/2}), mu
    is half the sampled mu over B_{3R/2} (a margin against sampling
    overestimate), and the resulting inequality constant is c / 2.
    """
    if R <= 0:
        raise DomainError("R must be positive")
    k = 2.0 * (1.0 + 1.5 * R)
    c = delta_of_k(k)
    mu_est = mu_estimate(1.5 * R, n=n, samples=samples, seed=seed)
    mu = 0.5 * mu_est.value
    tau = 2.0 * c / (3.0 * C * R)
    lam = 3.0 * C * R / (4.0 * tau * mu)
    return ConstantEstimate(
        name="lambda(R)",
        parameter=R,
        value=lam,
        method="random-search",
        samples=mu_est.samples,
        worst_witness=mu_est.worst_witness,
        extra={"k": k, "c": c, "delta": c / 2.0, "mu": mu, "mu_sampled": mu_est.value, "tau_young": tau, "C": C},
    )


def reg_gap(X, Y, lam: float, delta: float) -> np.ndarray:
    dB = field_B(X) - field_B(Y)
    nd2 = np.sum((np.asarray(X) - np.asarray(Y)) ** 2, axis=(-2, -1))
    return monotone_term(X, Y) - lam * det2(dB) - delta * nd2


def reg_inequality_check(
    X, Y, R: float, constants: Optional[ConstantEstimate] = None, tolerance: float = 1e-9
) -> InequalityReport:
    """Evaluate the perturbative inequality on given pairs in B_{3R/2}."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 2:
        X, Y = X[None], Y[None]
    lim = 1.5 * R * (1 + 1e-12)
    if np.any(frob(X) > lim) or np.any(frob(Y) > lim):
        raise DomainError(f"pairs must lie in the ball of radius 3R/2 = {1.5 * R}")
    if constants is None:
        constants = lambda_constant(R, n=X.shape[-2])
    lam, delta = constants.value, constants.extra["delta"]
    gaps = reg_gap(X, Y, lam, delta)
    i = int(np.argmin(gaps))
    return InequalityReport(
        name="reg",
        domain_description=f"|X|,|Y| <= {1.5 * R}, n = {X.shape[-2]}",
        n_samples=len(gaps),
        min_gap=float(gaps[i]),
        tolerance=tolerance,
        witness={"X": X[i], "Y": Y[i]},
        extra={"lambda": lam, "delta": delta, "lambda_term_min": float(np.min(-lam * det2(field_B(X) - field_B(Y))))},
    )


def reg_campaign(R: float = 1.0, n: int = 2, samples: int = 10_000, seed: int = 0) -> InequalityReport:
    consts = lambda_constant(R, n=n, seed=seed)
    rng = np.random.default_rng(seed + 1)
    X, Y = pair_samples(rng, samples, n, 1.5 * R)
    return reg_inequality_check(X, Y, R, constants=consts)


def genf_ratio(f: EnergyDensity, X, Y, lam: float) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    D = X - Y
    first = -inner((field_A_f(f, X) - field_A_f(f, Y)) @ J, D)
    dB = field_B_f(f, X) - field_B_f(f, Y)
    return (first - lam * det2(dB)) / np.sum(D * D, axis=(-2, -1))


def genf_check(
    f: EnergyDensity,
    R: float = 1.0,
    samples: int = 10_000,
    seed: int = 0,
    n: int = 2,
    constants: Optional[ConstantEstimate] = None,
) -> InequalityReport:
    """Empirical c(f, R): the minimum ratio over pairs in B_{3R/2}.

    ``min_gap`` holds c itself with zero tolerance, so ``violated`` means c < 0.
    """
    if f.gradient_fn is None:
        raise ValueError("f has no gradient")
    if constants is None:
        constants = lambda_constant(R, n=n, seed=seed)
    rng = np.random.default_rng(seed + 2)
    X, Y = pair_samples(rng, samples, n, 1.5 * R)
    ratios = np.concatenate(chunked_map(lambda sl: genf_ratio(f, X[sl], Y[sl], constants.value), samples))
    i = int(np.argmin(ratios))
    return InequalityReport(
        name=f"genf[{f.name}]",
        domain_description=f"|X|,|Y| <= {1.5 * R}, n = {n}",
        n_samples=samples,
        min_gap=float(ratios[i]),
        tolerance=0.0,
        witness={"X": X[i], "Y": Y[i]},
        extra={"c": float(ratios[i]), "lambda": constants.value},
    )


def perturbation_threshold(
    R: float = 1.0, n: int = 2, samples: int = 5_000, seed: int = 0, eps_max: float = 1.0, iters: int = 30
) -> ConstantEstimate:
    """Bisection for the largest eps with c(area - eps|X|^2, R) > 0.

    The reported value is the C^2 distance of that density to the area on B_{2R}.
    """
    from .area import quadratic
    from .convexity import c2_distance

    consts = lambda_constant(R, n=n, seed=seed)
    lo, hi = 0.0, eps_max
    if genf_check(AREA + quadratic(-hi), R, samples, seed, n, consts).min_gap > 0:
        lo = hi
    else:
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if genf_check(AREA + quadratic(-mid), R, samples, seed, n, consts).min_gap > 0:
                lo = mid
            else:
                hi = mid
    f = AREA + quadratic(-lo)
    dist = c2_distance(f, R, grid_step=R / 2, n=1)
    return ConstantEstimate(
        name="epsilon(R)",
        parameter=R,
        value=dist,
        method="random-search",
        samples=samples,
        worst_witness={"eps_scale": lo},
        extra={"family": "area - eps |X|^2", "eps_scale": lo},
    )


# -- elliptic coefficient bounds -----------------------------------------------------

def coefficient_matrix(X) -> np.ndarray:
    """M = ((beta, -gamma), (-gamma, alpha)): flux = M grad u^j row by row."""
    al, be, ga = b_coeffs_array(X)
    M = np.empty(np.shape(al) + (2, 2))
    M[..., 0, 0] = be
    M[..., 0, 1] = -ga
    M[..., 1, 0] = -ga
    M[..., 1, 1] = al
    return M


def elliptic_coefficient_bounds(samples, R: Optional[float] = None) -> tuple[ConstantEstimate, ConstantEstimate]:
    X = np.asarray(samples, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.shape[0] == 0:
        raise ValueError("empty sample list")
    if R is not None and np.any(frob(X) > R * (1 + 1e-12)):
        raise DomainError(f"samples must satisfy |X| <= {R}")
    ev = np.linalg.eigvalsh(coefficient_matrix(X))
    i1 = int(np.argmin(ev[:, 0]))
    i2 = int(np.argmax(ev[:, 1]))
    param = float(R) if R is not None else float(np.max(frob(X)))
    c1 = ConstantEstimate("c1", param, float(ev[i1, 0]), "random-search", len(X), X[i1])
    c2 = ConstantEstimate("c2", param, float(ev[i2, 1]), "random-search", len(X), X[i2])
    return c1, c2


def elliptic_campaign(R: float = 5.0, n: int = 2, samples: int = 10_000, seed: int = 0):
    rng = np.random.default_rng(seed)
    return elliptic_coefficient_bounds(ball_samples(rng, samples, n, R), R)


