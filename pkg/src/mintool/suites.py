"""Verification suites: each returns an InequalityReport whose ``violated`` flag
decides the CLI exit code."""
from __future__ import annotations

import numpy as np

from .area import AREA, frob
from .campaign import InequalityReport, ball_samples
from .convexity import area_second_variation_closed_form, lh_gap_campaign, rank_one_samples, second_variation
from .inequalities import (
    alg_violations,
    b_property_residuals,
    cauchy_binet_residual,
    det_sum_identity,
    growth_bound_gaps,
    main_campaign,
    mu_estimate,
    pair_det_identity,
    reg_campaign,
)


def _mixed_n_samples(rng, samples, n_max, R):
    ns = 1 + np.arange(samples) % n_max
    return [(n, ball_samples(rng, int(np.sum(ns == n)), n, R)) for n in range(1, n_max + 1)]


def identities_suite(samples: int = 10_000, seed: int = 0, tolerance: float = 1e-12) -> InequalityReport:
    """Cauchy-Binet, the row-determinant pairing and the 2 x 2 determinant sum rule, relative residuals."""
    rng = np.random.default_rng(seed)
    worst = {}
    for n, X in _mixed_n_samples(rng, samples, 5, 10.0):
        r = np.abs(cauchy_binet_residual(X)) / (1.0 + frob(X) ** 4)
        worst["cauchy_binet"] = max(worst.get("cauchy_binet", 0.0), float(r.max()))
    for m in range(1, 7):
        cnt = samples // 6 + (1 if m <= samples % 6 else 0)
        X = ball_samples(rng, cnt, m, 10.0)
        Y = ball_samples(rng, cnt, m, 10.0)
        r = np.abs(pair_det_identity(X, Y)) / (1.0 + frob(X) * frob(Y))
        worst["pair_det"] = max(worst.get("pair_det", 0.0), float(r.max()))
    M1 = ball_samples(rng, samples, 2, 10.0)
    M2 = ball_samples(rng, samples, 2, 10.0)
    r = np.abs(det_sum_identity(M1, M2)) / (1.0 + (frob(M1) + frob(M2)) ** 2)
    worst["det_sum"] = float(r.max())
    return InequalityReport("identities", "n <= 5 (Cauchy-Binet), m <= 6 (pairing), 2 x 2 (sum rule); |.| <= 10",
                            samples, -max(worst.values()), tolerance, None, {"max_relative_residual": worst})


def bprops_suite(samples: int = 100_000, seed: int = 0, tolerance: float = 1e-10) -> InequalityReport:
    """tr B = 0, det B = 1 and B12 < 0 < B21."""
    rng = np.random.default_rng(seed)
    worst = {"trace": 0.0, "det_minus_one": 0.0, "B12_max": -np.inf, "B21_min": np.inf}
    wit = None
    for n, X in _mixed_n_samples(rng, samples, 5, 10.0):
        r = b_property_residuals(X)
        worst["trace"] = max(worst["trace"], float(np.abs(r["trace"]).max()))
        worst["det_minus_one"] = max(worst["det_minus_one"], float(np.abs(r["det_minus_one"]).max()))
        if r["B12"].max() > worst["B12_max"]:
            wit = {"n": n, "X": X[int(np.argmax(r["B12"]))]}
        worst["B12_max"] = max(worst["B12_max"], float(r["B12"].max()))
        worst["B21_min"] = min(worst["B21_min"], float(r["B21"].min()))
    gap = min(-worst["trace"], -worst["det_minus_one"])
    # strict signs: report a violation whenever a sign fails, whatever the size
    if worst["B12_max"] >= 0 or worst["B21_min"] <= 0:
        gap = -np.inf
    return InequalityReport("bprops", "n <= 5, |X| <= 10", samples, gap, tolerance, wit, worst)


def bounds_suite(samples: int = 100_000, seed: int = 0, tolerance: float = 1e-10) -> InequalityReport:
    rng = np.random.default_rng(seed)
    mins = {}
    wit, best = None, np.inf
    for n, X in _mixed_n_samples(rng, samples, 5, 10.0):
        for key, g in growth_bound_gaps(X).items():
            mins[key] = min(mins.get(key, np.inf), float(g.min()))
            if g.min() < best:
                best, wit = float(g.min()), {"n": n, "bound": key, "X": X[int(np.argmin(g))]}
    return InequalityReport("bounds", "n <= 5, |X| <= 10", samples, min(mins.values()), tolerance, wit, mins)


def alg_suite(R: float = 1.0, n: int = 2, samples: int = 100_000, seed: int = 0) -> InequalityReport:
    """mu(R) by sampling, then the sign bound with mu/2 on fresh pairs."""
    est = mu_estimate(R, n=n, samples=samples, seed=seed)
    rng = np.random.default_rng(seed + 1)
    from .campaign import pair_samples

    X, Y = pair_samples(rng, samples, n, R)
    bad = alg_violations(X, Y, 0.5 * est.value)
    gap = est.value if bad == 0 else -float(bad)
    return InequalityReport("alg", f"|X|,|Y| <= {R}, n = {n}", samples, gap, 0.0, est.worst_witness,
                            {"mu": est.value, "violations_at_half_mu": bad})


def lh_suite(samples: int = 100_000, R: float = 10.0, seed: int = 0, tolerance: float = 1e-9) -> InequalityReport:
    """Gap and brackets of the rank-one second variation, plus a finite-difference check of g''(0)."""
    res = lh_gap_campaign(samples, 4, R, seed)
    rng = np.random.default_rng(seed + 3)
    X = ball_samples(rng, 2000, 3, 5.0)
    Y = rank_one_samples(rng, 2000, 3)
    exact = area_second_variation_closed_form(X, Y)
    def second_difference(h):
        return (AREA(X + h * Y) - 2 * AREA(X) + AREA(X - h * Y)) / h ** 2

    # Richardson extrapolation of two central second differences
    fd = (4.0 * second_difference(5e-3) - second_difference(1e-2)) / 3.0
    fd_rel = float(np.max(np.abs(fd - exact) / np.maximum(np.abs(exact), 1e-3)))
    min_all = min(res["min"].values())
    return InequalityReport("lh", f"|X| <= {R}, n <= 4, unit rank-one directions", samples, min_all, tolerance,
                            res["witness"], {"min": res["min"], "min_scaled": res["min_scaled"],
                                             "second_variation_fd_relative_error": fd_rel})


def lh_tau_suite(R: float = 2.0, n: int = 2, samples: int = 20_000, seed: int = 0) -> InequalityReport:
    """Positivity of the rank-one second variation of the area over B_{3R/2}."""
    rng = np.random.default_rng(seed)
    X = ball_samples(rng, samples, n, 1.5 * R)
    Y = rank_one_samples(rng, samples, n)
    v = second_variation(AREA, X, Y)
    i = int(np.argmin(v))
    return InequalityReport("lh_tau", f"|X| <= {1.5 * R}, n = {n}", samples, float(v[i]), 0.0,
                            {"X": X[i], "direction": Y[i]}, {"tau": float(v[i])})


def main_suite(samples: int = 100_000, n: int | None = None, k: float | None = None, R: float = 5.0,
               seed: int = 0, C: float = 4.0) -> InequalityReport:
    n_values = (1, 2, 3) if n is None else (n,)
    return main_campaign(samples, n_values, R, C, k, seed)


def reg_suite(R: float = 1.0, n: int = 2, samples: int = 10_000, seed: int = 0) -> InequalityReport:
    return reg_campaign(R, n, samples, seed)
