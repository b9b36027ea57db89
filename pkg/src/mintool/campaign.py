"""Seeded sampling, report records and chunked campaign execution."""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

SCHEMA_VERSION = 1


class DomainError(ValueError):
    """An input lies outside the domain where an estimate is defined."""


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("MINTOOL_THREADS", "1")))
    except ValueError:
        return 1


def chunked_map(fn: Callable[[slice], Any], total: int, chunk: int = 20000) -> list:
    """Apply ``fn`` to consecutive slices; results come back in slice order."""
    slices = [slice(i, min(i + chunk, total)) for i in range(0, total, chunk)]
    workers = thread_count()
    if workers == 1 or len(slices) == 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, slices))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed separators, so equal inputs give equal bytes."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -- sampling -------------------------------------------------------------------

def stratified_unit(rng: np.random.Generator, count: int) -> np.ndarray:
    """One point in each of ``count`` equal strata of [0, 1), shuffled."""
    u = (np.arange(count) + rng.random(count)) / count
    return rng.permutation(u)


def sphere_directions(rng: np.random.Generator, count: int, shape: tuple) -> np.ndarray:
    Z = rng.standard_normal((count,) + tuple(shape))
    norms = np.sqrt(np.sum(Z.reshape(count, -1) ** 2, axis=1))
    return Z / norms.reshape((count,) + (1,) * len(shape))


def ball_samples(rng: np.random.Generator, count: int, n: int, R: float) -> np.ndarray:
    """Matrices in the closed Frobenius ball of radius R, radius stratified uniformly."""
    r = R * stratified_unit(rng, count)
    return r[:, None, None] * sphere_directions(rng, count, (n, 2))


def pair_samples(
    rng: np.random.Generator,
    count: int,
    n: int,
    R: float,
    near_fraction: float = 0.2,
    near_distances: Sequence[float] = (1e-4, 1e-2),
) -> tuple[np.ndarray, np.ndarray]:
    """Pairs (X, Y) in the ball: independent stratified pairs plus near-diagonal ones.

    Near-diagonal pairs have |X - Y| equal to one of ``near_distances``
    (pulled back into the ball when needed), since the inequalities all
    degenerate as Y -> X.
    """
    n_near = int(round(near_fraction * count))
    n_far = count - n_near
    X = ball_samples(rng, count, n, R)
    Y = np.empty_like(X)
    Y[:n_far] = ball_samples(rng, n_far, n, R)
    if n_near:
        d = np.asarray(near_distances, dtype=float)[np.arange(n_near) % len(near_distances)]
        Xn = X[n_far:]
        Yn = Xn + d[:, None, None] * sphere_directions(rng, n_near, (n, 2))
        norms = np.sqrt(np.sum(Yn ** 2, axis=(1, 2)))
        over = norms > R
        if np.any(over):
            # shrink both so the pair stays inside the ball at the same separation
            shift = (norms[over] - R + 1e-12) / norms[over]
            Xn[over] *= (1 - shift)[:, None, None]
            Yn[over] *= (1 - shift)[:, None, None]
        X[n_far:] = Xn
        Y[n_far:] = Yn
    return X, Y


# -- reports --------------------------------------------------------------------

@dataclass
class InequalityReport:
    name: str
    domain_description: str
    n_samples: int
    min_gap: float
    tolerance: float
    witness: Any
    violated: bool = field(init=False)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.min_gap = float(self.min_gap)
        self.violated = bool(self.min_gap < -self.tolerance)

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **_jsonable(asdict(self))}


METHODS = ("analytic", "grid-search", "random-search")


@dataclass
class ConstantEstimate:
    name: str
    parameter: float
    value: float
    method: str
    samples: int
    worst_witness: Any = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        self.value = float(self.value)

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **_jsonable(asdict(self))}
