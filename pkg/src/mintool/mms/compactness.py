"""A constructed sequence U_n = lift(Du*) + eps_n psi_n converging to a lifted
stationary map, with the inclusion residual and gradient distance tracked
per level."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..area import dist_to_CA
from ..campaign import SCHEMA_VERSION, _jsonable
from .fields import DiscreteField, Grid
from .potentials import build_potentials
from .presets import get_preset

PERTURBATION_CENTER = (0.5, 0.5)
PERTURBATION_RADIUS = 0.3
# (center x, center y, radius); the last one sits outside the perturbation
WEIGHTS = ((0.5, 0.5, 0.4), (0.4, 0.55, 0.25), (0.15, 0.15, 0.1))


def _bump_and_grad(X, Y, cx, cy, r):
    rho2 = ((X - cx) ** 2 + (Y - cy) ** 2) / r ** 2
    b = np.zeros_like(X, dtype=float)
    dfac = np.zeros_like(X, dtype=float)
    inside = rho2 < 1
    b[inside] = np.exp(1.0 - 1.0 / (1.0 - rho2[inside]))
    dfac[inside] = -b[inside] / (1.0 - rho2[inside]) ** 2  # d b / d rho2
    return b, dfac * 2 * (X - cx) / r ** 2, dfac * 2 * (Y - cy) / r ** 2


def bump(X, Y, cx, cy, r):
    """Smooth bump with value 1 at the center and support in the open disk."""
    return _bump_and_grad(X, Y, cx, cy, r)[0]


def perturbation(grid: Grid, level: int, components: int) -> np.ndarray:
    """Rotated gradients of a localized oscillation, repeated on each component pair.

    zeta = bump sin(kx) sin(ky) / k^2 with k = 2 pi 2^level, and psi = (-zeta_y, zeta_x),
    which is divergence-free, O(1/k) in size and O(1) in gradient.
    """
    X, Y = grid.coords()
    k = 2.0 * np.pi * 2.0 ** level
    b, bx, by = _bump_and_grad(X, Y, *PERTURBATION_CENTER, PERTURBATION_RADIUS)
    s, c = np.sin(k * X), np.cos(k * X)
    t, d = np.sin(k * Y), np.cos(k * Y)
    zx = (bx * s * t + b * k * c * t) / k ** 2
    zy = (by * s * t + b * k * s * d) / k ** 2
    pair = np.stack([-zy, zx], axis=-1)
    reps = -(-components // 2)
    return np.concatenate([pair] * reps, axis=-1)[..., :components]


@dataclass
class CompactnessConfig:
    levels: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    eps: tuple[float, ...] | None = None  # default 2^-level
    p: float = 4.0
    p_bar: float = 2.0
    base_mesh: int = 8  # N at level n is base_mesh * 2^n
    preset: str = "scherk"
    starts: int = 1
    seed: int = 0

    def schedule(self) -> list[float]:
        if self.eps is None:
            return [2.0 ** -n for n in self.levels]
        if len(self.eps) != len(self.levels):
            raise ValueError("eps schedule must match levels")
        return [float(e) for e in self.eps]

    def meshes(self) -> list[int]:
        return [self.base_mesh * 2 ** n for n in self.levels]


@dataclass
class CompactnessReport:
    levels: list
    eps: list
    mesh: list
    weighted_residual: list  # per level, one value per weight
    gradient_distance: list  # discrete L^{p_bar} norm of D U_n - D U*
    gradient_p_norm: list  # discrete L^p norm of D U_n (boundedness)
    p: float
    p_bar: float
    weights: list = field(default_factory=lambda: [list(w) for w in WEIGHTS])

    def ratios(self, values) -> list:
        v = np.asarray(values, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (v[:-1] / v[1:]).tolist()

    @property
    def monotone(self) -> bool:
        """Every tracked sequence is non-increasing within 10% slack."""
        seqs = [self.gradient_distance] + [list(col) for col in zip(*self.weighted_residual)]
        return all(b <= 1.1 * a for s in seqs for a, b in zip(s, s[1:]))

    def to_json(self) -> dict:
        d = asdict(self)
        d["residual_ratios"] = [self.ratios(col) for col in zip(*self.weighted_residual)]
        d["distance_ratios"] = self.ratios(self.gradient_distance)
        d["monotone"] = self.monotone
        return {"schema_version": SCHEMA_VERSION, **_jsonable(d)}


def _lifted_solution(grid: Grid, preset) -> DiscreteField:
    u = DiscreteField.from_function(grid, preset)
    v, w, _ = build_potentials(u)
    return u.stack(v, w)


def compactness_experiment(config: CompactnessConfig | None = None) -> CompactnessReport:
    cfg = config or CompactnessConfig()
    meshes = cfg.meshes()
    if any(b % a for a, b in zip(meshes, meshes[1:])) or any(b <= a for a, b in zip(meshes, meshes[1:])):
        raise ValueError("meshes must be nested (each N divides the next)")
    preset = get_preset(cfg.preset)
    wres, gdist, gnorm = [], [], []
    for level, eps, N in zip(cfg.levels, cfg.schedule(), meshes):
        grid = Grid.unit_square(N)
        U_star = _lifted_solution(grid, preset)
        U = DiscreteField(grid, U_star.values + eps * perturbation(grid, level, U_star.components))
        DU, DU_star = U.nodal_gradient(), U_star.nodal_gradient()
        X, Y = grid.coords()
        etas = [bump(X, Y, *w) for w in WEIGHTS]
        support = np.any(np.stack(etas) > 0, axis=0)
        dist = np.zeros(grid.shape)
        dist[support] = dist_to_CA(DU[support], starts=cfg.starts, seed=cfg.seed).value
        h2 = grid.h ** 2
        wres.append([float(np.sum(dist * eta) * h2) for eta in etas])
        diff = np.sqrt(np.sum((DU - DU_star) ** 2, axis=(-2, -1)))
        gdist.append(float((np.sum(diff ** cfg.p_bar) * h2) ** (1.0 / cfg.p_bar)))
        mag = np.sqrt(np.sum(DU ** 2, axis=(-2, -1)))
        gnorm.append(float((np.sum(mag ** cfg.p) * h2) ** (1.0 / cfg.p)))
    return CompactnessReport(list(cfg.levels), cfg.schedule(), meshes, wres, gdist, gnorm, cfg.p, cfg.p_bar)
