"""Named Dirichlet data.  Presets with ``exact`` set are area-stationary
everywhere, so their interior values are an oracle for the solver.

affine         u = a + X0 x                     (n = 2, exact)
harmonic-delta u = delta e^{pi(x-1)} sin(pi y)  (n = 1, delta = 0.01)
holomorphic-phi u = (Re phi, Im phi), phi(z) = e^z / 2   (n = 2, exact)
sine-bump      u = 0.3 (sin(pi x)(1+y), sin(pi y)(1+x)) on the ring (n = 2)
scherk         u = log(cos(s(y-1/2)) / cos(s(x-1/2))) / s, s = 1   (n = 1, exact)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

AFFINE_X0 = np.array([[0.3, -0.2], [0.5, 0.1]])
AFFINE_OFFSET = np.array([0.1, -0.2])
HARMONIC_DELTA = 0.01
SCHERK_S = 1.0


@dataclass(frozen=True)
class BoundaryPreset:
    name: str
    n: int
    fn: Callable  # (X, Y) -> (..., n)
    exact: bool = False
    gradient: Callable | None = None  # (X, Y) -> (..., n, 2) when known

    def __call__(self, X, Y):
        return self.fn(X, Y)


def _affine(X, Y):
    return AFFINE_OFFSET + np.stack([X, Y], axis=-1) @ AFFINE_X0.T


def _affine_grad(X, Y):
    return np.broadcast_to(AFFINE_X0, np.shape(X) + (2, 2)).copy()


def _harmonic(X, Y):
    return (HARMONIC_DELTA * np.exp(np.pi * (X - 1.0)) * np.sin(np.pi * Y))[..., None]


def _holo(X, Y):
    p = 0.5 * np.exp(X + 1j * Y)
    return np.stack([p.real, p.imag], axis=-1)


def _holo_grad(X, Y):
    d = 0.5 * np.exp(X + 1j * Y)  # phi'
    row0 = np.stack([d.real, -d.imag], axis=-1)
    row1 = np.stack([d.imag, d.real], axis=-1)
    return np.stack([row0, row1], axis=-2)


def _sine(X, Y):
    return 0.3 * np.stack([np.sin(np.pi * X) * (1 + Y), np.sin(np.pi * Y) * (1 + X)], axis=-1)


def _scherk(X, Y):
    s = SCHERK_S
    return (np.log(np.cos(s * (Y - 0.5)) / np.cos(s * (X - 0.5))) / s)[..., None]


def _scherk_grad(X, Y):
    s = SCHERK_S
    return np.stack([np.tan(s * (X - 0.5)), -np.tan(s * (Y - 0.5))], axis=-1)[..., None, :]


PRESETS = {
    "affine": BoundaryPreset("affine", 2, _affine, True, _affine_grad),
    "harmonic-delta": BoundaryPreset("harmonic-delta", 1, _harmonic),
    "holomorphic-phi": BoundaryPreset("holomorphic-phi", 2, _holo, True, _holo_grad),
    "sine-bump": BoundaryPreset("sine-bump", 2, _sine),
    "scherk": BoundaryPreset("scherk", 1, _scherk, True, _scherk_grad),
}
# ASCII and Greek spellings both accepted
ALIASES = {"harmonic-δ": "harmonic-delta", "holomorphic-φ": "holomorphic-phi"}


def get_preset(name: str) -> BoundaryPreset:
    key = ALIASES.get(name, name)
    if key not in PRESETS:
        raise KeyError(f"unknown boundary preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[key]
