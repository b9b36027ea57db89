"""Rectangular grids, nodal fields and their on-disk format."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..campaign import SCHEMA_VERSION


@dataclass(frozen=True)
class Grid:
    """Tensor grid with ``nx`` x ``ny`` interior nodes and one ring of boundary nodes."""

    nx: int
    ny: int
    h: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("nx and ny must be at least 3")
        if not self.h > 0:
            raise ValueError("h must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def unit_square(cls, N: int) -> "Grid":
        """Grid of the unit square with spacing 1/N."""
        return cls(N - 1, N - 1, 1.0 / N)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx + 2, self.ny + 2)

    @property
    def domain(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return (x0, y0, x0 + (self.nx + 1) * self.h, y0 + (self.ny + 1) * self.h)

    @property
    def area(self) -> float:
        x0, y0, x1, y1 = self.domain
        return (x1 - x0) * (y1 - y0)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        x0, y0 = self.origin
        return x0 + self.h * np.arange(self.nx + 2), y0 + self.h * np.arange(self.ny + 2)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates, each of shape (nx+2, ny+2); index [i, j] is (x_i, y_j)."""
        x, y = self.axes()
        return np.meshgrid(x, y, indexing="ij")

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m

    def interior_mask(self, layers: int = 1) -> np.ndarray:
        """Nodes at least ``layers`` steps from the ring."""
        m = np.zeros(self.shape, dtype=bool)
        m[layers:-layers, layers:-layers] = True
        return m

    def to_json(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "h": self.h, "origin": list(self.origin)}


@dataclass
class DiscreteField:
    grid: Grid
    values: np.ndarray  # (nx+2, ny+2, m)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.shape[:2] != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        self.values = v

    @property
    def components(self) -> int:
        return self.values.shape[2]

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "DiscreteField":
        X, Y = grid.coords()
        return cls(grid, np.asarray(fn(X, Y), dtype=float).reshape(grid.shape + (-1,)))

    def nodal_gradient(self) -> np.ndarray:
        """Second-order finite-difference gradient, shape (nx+2, ny+2, m, 2)."""
        h = self.grid.h
        gx, gy = np.gradient(self.values, h, h, axis=(0, 1), edge_order=2)
        return np.stack([gx, gy], axis=-1)

    def stack(self, *others: "DiscreteField") -> "DiscreteField":
        return DiscreteField(self.grid, np.concatenate([self.values] + [o.values for o in others], axis=2))

    def max_abs_diff(self, other: "DiscreteField", layers: int = 0) -> float:
        d = np.abs(self.values - other.values)
        if layers:
            d = d[layers:-layers, layers:-layers]
        return float(np.max(d))


# -- I/O --------------------------------------------------------------------------

def write_field(path, field: DiscreteField, fmt: str = "binary") -> Path:
    """Write ``path`` (JSON header) and a sibling data file (.bin or .csv).

    Values are stored row-major over (i, j, component), little-endian float64
    for the binary format.
    """
    if fmt not in ("binary", "csv"):
        raise ValueError("fmt must be 'binary' or 'csv'")
    path = Path(path)
    data = path.with_suffix(".bin" if fmt == "binary" else ".csv")
    header = {
        "schema_version": SCHEMA_VERSION,
        "grid": field.grid.to_json(),
        "components": field.components,
        "format": fmt,
        "data_file": data.name,
        "order": "row-major (i, j, component)",
        "dtype": "<f8",
    }
    path.write_text(json.dumps(header, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    flat = np.ascontiguousarray(field.values, dtype="<f8")
    if fmt == "binary":
        data.write_bytes(flat.tobytes())
    else:
        np.savetxt(data, flat.reshape(-1, field.components), delimiter=",", fmt="%.17g")
    return path


def read_field(path) -> DiscreteField:
    path = Path(path)
    header = json.loads(path.read_text(encoding="utf-8"))
    g = header["grid"]
    grid = Grid(int(g["nx"]), int(g["ny"]), float(g["h"]), tuple(g["origin"]))
    shape = grid.shape + (int(header["components"]),)
    data = path.parent / header["data_file"]
    if header["format"] == "binary":
        vals = np.frombuffer(data.read_bytes(), dtype="<f8").reshape(shape)
    else:
        vals = np.loadtxt(data, delimiter=",", ndmin=2).reshape(shape)
    return DiscreteField(grid, vals.copy())
