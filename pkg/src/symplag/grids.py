"""Rectangular grids in the complex parameter z = x + iy and Wirtinger calculus.

A scalar field lives on a uniform nx-by-ny grid; values[i, j] is the value at
(x0 + i*dx, y0 + j*dy).  Derivatives use 4th-order central differences in the
interior and 4th-order one-sided stencils at the boundary, so they are exact
on polynomials of total degree <= 4.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridTooSmall

# 4th-order first-derivative stencils (rows: node 0 and node 1 from the edge).
_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def diff4(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """4th-order first derivative along `axis` with one-sided boundary closure.

    Works on arrays with trailing dimensions (e.g. per-node matrices); only
    `axis` is differenced.
    """
    v = np.moveaxis(np.asarray(values), axis, 0)
    n = v.shape[0]
    if n < 5:
        raise GridTooSmall(f"need at least 5 nodes along axis {axis}, got {n}")
    out = np.empty_like(v, dtype=np.result_type(v.dtype, float))
    out[2:-2] = (-v[4:] + 8.0 * v[3:-1] - 8.0 * v[1:-3] + v[:-4]) / (12.0 * h)
    out[0] = np.tensordot(_EDGE0, v[:5], axes=(0, 0)) / h
    out[1] = np.tensordot(_EDGE1, v[:5], axes=(0, 0)) / h
    out[-1] = -np.tensordot(_EDGE0, v[-1:-6:-1], axes=(0, 0)) / h
    out[-2] = -np.tensordot(_EDGE1, v[-1:-6:-1], axes=(0, 0)) / h
    return np.moveaxis(out, 0, axis)


def cumquad(values: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Cumulative integral along `axis` from the first node, 4th-order accurate.

    Each panel integral uses the cubic through the four nearest nodes.
    """
    v = np.moveaxis(np.asarray(values), axis, 0)
    n = v.shape[0]
    if n < 5:
        raise GridTooSmall(f"need at least 5 nodes along axis {axis}, got {n}")
    panels = np.empty_like(v[:-1], dtype=np.result_type(v.dtype, float))
    # interior panels [k, k+1] from nodes k-1..k+2
    panels[1:-1] = (h / 24.0) * (-v[:-3] + 13.0 * v[1:-2] + 13.0 * v[2:-1] - v[3:])
    panels[0] = (h / 24.0) * (9.0 * v[0] + 19.0 * v[1] - 5.0 * v[2] + v[3])
    panels[-1] = (h / 24.0) * (9.0 * v[-1] + 19.0 * v[-2] - 5.0 * v[-3] + v[-4])
    out = np.zeros_like(v, dtype=panels.dtype)
    np.cumsum(panels, axis=0, out=out[1:])
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True)
class GridGeometry:
    nx: int
    ny: int
    x0: float
    y0: float
    dx: float
    dy: float

    def __post_init__(self):
        if self.nx < 5 or self.ny < 5:
            raise GridTooSmall(f"grid must be at least 5x5, got {self.nx}x{self.ny}")
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError("grid spacings must be positive")

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def zmesh(self) -> np.ndarray:
        xx, yy = self.mesh()
        return xx + 1j * yy

    def as_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "x0": self.x0, "y0": self.y0,
                "dx": self.dx, "dy": self.dy}

    @staticmethod
    def from_dict(d: dict) -> "GridGeometry":
        return GridGeometry(int(d["nx"]), int(d["ny"]), float(d["x0"]),
                            float(d["y0"]), float(d["dx"]), float(d["dy"]))


@dataclass(frozen=True)
class ComplexGrid:
    """Complex scalar field on a GridGeometry."""

    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.geometry.nx, self.geometry.ny):
            raise ValueError(f"values shape {v.shape} does not match geometry "
                             f"({self.geometry.nx}, {self.geometry.ny})")
        object.__setattr__(self, "values", v)

    @staticmethod
    def from_function(geom: GridGeometry, fn) -> "ComplexGrid":
        """Sample fn(z) (vectorized over a complex mesh) on the grid."""
        return ComplexGrid(geom, np.asarray(fn(geom.zmesh()), dtype=complex))

    @staticmethod
    def constant(geom: GridGeometry, value: complex) -> "ComplexGrid":
        return ComplexGrid(geom, np.full((geom.nx, geom.ny), value, dtype=complex))

    def with_values(self, values: np.ndarray) -> "ComplexGrid":
        return ComplexGrid(self.geometry, values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def min_abs(self) -> float:
        return float(np.min(np.abs(self.values)))


def d_x(f: ComplexGrid) -> ComplexGrid:
    return f.with_values(diff4(f.values, f.geometry.dx, axis=0))


def d_y(f: ComplexGrid) -> ComplexGrid:
    return f.with_values(diff4(f.values, f.geometry.dy, axis=1))


def d_z(f: ComplexGrid) -> ComplexGrid:
    """Wirtinger derivative (f_x - i f_y) / 2."""
    fx = diff4(f.values, f.geometry.dx, axis=0)
    fy = diff4(f.values, f.geometry.dy, axis=1)
    return f.with_values(0.5 * (fx - 1j * fy))


def d_zbar(f: ComplexGrid) -> ComplexGrid:
    """Conjugate Wirtinger derivative (f_x + i f_y) / 2."""
    fx = diff4(f.values, f.geometry.dx, axis=0)
    fy = diff4(f.values, f.geometry.dy, axis=1)
    return f.with_values(0.5 * (fx + 1j * fy))


# -- serialization: CSV per field with a JSON geometry sidecar ----------------


def save_grid(f: ComplexGrid, path: str | Path) -> None:
    """Write `x,y,re,im` rows (17 significant digits) plus a .json sidecar."""
    path = Path(path)
    xx, yy = f.geometry.mesh()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "re", "im"])
        for i in range(f.geometry.nx):
            for j in range(f.geometry.ny):
                v = f.values[i, j]
                w.writerow([f"{xx[i, j]:.17g}", f"{yy[i, j]:.17g}",
                            f"{v.real:.17g}", f"{v.imag:.17g}"])
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(f.geometry.as_dict(), fh, indent=2)


def load_grid(path: str | Path) -> ComplexGrid:
    path = Path(path)
    with open(path.with_suffix(path.suffix + ".json")) as fh:
        geom = GridGeometry.from_dict(json.load(fh))
    values = np.empty((geom.nx, geom.ny), dtype=complex)
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        next(rows)  # header
        flat = [complex(float(r[2]), float(r[3])) for r in rows]
    if len(flat) != geom.nx * geom.ny:
        raise ValueError(f"{path}: expected {geom.nx * geom.ny} rows, got {len(flat)}")
    values[:] = np.array(flat, dtype=complex).reshape(geom.nx, geom.ny)
    return ComplexGrid(geom, values)
