"""Periodic square grid, scalar fields and centered finite differences.

Fields are stored flat with index ``iy * n + ix``; reshaping to ``(n, n)``
gives an array indexed ``[iy, ix]`` so the x-axis is axis 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class GridSpec:
    n: int
    box_length: float = 2 * math.pi

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise ValueError(f"grid size must be an even integer >= 4, got {self.n}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")

    @property
    def spacing(self) -> float:
        return self.box_length / self.n

    h = spacing

    @property
    def size(self) -> int:
        return self.n * self.n

    def coordinates(self):
        """Return 1D node coordinates along one axis."""
        return np.arange(self.n) * self.spacing

    def meshgrid(self):
        """Return ``(x, y)`` as flat arrays in storage order."""
        c = self.coordinates()
        y, x = np.meshgrid(c, c, indexing="ij")
        return x.ravel(), y.ravel()


@dataclass(frozen=True, eq=False)
class Field2D:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size != self.grid.size:
            raise ValueError(f"field has {v.size} values, grid needs {self.grid.size}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "Field2D":
        x, y = grid.meshgrid()
        return cls(grid, np.broadcast_to(func(x, y), x.shape).astype(float))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field2D":
        return cls(grid, np.zeros(grid.size))

    def as_2d(self) -> np.ndarray:
        """View as ``[iy, ix]``."""
        return self.values.reshape(self.grid.n, self.grid.n)

    def at(self, ix: int, iy: int) -> float:
        return float(self.values[iy * self.grid.n + ix])

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())

    def _check(self, other):
        if isinstance(other, Field2D):
            _same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return Field2D(self.grid, self.values + self._check(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field2D(self.grid, self.values - self._check(other))

    def __mul__(self, other):
        return Field2D(self.grid, self.values * self._check(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field2D(self.grid, -self.values)

    def __repr__(self):
        return f"Field2D(n={self.grid.n}, max|f|={np.abs(self.values).max():.3g})"


def _same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ValueError("fields live on different grids")
    return g


# Raw-array kernels. ``a`` is flat of length n*n.

def ddx(a: np.ndarray, n: int, h: float) -> np.ndarray:
    q = a.reshape(n, n)
    return ((np.roll(q, -1, axis=1) - np.roll(q, 1, axis=1)) / (2 * h)).reshape(-1)


def ddy(a: np.ndarray, n: int, h: float) -> np.ndarray:
    q = a.reshape(n, n)
    return ((np.roll(q, -1, axis=0) - np.roll(q, 1, axis=0)) / (2 * h)).reshape(-1)


def dx(f: Field2D) -> Field2D:
    """Centered x-derivative ``(f[ix+1] - f[ix-1]) / 2h`` with periodic wrap."""
    return Field2D(f.grid, ddx(f.values, f.grid.n, f.grid.spacing))


def dy(f: Field2D) -> Field2D:
    """Centered y-derivative, periodic."""
    return Field2D(f.grid, ddy(f.values, f.grid.n, f.grid.spacing))


def divergence(vx: Field2D, vy: Field2D) -> Field2D:
    g = _same_grid(vx, vy)
    return Field2D(g, ddx(vx.values, g.n, g.spacing) + ddy(vy.values, g.n, g.spacing))


def nearest_node(p, grid: GridSpec) -> tuple[int, int]:
    """Map a physical point to the closest grid node (ties away from zero)."""
    h = grid.spacing

    def _round(v):
        r = math.floor(abs(v) / h + 0.5)
        return int(math.copysign(r, v)) % grid.n

    return _round(p[0]), _round(p[1])


def derivative_matrices(grid: GridSpec):
    """Sparse ``(Dx, Dy)`` acting on flat fields, each ``G x G`` CSR."""
    n, h = grid.n, grid.spacing
    one = np.ones(n)
    d1 = sp.diags([one[:-1], -one[:-1], [1.0], [-1.0]], [1, -1, -(n - 1), n - 1],
                  shape=(n, n)) / (2 * h)
    eye = sp.identity(n, format="csr")
    return sp.kron(eye, d1, format="csr"), sp.kron(d1, eye, format="csr")
