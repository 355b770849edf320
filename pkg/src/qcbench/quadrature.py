"""Exponential cubes and tensor Gauss-Legendre quadrature on them.

The cube ``Q^r_{x0}`` is the image under ``exp_{x0}`` of the coordinate cube
``r (-1/2, 1/2)^n`` in ``T_{x0} M`` (coordinates taken in ``frame(x0)``).
Integrals over ``Q^r_{x0}`` are computed on the flat cube with the volume
Jacobian as density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InjectivityViolation, NonFiniteValue
from .geometry import Point

DEFAULT_ORDER = 64
MAX_DIM = 3


@dataclass(frozen=True)
class CubeSpec:
    center: Point
    r: float

    def __post_init__(self):
        r = float(self.r)
        object.__setattr__(self, "r", r)
        M = self.center.manifold
        if not r > 0:
            raise InjectivityViolation(f"cube radius must be positive, got {r}")
        half_diag = r * math.sqrt(M.dim) / 2
        if not half_diag < M.injectivity_radius:
            raise InjectivityViolation(
                f"r*sqrt(n)/2 = {half_diag:.6g} is not below the injectivity radius "
                f"{M.injectivity_radius:.6g}")

    @property
    def manifold(self):
        return self.center.manifold

    @property
    def dim(self) -> int:
        return self.center.manifold.dim

    def with_radius(self, r: float) -> "CubeSpec":
        return CubeSpec(self.center, r)


def build_cube(x0: Point, r: float) -> CubeSpec:
    return CubeSpec(x0, r)


@dataclass(frozen=True, eq=False)
class QuadGrid:
    """Tensor Gauss-Legendre nodes on the flat cube with Jacobian weights.

    ``nodes`` holds frame components ``(N, n)`` of the tangent vectors
    ``y_k``; ``weights`` are the flat tensor weights (summing to ``r**n``)
    and ``jacobians`` the values ``J(y_k)``. With ``cells > 1`` each axis is
    split into that many equal subintervals carrying ``q`` nodes each.
    """

    cube: CubeSpec
    nodes: np.ndarray
    weights: np.ndarray
    jacobians: np.ndarray
    q: int
    cells: int = 1

    def __len__(self):
        return len(self.weights)

    @property
    def manifold(self):
        return self.cube.manifold

    @cached_property
    def tangents(self) -> np.ndarray:
        """Ambient tangent vectors at the cube centre, shape ``(N, ambient)``."""
        E = self.manifold.frame(self.cube.center.coords)
        return self.nodes @ E

    @cached_property
    def points(self) -> np.ndarray:
        return self.manifold.exp(self.cube.center.coords, self.tangents)

    @cached_property
    def transport(self) -> np.ndarray:
        """Frame matrices of ``dexp_{x0}[y_k]``, shape ``(N, n, n)``."""
        return self.manifold.dexp_matrix(self.cube.center.coords, self.tangents)

    @cached_property
    def transport_inv(self) -> np.ndarray:
        return np.linalg.inv(self.transport)

    @cached_property
    def volume(self) -> float:
        """``mu(Q^r)`` computed on this grid."""
        return integrate(self, np.ones(len(self)))


def gauss_legendre_1d(r: float, q: int, cells: int = 1):
    """Composite Gauss-Legendre rule on ``[-r/2, r/2]``."""
    t, w = np.polynomial.legendre.leggauss(q)
    h = r / cells
    left = -r / 2 + h * np.arange(cells)
    x = (left[:, None] + h * (t[None, :] + 1) / 2).ravel()
    wx = np.tile(w * h / 2, cells)
    return x, wx


def quad_grid(cube: CubeSpec, q: int = DEFAULT_ORDER, cells: int = 1) -> QuadGrid:
    q = int(q)
    cells = int(cells)
    if q < 2:
        raise ValueError(f"quadrature order must be >= 2, got {q}")
    if cells < 1:
        raise ValueError(f"cells must be >= 1, got {cells}")
    n = cube.dim
    if n > MAX_DIM:
        raise ValueError(f"tensor grids support n <= {MAX_DIM}, got n = {n}")
    x, w = gauss_legendre_1d(cube.r, q, cells)
    mesh = np.meshgrid(*([x] * n), indexing="ij")
    wmesh = np.meshgrid(*([w] * n), indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wmesh], axis=-1), axis=-1)
    E = cube.manifold.frame(cube.center.coords)
    jac = cube.manifold.volume_jacobian(nodes @ E)
    for a in (nodes, weights, jac):
        a.setflags(write=False)
    return QuadGrid(cube, nodes, weights, jac, q, cells)


def _values(grid: QuadGrid, g) -> np.ndarray:
    vals = g(grid) if callable(g) else g
    vals = np.asarray(vals, dtype=float)
    if vals.shape != grid.weights.shape:
        raise ValueError(f"evaluator returned shape {vals.shape}, expected {grid.weights.shape}")
    if not np.all(np.isfinite(vals)):
        raise NonFiniteValue("integrand is not finite at some quadrature node")
    return vals


def integrate(grid: QuadGrid, g) -> float:
    """``sum_k w_k J(y_k) g(y_k)``; ``g`` is a node array or ``g(grid) -> array``.

    The sum is correctly rounded (``math.fsum``), so it does not depend on
    the order in which node values were produced.
    """
    vals = _values(grid, g)
    return math.fsum(grid.weights * grid.jacobians * vals)


def average_integrate(grid: QuadGrid, g) -> float:
    return integrate(grid, g) / grid.volume
