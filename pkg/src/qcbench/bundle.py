"""Fibers of L(TM, R^m) as frame matrices, the bundle distance, integrands.

An element ``alpha`` of ``(T*_x M)^m`` is stored as the ``m x n`` matrix
whose column ``i`` is ``alpha(E_i)`` for the deterministic frame
``E = frame(x)``. In that orthonormal frame the Frobenius norm of the
matrix is the fiber norm induced by the metric.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import geometry
from .errors import BaseMismatch, DimensionMismatch, ManifoldMismatch, UnknownIntegrand
from .geometry import Point


@dataclass(frozen=True, eq=False)
class CotangentStack:
    """A linear map ``T_x M -> R^m`` in frame components at ``base``."""

    base: Point
    matrix: np.ndarray

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        if A.ndim != 2 or A.shape[1] != self.base.manifold.dim:
            raise DimensionMismatch(
                f"expected an m x {self.base.manifold.dim} matrix, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("cotangent stack has non-finite entries")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    def __eq__(self, other):
        return (isinstance(other, CotangentStack) and self.base == other.base
                and np.array_equal(self.matrix, other.matrix))

    def __hash__(self):
        return hash((self.base, self.matrix.tobytes()))

    def __call__(self, v: geometry.Tangent) -> np.ndarray:
        """Apply the linear map to a tangent vector at ``base``."""
        if v.base != self.base:
            raise BaseMismatch("tangent vector is not based at the stack's base point")
        c = self.base.manifold.components(self.base.coords, v.components)
        return self.matrix @ c


def trivialize(base: Point, values) -> CotangentStack:
    """Stack the values ``alpha(E_1), ..., alpha(E_n)`` into a frame matrix.

    ``values`` is a sequence of ``n`` vectors of equal length ``m``.
    """
    n = base.manifold.dim
    try:
        cols = [np.atleast_1d(np.asarray(v, dtype=float)) for v in values]
    except TypeError:
        raise DimensionMismatch("values must be a sequence of vectors") from None
    if len(cols) != n:
        raise DimensionMismatch(f"need one value per frame vector ({n}), got {len(cols)}")
    if len({c.shape for c in cols}) != 1 or cols[0].ndim != 1:
        raise DimensionMismatch("all frame values must be vectors of the same length m")
    return CotangentStack(base, np.column_stack(cols))


def trivialize_map(base: Point, linear_map: Callable) -> CotangentStack:
    """Trivialize a linear map given as a callable on ambient tangent arrays."""
    E = base.manifold.frame(base.coords)
    return trivialize(base, [linear_map(e) for e in E])


def delta(alpha: CotangentStack, beta: CotangentStack) -> float:
    """Bundle distance: base-point distance plus Frobenius distance of frame matrices."""
    if alpha.base.manifold != beta.base.manifold:
        raise ManifoldMismatch("stacks live over different manifolds")
    if alpha.matrix.shape != beta.matrix.shape:
        raise DimensionMismatch("stacks have different target dimensions")
    d = 0.0 if alpha.base == beta.base else geometry.dist(alpha.base, beta.base)
    return float(d + np.linalg.norm(alpha.matrix - beta.matrix))


def fiber_norm(alpha: CotangentStack) -> float:
    return float(np.linalg.norm(alpha.matrix))


def transport_matrices(manifold, x0, y):
    """Frame matrices ``D`` of ``L_x = dexp_{x0}[y]`` at ``x = exp(x0, y)``.

    Thin alias of :meth:`Manifold.dexp_matrix`, batched over ``y``.
    """
    return manifold.dexp_matrix(x0, y)


def pullback_matrices(B, D):
    """Compose frame matrices ``B`` at ``x`` with ``L_x``: returns ``B @ D``."""
    return np.matmul(B, D)


def pullback_compose(beta: CotangentStack, x0: Point) -> CotangentStack:
    """Return ``beta o L_x`` as a stack at ``x0``, where ``x = beta.base``.

    Column ``i`` of the result is ``beta(dexp(x0, log(x0, x), E_i))`` with
    ``E`` the frame at ``x0``.
    """
    M = x0.manifold
    if beta.base.manifold != M:
        raise ManifoldMismatch("stack and base point live on different manifolds")
    if beta.base == x0:
        return CotangentStack(x0, beta.matrix)
    y = geometry.log(x0, beta.base)
    D = transport_matrices(M, x0.coords, y.components)
    return CotangentStack(x0, pullback_matrices(beta.matrix, D))


# ---------------------------------------------------------------------------
# integrands
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Integrand:
    """Continuous integrand ``f(x, A)`` on frame matrices.

    ``func`` receives a point array (broadcastable against the batch) and a
    stack of matrices of shape ``(..., m, n)`` and returns values of shape
    ``(...)``. ``m`` and ``n`` restrict admissible shapes when not ``None``.
    """

    name: str
    func: Callable
    m: int | None = None
    n: int | None = None
    square: bool = False

    def validate(self, m: int, n: int):
        if (self.m is not None and m != self.m) or (self.n is not None and n != self.n):
            raise DimensionMismatch(
                f"integrand {self.name!r} needs {self.m} x {self.n} matrices, got {m} x {n}")
        if self.square and m != n:
            raise DimensionMismatch(f"integrand {self.name!r} needs square matrices, got {m} x {n}")

    def __call__(self, x, A):
        A = np.asarray(A, dtype=float)
        self.validate(*A.shape[-2:])
        return np.asarray(self.func(x, A), dtype=float)

    def __add__(self, other: "Integrand") -> "Integrand":
        return combine([(1.0, self), (1.0, other)])

    def __rmul__(self, c: float) -> "Integrand":
        return combine([(float(c), self)])

    def __neg__(self) -> "Integrand":
        return combine([(-1.0, self)])

    def check_bounded(self, m: int, n: int, radius: float = 10.0, samples: int = 256, seed: int = 0) -> float:
        """Sample ``|f|`` on the Frobenius ball of given radius and return the max.

        Raises ``ValueError`` if any sampled value is not finite.
        """
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(samples, m, n))
        A *= radius * rng.uniform(size=(samples, 1, 1)) / np.linalg.norm(A, axis=(1, 2), keepdims=True)
        vals = self(None, A)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"integrand {self.name!r} is not finite on a bounded set")
        return float(np.max(np.abs(vals)))


def combine(terms) -> Integrand:
    """Linear combination ``sum_k c_k f_k`` of integrands."""
    terms = [(float(c), f) for c, f in terms]
    if not terms:
        raise ValueError("combine needs at least one term")

    def func(x, A):
        return sum(c * f(x, A) for c, f in terms)

    name = " + ".join(f if c == 1.0 else f"{c:g}*{f}" for c, f in ((c, f.name) for c, f in terms))
    ms = {f.m for _, f in terms} - {None}
    ns = {f.n for _, f in terms} - {None}
    if len(ms) > 1 or len(ns) > 1:
        raise DimensionMismatch("combined integrands disagree on matrix shape")
    return Integrand(name, func, m=next(iter(ms), None), n=next(iter(ns), None),
                     square=any(f.square for _, f in terms))


def _quad(x, A):
    return np.sum(A * A, axis=(-2, -1))


def _det(x, A):
    if A.shape[-2:] == (2, 2):
        return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    return np.linalg.det(A)


_REGISTRY: dict[str, Integrand] = {
    "quad": Integrand("quad", _quad),
    "neg_quad": Integrand("neg_quad", lambda x, A: -_quad(x, A)),
    "det": Integrand("det", _det, square=True),
    "det_squared": Integrand("det_squared", lambda x, A: _det(x, A) ** 2, square=True),
}


def get_integrand(name: str) -> Integrand:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownIntegrand(f"unknown integrand {name!r}; known: {', '.join(sorted(_REGISTRY))}") from None


def register_integrand(f: Integrand, *, overwrite: bool = False):
    if f.name in _REGISTRY and not overwrite:
        raise ValueError(f"integrand {f.name!r} already registered")
    _REGISTRY[f.name] = f


def integrand_names() -> list[str]:
    return sorted(_REGISTRY)
