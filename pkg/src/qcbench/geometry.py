"""Model manifolds of constant curvature with closed-form exponential maps.

Three space forms are provided, each in a global model free of coordinate
singularities:

* ``Euclidean(n)``  -- points and tangents in R^n, exp is translation;
* ``Sphere(n)``     -- unit sphere embedded in R^(n+1);
* ``Hyperbolic(n)`` -- upper sheet of the hyperboloid <x, x> = -1 in
  Minkowski space R^(n,1), with the time coordinate first.

All array methods on the manifold classes broadcast over leading axes: a
point array has shape ``(..., ambient_dim)`` and so does a tangent array.
Frame components of tangent vectors have shape ``(..., n)``.

A light typed layer (:class:`Point`, :class:`Tangent`, :class:`Frame` and
the module functions :func:`exp`, :func:`log`, :func:`dexp`, ...) validates
base points and representation invariants; heavy numerical code works on
the array methods directly.

``geodesic_rk4`` integrates the geodesic equation together with its
variational (Jacobi) equation in the ambient space and serves as an
independent oracle for the closed forms.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AntipodalPoint,
    BaseMismatch,
    DimensionMismatch,
    GeometryError,
    ManifoldMismatch,
    OutOfInjectivityRadius,
)

POINT_TOL = 1e-12
TANGENT_TOL = 1e-12
# below this norm a tangent is treated as the zero vector
_ZERO_NORM = 1e-300


def sn_ratio(curvature, t):
    """Return ``sn_k(t) / t`` for curvature ``k`` in {+1, 0, -1}.

    ``sn_1 = sin``, ``sn_0 = id`` and ``sn_-1 = sinh``. The ratio is 1 at
    ``t = 0`` and is evaluated without cancellation for small ``t``.
    """
    t = np.asarray(t, dtype=float)
    if curvature == 0:
        return np.ones_like(t)
    if curvature > 0:
        return np.sinc(t / np.pi)
    small = np.abs(t) < 1e-4
    safe = np.where(small, 1.0, t)
    t2 = t * t
    return np.where(small, 1.0 + t2 / 6.0 + t2 * t2 / 120.0, np.sinh(safe) / safe)


class Manifold:
    """Base class of the model space forms.

    Subclasses fix ``kind``, ``curvature`` and the ambient inner product.
    Instances are immutable and compare equal when kind and dimension agree.
    """

    kind: str = ""
    curvature: int = 0

    def __init__(self, dim: int):
        dim = int(dim)
        if dim < 1:
            raise DimensionMismatch(f"manifold dimension must be >= 1, got {dim}")
        self._dim = dim

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def ambient_dim(self) -> int:
        return self._dim

    @property
    def injectivity_radius(self) -> float:
        return np.inf

    def __eq__(self, other):
        return type(self) is type(other) and self._dim == other._dim

    def __hash__(self):
        return hash((self.kind, self._dim))

    def __repr__(self):
        return f"{type(self).__name__}({self._dim})"

    # ---- metric -------------------------------------------------------
    def inner(self, u, v):
        """Ambient inner product restricted to tangent spaces."""
        return np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def norm(self, v):
        return np.sqrt(np.maximum(self.inner(v, v), 0.0))

    def project(self, x, e):
        """Orthogonal projection of an ambient vector onto ``T_x M``."""
        return np.asarray(e, dtype=float)

    # ---- validation ---------------------------------------------------
    def check_point(self, x, tol: float = POINT_TOL) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.ambient_dim,):
            raise DimensionMismatch(
                f"{self!r} points need {self.ambient_dim} coordinates, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise GeometryError("point has non-finite coordinates")
        return x

    def check_tangent(self, x, v, tol: float = TANGENT_TOL) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1:] != (self.ambient_dim,):
            raise DimensionMismatch(
                f"{self!r} tangents need {self.ambient_dim} components, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GeometryError("tangent has non-finite components")
        return v

    def _check_radius(self, t):
        if np.any(np.asarray(t) >= self.injectivity_radius):
            raise OutOfInjectivityRadius(
                f"|v| = {np.max(t):.6g} reaches the injectivity radius {self.injectivity_radius:.6g}")

    # ---- closed-form geometry -----------------------------------------
    def exp(self, x, v):
        return np.asarray(x, dtype=float) + np.asarray(v, dtype=float)

    def log(self, x, y):
        return np.asarray(y, dtype=float) - np.asarray(x, dtype=float)

    def dist(self, x, y):
        return self.norm(self.log(x, y))

    def _radial_velocity(self, x, vhat, t):
        """Unit velocity at time ``t`` of the geodesic from ``x`` along ``vhat``."""
        return vhat

    def dexp(self, x, v, w):
        """Differential of ``exp_x`` at ``v`` applied to ``w``.

        ``w`` is split into its component along ``v`` and the orthogonal
        remainder. The radial part is carried by the geodesic velocity
        (Gauss lemma); the normal part is parallel along the geodesic and
        scaled by ``sn(|v|)/|v|``.
        """
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        t = self.norm(v)
        self._check_radius(t)
        nonzero = t > _ZERO_NORM
        vhat = v / np.where(nonzero, t, 1.0)[..., None]
        vhat = np.where(nonzero[..., None], vhat, 0.0)
        a = self.inner(w, vhat)
        w_perp = w - a[..., None] * vhat
        radial = a[..., None] * self._radial_velocity(x, vhat, t)
        return radial + sn_ratio(self.curvature, t)[..., None] * w_perp

    def volume_jacobian(self, y):
        """Density of the pulled-back volume, ``(sn(|y|)/|y|)^(n-1)``."""
        t = self.norm(y)
        self._check_radius(t)
        return sn_ratio(self.curvature, t) ** (self.dim - 1)

    # ---- frames -------------------------------------------------------
    def frame(self, x) -> np.ndarray:
        """Deterministic oriented orthonormal frame at ``x``.

        Returns an array of shape ``(..., n, ambient_dim)``. Ambient basis
        vectors are projected to ``T_x M`` and Gram-Schmidt orthonormalised,
        skipping the axis of largest ``|x_i|`` (first one on ties). The last
        vector is flipped if needed so that ``det[x, E_1, ..., E_n] > 0``.
        """
        x = np.asarray(x, dtype=float)
        n, amb = self.dim, self.ambient_dim
        if amb == n:
            return np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)).copy()
        batch = x.shape[:-1]
        X = x.reshape(-1, amb)
        rows = np.arange(len(X))
        pivot = np.argmax(np.abs(X), axis=1)
        is_pivot = np.arange(amb)[None, :] == pivot[:, None]
        axes = np.argsort(is_pivot, axis=1, kind="stable")[:, :n]
        E = np.zeros((len(X), n, amb))
        for i in range(n):
            e = np.zeros((len(X), amb))
            e[rows, axes[:, i]] = 1.0
            e = self.project(X, e)
            for _ in range(2):
                for j in range(i):
                    e = e - self.inner(E[:, j], e)[:, None] * E[:, j]
            E[:, i] = e / self.norm(e)[:, None]
        sign = np.sign(np.linalg.det(np.concatenate([X[:, None, :], E], axis=1)))
        E[:, -1] *= np.where(sign < 0, -1.0, 1.0)[:, None]
        return E.reshape(batch + (n, amb))

    def components(self, x, v):
        """Frame components of tangent ``v`` at ``x``; shape ``(..., n)``."""
        E = self.frame(x)
        return self.inner(E, np.asarray(v, dtype=float)[..., None, :])

    def from_components(self, x, c):
        """Tangent at ``x`` with frame components ``c``."""
        E = self.frame(x)
        return np.einsum("...i,...ia->...a", np.asarray(c, dtype=float), E)

    def dexp_matrix(self, x0, y):
        """Matrix of ``dexp_{x0}[y]`` from ``frame(x0)`` to ``frame(exp(x0, y))``.

        Entry ``[k, i]`` is ``g(dexp(x0, y, E_i), F_k)``; its determinant is
        the volume Jacobian because both frames are oriented.
        """
        x0 = np.asarray(x0, dtype=float)
        y = np.asarray(y, dtype=float)
        E0 = self.frame(x0)
        W = self.dexp(x0[..., None, :], y[..., None, :], E0)
        F = self.frame(self.exp(x0, y))
        return self.inner(F[..., :, None, :], W[..., None, :, :])

    # ---- sampling -----------------------------------------------------
    def origin(self) -> np.ndarray:
        return np.zeros(self.ambient_dim)

    def random_point(self, rng, spread: float = 1.0) -> np.ndarray:
        o = self.origin()
        c = rng.normal(size=self.dim)
        c *= spread * rng.uniform() / max(np.linalg.norm(c), 1e-12)
        return self.exp(o, self.from_components(o, c))

    def random_tangent(self, x, rng, max_norm: float = 1.0) -> np.ndarray:
        c = rng.normal(size=self.dim)
        c *= max_norm * rng.uniform() / max(np.linalg.norm(c), 1e-12)
        return self.from_components(x, c)

    # ---- typed constructors -------------------------------------------
    def point(self, coords) -> "Point":
        return Point(self, coords)

    def tangent(self, base: "Point", components) -> "Tangent":
        return Tangent(base, components)


class Euclidean(Manifold):
    kind = "flat"
    curvature = 0


class Sphere(Manifold):
    """Unit sphere S^n in its ambient embedding."""

    kind = "sphere"
    curvature = 1

    @property
    def ambient_dim(self):
        return self._dim + 1

    @property
    def injectivity_radius(self):
        return np.pi

    def check_point(self, x, tol=POINT_TOL):
        x = super().check_point(x, tol)
        if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1.0) > tol):
            raise GeometryError("sphere point is not a unit vector")
        return x

    def check_tangent(self, x, v, tol=TANGENT_TOL):
        v = super().check_tangent(x, v, tol)
        if np.any(np.abs(np.sum(np.asarray(x) * v, axis=-1)) > tol):
            raise GeometryError("tangent is not orthogonal to its base point")
        return v

    def project(self, x, e):
        x = np.asarray(x, dtype=float)
        e = np.asarray(e, dtype=float)
        return e - np.sum(e * x, axis=-1, keepdims=True) * x

    def exp(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        t = self.norm(v)
        self._check_radius(t)
        return np.cos(t)[..., None] * x + np.sinc(t / np.pi)[..., None] * v

    def log(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c = np.sum(x * y, axis=-1)
        u = y - c[..., None] * x
        s = np.linalg.norm(u, axis=-1)
        theta = np.arctan2(s, c)
        if np.any(np.pi - theta < 1e-9):
            raise AntipodalPoint("log is undefined between antipodal points")
        # theta / sin(theta), stable near 0
        factor = 1.0 / np.sinc(theta / np.pi)
        return factor[..., None] * u

    def dist(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c = np.sum(x * y, axis=-1)
        s = np.linalg.norm(y - c[..., None] * x, axis=-1)
        return np.arctan2(s, c)

    def _radial_velocity(self, x, vhat, t):
        return -np.sin(t)[..., None] * x + np.cos(t)[..., None] * vhat

    def origin(self):
        o = np.zeros(self.ambient_dim)
        o[-1] = 1.0
        return o


def minkowski(u, v):
    """Lorentzian product ``-u_0 v_0 + sum_i u_i v_i`` over the last axis."""
    u = np.asarray(u)
    v = np.asarray(v)
    return np.sum(u[..., 1:] * v[..., 1:], axis=-1) - u[..., 0] * v[..., 0]


class Hyperbolic(Manifold):
    """Hyperbolic space H^n in the hyperboloid model (time coordinate first)."""

    kind = "hyperbolic"
    curvature = -1

    @property
    def ambient_dim(self):
        return self._dim + 1

    def inner(self, u, v):
        return minkowski(u, v)

    def check_point(self, x, tol=POINT_TOL):
        x = super().check_point(x, tol)
        if np.any(np.abs(minkowski(x, x) + 1.0) > tol) or np.any(x[..., 0] <= 0):
            raise GeometryError("point is not on the upper hyperboloid sheet")
        return x

    def check_tangent(self, x, v, tol=TANGENT_TOL):
        v = super().check_tangent(x, v, tol)
        if np.any(np.abs(minkowski(x, v)) > tol):
            raise GeometryError("tangent is not Minkowski-orthogonal to its base point")
        return v

    def project(self, x, e):
        x = np.asarray(x, dtype=float)
        e = np.asarray(e, dtype=float)
        return e + minkowski(e, x)[..., None] * x

    def exp(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        t = self.norm(v)
        return np.cosh(t)[..., None] * x + sn_ratio(-1, t)[..., None] * v

    def log(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c = -minkowski(x, y)
        u = y - c[..., None] * x
        s = np.sqrt(np.maximum(minkowski(u, u), 0.0))
        theta = np.arcsinh(s)
        return (1.0 / sn_ratio(-1, theta))[..., None] * u

    def dist(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        u = y + minkowski(x, y)[..., None] * x
        return np.arcsinh(np.sqrt(np.maximum(minkowski(u, u), 0.0)))

    def _radial_velocity(self, x, vhat, t):
        return np.sinh(t)[..., None] * x + np.cosh(t)[..., None] * vhat

    def origin(self):
        o = np.zeros(self.ambient_dim)
        o[0] = 1.0
        return o


_KINDS = {"flat": Euclidean, "euclidean": Euclidean, "sphere": Sphere, "hyperbolic": Hyperbolic}


def make_manifold(kind: str, dim: int) -> Manifold:
    """Build a model manifold from its kind name (``flat``, ``sphere``, ``hyperbolic``)."""
    try:
        cls = _KINDS[kind.lower()]
    except KeyError:
        raise GeometryError(f"unknown manifold kind {kind!r}; expected one of flat, sphere, hyperbolic") from None
    return cls(dim)


# ---------------------------------------------------------------------------
# typed layer
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Point:
    manifold: Manifold
    coords: np.ndarray

    def __post_init__(self):
        c = self.manifold.check_point(np.array(self.coords, dtype=float))
        if c.ndim != 1:
            raise DimensionMismatch("a Point holds a single coordinate vector")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def __eq__(self, other):
        return (isinstance(other, Point) and self.manifold == other.manifold
                and np.array_equal(self.coords, other.coords))

    def __hash__(self):
        return hash((self.manifold, self.coords.tobytes()))


@dataclass(frozen=True, eq=False)
class Tangent:
    base: Point
    components: np.ndarray

    def __post_init__(self):
        c = self.base.manifold.check_tangent(
            self.base.coords, np.array(self.components, dtype=float))
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @property
    def manifold(self) -> Manifold:
        return self.base.manifold

    @property
    def norm(self) -> float:
        return float(self.manifold.norm(self.components))

    def __eq__(self, other):
        return (isinstance(other, Tangent) and self.base == other.base
                and np.array_equal(self.components, other.components))

    def __hash__(self):
        return hash((self.base, self.components.tobytes()))


@dataclass(frozen=True)
class Frame:
    base: Point
    vectors: tuple = field(default=())

    def matrix(self) -> np.ndarray:
        return np.array([v.components for v in self.vectors])


def _require_base(x: Point, v: Tangent):
    if v.base != x:
        raise BaseMismatch("tangent vector is not based at the given point")


def exp(x: Point, v: Tangent) -> Point:
    _require_base(x, v)
    return Point(x.manifold, x.manifold.exp(x.coords, v.components))


def log(x: Point, y: Point) -> Tangent:
    if x.manifold != y.manifold:
        raise ManifoldMismatch("points live on different manifolds")
    M = x.manifold
    if np.isfinite(M.injectivity_radius) and M.dist(x.coords, y.coords) >= M.injectivity_radius - 1e-9:
        raise AntipodalPoint("log is undefined at distance >= injectivity radius")
    v = M.project(x.coords, M.log(x.coords, y.coords))
    return Tangent(x, v)


def dist(x: Point, y: Point) -> float:
    if x.manifold != y.manifold:
        raise ManifoldMismatch("points live on different manifolds")
    return float(x.manifold.dist(x.coords, y.coords))


def dexp(x: Point, v: Tangent, w: Tangent) -> Tangent:
    _require_base(x, v)
    _require_base(x, w)
    M = x.manifold
    end = exp(x, v)
    out = M.project(end.coords, M.dexp(x.coords, v.components, w.components))
    return Tangent(end, out)


def volume_jacobian(x0: Point, y: Tangent) -> float:
    _require_base(x0, y)
    return float(x0.manifold.volume_jacobian(y.components))


def frame(x: Point) -> Frame:
    E = x.manifold.frame(x.coords)
    vecs = tuple(Tangent(x, x.manifold.project(x.coords, e)) for e in E)
    return Frame(x, vecs)


# ---------------------------------------------------------------------------
# ODE oracle
# ---------------------------------------------------------------------------
def geodesic_rk4(manifold: Manifold, x, v, w=None, step: float = 1e-3, t_end: float = 1.0):
    """Integrate the ambient geodesic and Jacobi equations with classical RK4.

    The geodesic of a constant-curvature model satisfies
    ``c'' = -k <c', c'> c`` in the ambient space, and the variation
    ``J = d/ds c_s`` with ``J(0) = 0``, ``J'(0) = w`` solves its
    linearisation ``J'' = -k (2 <c', J'> c + <c', c'> J)``. Since
    ``J(t) = dexp_x[t v](t w)``, the value at ``t_end = 1`` is
    ``dexp(x, v, w)``.

    Returns ``(c(t_end), J(t_end))``; ``J`` is ``None`` when ``w`` is omitted.
    Inputs broadcast over leading axes.
    """
    k = manifold.curvature
    inner = manifold.inner
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    with_jacobi = w is not None
    w = np.zeros_like(v) if w is None else np.broadcast_to(np.asarray(w, dtype=float), v.shape)
    state = np.stack(np.broadcast_arrays(x, v, np.zeros_like(v), w))

    def rhs(s):
        c, dc, J, dJ = s
        speed = inner(dc, dc)[..., None]
        ddc = -k * speed * c
        ddJ = -k * (2.0 * inner(dc, dJ)[..., None] * c + speed * J)
        return np.stack([dc, ddc, dJ, ddJ])

    steps = max(1, int(np.ceil(t_end / step - 1e-9)))
    h = t_end / steps
    for _ in range(steps):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * h * k1)
        k3 = rhs(state + 0.5 * h * k2)
        k4 = rhs(state + h * k3)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return state[0], (state[2] if with_jacobi else None)
