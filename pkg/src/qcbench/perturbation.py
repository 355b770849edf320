"""Test functions on exponential cubes and their oscillating rescalings.

A :class:`TestFunction` lives in normal coordinates ``y`` of ``T_{x0} M``
(frame components) and is a bump-modulated sum of sine modes::

    phi(y) = eta(2 y / r) * sum_k a_k sin(2 pi <kappa_k, y> / r + theta_k) b_k

with ``eta(s) = prod_i beta(s_i)`` and ``beta(t) = exp(1 - 1/(1 - t^2))``
on ``|t| < 1`` (so ``beta(0) = 1``). Without the bump the modes are
``r``-periodic, which is how the oscillation sequences are built.

Because ``phi`` is given in normal coordinates, ``d(phi o exp_{x0})[y]`` is the
Euclidean Jacobian returned by :func:`eval_dphi`; the differential of
``phi`` at ``x = exp(y)`` in ``frame(x)`` is that Jacobian times
``dexp_{x0}[y]^{-1}``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry
from .errors import DimensionMismatch, OutOfInjectivityRadius, OutsideCube
from .quadrature import CubeSpec, QuadGrid

_CUBE_TOL = 1e-12


@dataclass(frozen=True)
class Mode:
    """One sine mode ``a sin(2 pi <freq, y>/r + phase) vector``."""

    amplitude: float
    freq: tuple
    phase: float
    vector: tuple

    def __post_init__(self):
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "phase", float(self.phase))
        freq = tuple(int(k) for k in np.atleast_1d(self.freq))
        if not np.allclose(freq, np.atleast_1d(self.freq)):
            raise ValueError(f"mode frequencies must be integers, got {self.freq}")
        object.__setattr__(self, "freq", freq)
        object.__setattr__(self, "vector", tuple(float(b) for b in np.atleast_1d(self.vector)))

    def to_dict(self) -> dict:
        return {"amplitude": self.amplitude, "freq": list(self.freq),
                "phase": self.phase, "vector": list(self.vector)}


def laminate(b, nu, amplitude: float = 1.0, phase: float = 0.0) -> Mode:
    """Rank-one mode whose gradient (bump aside) is proportional to ``b (x) nu``."""
    return Mode(amplitude, tuple(nu), phase, tuple(b))


def _beta(t):
    s = 1.0 - t * t
    inside = s > 0
    safe = np.where(inside, s, 1.0)
    val = np.where(inside, np.exp(1.0 - 1.0 / safe), 0.0)
    dval = np.where(inside, val * (-2.0 * t / (safe * safe)), 0.0)
    return val, dval


@dataclass(frozen=True)
class TestFunction:
    __test__ = False  # not a pytest class

    cube: CubeSpec
    modes: tuple
    bump: bool = True

    def __post_init__(self):
        modes = tuple(m if isinstance(m, Mode) else Mode(**m) for m in self.modes)
        object.__setattr__(self, "modes", modes)
        n = self.cube.dim
        ms = {len(mode.vector) for mode in modes}
        if len(ms) > 1:
            raise DimensionMismatch("all modes need output vectors of the same length")
        if any(len(mode.freq) != n for mode in modes):
            raise DimensionMismatch(f"mode frequencies must have length n = {n}")

    @property
    def m(self) -> int:
        return len(self.modes[0].vector) if self.modes else 0

    @property
    def dim(self) -> int:
        return self.cube.dim

    @property
    def r(self) -> float:
        return self.cube.r

    def rescaled(self, cube: CubeSpec) -> "TestFunction":
        """Same normalized shape on another cube; amplitudes scale with ``r``.

        ``phi_new(y) = (r_new / r) phi(y r / r_new)``, hence ``d phi`` is
        unchanged pointwise in normalized coordinates.
        """
        s = cube.r / self.cube.r
        modes = tuple(replace(mode, amplitude=mode.amplitude * s) for mode in self.modes)
        return replace(self, cube=cube, modes=modes)

    def scaled(self, s: float) -> "TestFunction":
        modes = tuple(replace(mode, amplitude=mode.amplitude * s) for mode in self.modes)
        return replace(self, modes=modes)

    def descriptor(self) -> dict:
        return {"r": self.cube.r, "bump": self.bump, "modes": [m.to_dict() for m in self.modes]}

    @property
    def phi_id(self) -> str:
        """Short content hash identifying the mode shape (radius excluded)."""
        d = self.descriptor()
        d["modes"] = [dict(m, amplitude=m["amplitude"] / self.cube.r) for m in d["modes"]]
        del d["r"]
        blob = json.dumps(d, sort_keys=True).encode()
        return "phi-" + hashlib.sha1(blob).hexdigest()[:10]


def _trig_parts(modes, r, y):
    """Sum of modes and its Jacobian at normal coordinates ``y`` (N, n)."""
    N, n = y.shape
    m = len(modes[0].vector) if modes else 0
    S = np.zeros((N, m))
    dS = np.zeros((N, m, n))
    for mode in modes:
        kappa = np.asarray(mode.freq, dtype=float)
        b = np.asarray(mode.vector)
        arg = (2 * math.pi / r) * (y @ kappa) + mode.phase
        S += mode.amplitude * np.sin(arg)[:, None] * b
        coef = mode.amplitude * (2 * math.pi / r) * np.cos(arg)
        dS += coef[:, None, None] * (b[:, None] * kappa[None, :])
    return S, dS


def _as_coords(tf: TestFunction, y) -> tuple[np.ndarray, tuple]:
    if isinstance(y, geometry.Tangent):
        y = y.manifold.components(y.base.coords, y.components)
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != tf.dim:
        raise DimensionMismatch(f"expected {tf.dim} normal coordinates, got shape {y.shape}")
    return y.reshape(-1, tf.dim), y.shape[:-1]


def _evaluate(tf: TestFunction, Y: np.ndarray, want_grad: bool):
    r = tf.r
    S, dS = _trig_parts(tf.modes, r, Y)
    if not tf.bump:
        return S, dS
    beta, dbeta = _beta(2.0 * Y / r)
    eta = np.prod(beta, axis=1)
    phi = eta[:, None] * S
    if not want_grad:
        return phi, None
    n = tf.dim
    grad_eta = np.empty_like(Y)
    for i in range(n):
        others = np.prod(np.delete(beta, i, axis=1), axis=1) if n > 1 else 1.0
        grad_eta[:, i] = (2.0 / r) * dbeta[:, i] * others
    dphi = eta[:, None, None] * dS + S[:, :, None] * grad_eta[:, None, :]
    return phi, dphi


def _check_inside(tf: TestFunction, Y):
    if np.any(np.abs(Y) > tf.r / 2 * (1 + _CUBE_TOL)):
        raise OutsideCube("point lies outside the closed cube")


def eval_phi(tf: TestFunction, y) -> np.ndarray:
    """Values ``phi(y)`` with shape ``(..., m)``."""
    Y, batch = _as_coords(tf, y)
    _check_inside(tf, Y)
    phi, _ = _evaluate(tf, Y, want_grad=False)
    return phi.reshape(batch + (tf.m,))


def eval_dphi(tf: TestFunction, y) -> np.ndarray:
    """Jacobians ``d phi(y)`` with shape ``(..., m, n)``."""
    Y, batch = _as_coords(tf, y)
    _check_inside(tf, Y)
    _, dphi = _evaluate(tf, Y, want_grad=True)
    return dphi.reshape(batch + (tf.m, tf.dim))


def grad_sup(tf: TestFunction, grid: QuadGrid) -> float:
    """Max Frobenius norm of ``d phi`` over the grid nodes."""
    return float(np.max(np.linalg.norm(eval_dphi(tf, grid.nodes), axis=(-2, -1))))


@dataclass(frozen=True)
class PeriodicExtension:
    """``r``-periodic extension ``psi`` of a test function to all of ``T_{x0} M``."""

    tf: TestFunction

    @property
    def period(self) -> float:
        return self.tf.r

    def _reduce(self, w):
        W, batch = _as_coords(self.tf, w)
        if self.tf.bump:
            r = self.tf.r
            W = W - r * np.round(W / r)
        return W, batch

    def value(self, w) -> np.ndarray:
        W, batch = self._reduce(w)
        return _evaluate(self.tf, W, want_grad=False)[0].reshape(batch + (self.tf.m,))

    def grad(self, w) -> np.ndarray:
        W, batch = self._reduce(w)
        return _evaluate(self.tf, W, want_grad=True)[1].reshape(batch + (self.tf.m, self.tf.dim))

    def __call__(self, w):
        return self.value(w)

    def sup_norms(self, samples: int = 129) -> tuple[float, float]:
        """Sampled ``(||psi||_inf, ||d psi||_inf)`` over one period cell."""
        n, r = self.tf.dim, self.tf.r
        if n == 3:
            samples = min(samples, 41)
        t = np.linspace(-r / 2, r / 2, samples)
        W = np.stack([g.ravel() for g in np.meshgrid(*([t] * n), indexing="ij")], axis=-1)
        v = self.value(W)
        d = self.grad(W)
        return float(np.max(np.linalg.norm(v, axis=-1))), float(np.max(np.linalg.norm(d, axis=(-2, -1))))


def periodize(tf: TestFunction) -> PeriodicExtension:
    return PeriodicExtension(tf)


@dataclass(frozen=True)
class OscillationSequence:
    """Periodic profile ``psi`` together with the indices ``h`` to visit.

    A bump-free base must vanish at the cube corners lattice, which for
    sine modes means every phase is a multiple of ``pi``.
    """

    base: TestFunction
    h_list: tuple = field(default=(4, 8, 16, 32))

    def __post_init__(self):
        hs = tuple(int(h) for h in self.h_list)
        if any(h < 1 for h in hs) or any(b <= a for a, b in zip(hs, hs[1:])):
            raise ValueError(f"h_list must be strictly increasing positive integers, got {self.h_list}")
        object.__setattr__(self, "h_list", hs)
        if not self.base.bump:
            for mode in self.base.modes:
                k = mode.phase / math.pi
                if abs(k - round(k)) > 1e-12:
                    raise ValueError(
                        "bump-free oscillation modes need phases in pi*Z to vanish on the lattice")

    @property
    def psi(self) -> PeriodicExtension:
        return periodize(self.base)

    @property
    def cube(self) -> CubeSpec:
        return self.base.cube


def oscillate(seq: OscillationSequence, h: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Value ``(1/h) psi(h log_{x0}(x))`` and its differential in ``frame(x)``.

    ``x`` is a :class:`~qcbench.geometry.Point` or an array of point
    coordinates ``(..., ambient)``. The differential is
    ``d psi[h y] o dexp_{x0}[y]^{-1}``; the factors ``h`` and ``1/h`` cancel.
    """
    if h < 1:
        raise ValueError(f"h must be >= 1, got {h}")
    cube = seq.cube
    M = cube.manifold
    x0 = cube.center.coords
    coords = x.coords if isinstance(x, geometry.Point) else np.asarray(x, dtype=float)
    if np.isfinite(M.injectivity_radius) and np.any(M.dist(x0, coords) >= M.injectivity_radius - 1e-9):
        raise OutOfInjectivityRadius("point is beyond the injectivity radius of the cube centre")
    v = M.log(x0, coords)
    y = M.components(x0, v)
    D = M.dexp_matrix(x0, v)
    return oscillate_at(seq, h, y, np.linalg.inv(D))


def oscillate_at(seq: OscillationSequence, h: int, y, transport_inv):
    """:func:`oscillate` at precomputed normal coordinates and inverse transport."""
    psi = seq.psi
    y = np.asarray(y, dtype=float)
    value = psi.value(h * y) / h
    diff = np.matmul(psi.grad(h * y), transport_inv)
    return value, diff
