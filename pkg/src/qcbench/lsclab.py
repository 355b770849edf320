"""Lower-semicontinuity experiments with oscillating weak* sequences.

A base map ``u(x) = A log_{x0}(x) + c`` (normal coordinates at ``x0``) is
perturbed by ``phi_h(x) = (1/h) psi(h log_{x0}(x))``. The sequence
``u_h = u + phi_h`` converges weakly* to ``u`` in ``W^{1,inf}`` on the cube,
and the experiment compares ``F(u_h, Q) = int_Q f(du_h) d mu`` with
``F(u, Q)``.

Each ``h`` is integrated on a composite grid with ``h`` cells per axis so
that every cell carries one period of ``psi(h .)`` at the base order ``q``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bundle import Integrand
from .errors import ManifoldMismatch
from .geometry import Point
from .perturbation import OscillationSequence, oscillate_at
from .quadrature import QuadGrid, integrate, quad_grid

OK = "SEMICONTINUITY_OK"
FAIL = "SEMICONTINUITY_FAIL"
WEAKSTAR_OK = "WEAKSTAR_OK"
WEAKSTAR_FAIL = "WEAKSTAR_FAIL"
DEGENERATE = "DEGENERATE"

DECAY_TOL = 0.05
TAIL = 3


@dataclass(frozen=True, eq=False)
class BaseMap:
    """``u(x) = A log_{x0}(x) + c`` with ``A`` an ``m x n`` matrix."""

    x0: Point
    A: np.ndarray
    c: np.ndarray | None = None

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        if A.shape[1] != self.x0.manifold.dim:
            raise ValueError(f"A must have n = {self.x0.manifold.dim} columns, got {A.shape}")
        c = np.zeros(A.shape[0]) if self.c is None else np.array(self.c, dtype=float)
        if c.shape != (A.shape[0],):
            raise ValueError("c must have length m")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def value_on(self, grid: QuadGrid) -> np.ndarray:
        return grid.nodes @ self.A.T + self.c

    def differential_on(self, grid: QuadGrid) -> np.ndarray:
        """``du[x]`` in ``frame(x)``: ``A dexp_{x0}[y]^{-1}``."""
        return np.matmul(self.A, grid.transport_inv)


@dataclass(frozen=True)
class OscillatedMap:
    """``u_h = u + phi_h`` with analytic differential."""

    base: BaseMap
    seq: OscillationSequence
    h: int

    def on_grid(self, grid: QuadGrid):
        """Values, differentials, and the perturbation values on ``grid``."""
        pv, pd = oscillate_at(self.seq, self.h, grid.nodes, grid.transport_inv)
        return self.base.value_on(grid) + pv, self.base.differential_on(grid) + pd, pv


def build_sequence(u: BaseMap, seq: OscillationSequence, h_list=None) -> list[OscillatedMap]:
    if seq.cube.center != u.x0:
        raise ManifoldMismatch("oscillation sequence and base map use different centres")
    if seq.base.m != u.m:
        raise ValueError(f"oscillation has m = {seq.base.m}, base map has m = {u.m}")
    hs = seq.h_list if h_list is None else OscillationSequence(seq.base, tuple(h_list)).h_list
    return [OscillatedMap(u, seq, h) for h in hs]


def oscillation_grid(grid: QuadGrid, h: int) -> QuadGrid:
    """Composite refinement of ``grid`` with ``h`` times as many cells per axis."""
    return quad_grid(grid.cube, grid.q, grid.cells * h)


@dataclass(frozen=True)
class LscRow:
    h: int
    F_uh: float
    sup_diff: float
    grad_sup: float


@dataclass(frozen=True)
class WeakStarDiagnostics:
    status: str
    decay_exponent: float | None
    max_grad: float
    grad_bound: float
    psi_sup: float
    dpsi_sup: float

    @property
    def passed(self) -> bool:
        return self.status != WEAKSTAR_FAIL

    def to_dict(self) -> dict:
        return dict(asdict(self), passed=self.passed)


@dataclass(frozen=True)
class LscReport:
    rows: tuple
    F_u: float
    gap: float
    tol: float
    flag: str
    diagnostics: WeakStarDiagnostics | None = field(default=None)

    @property
    def ok(self) -> bool:
        return self.flag == OK

    def to_dict(self) -> dict:
        return {"F_u": self.F_u, "gap": self.gap, "tol": self.tol, "flag": self.flag,
                "rows": [asdict(r) for r in self.rows],
                "diagnostics": None if self.diagnostics is None else self.diagnostics.to_dict()}


def _sample(member: OscillatedMap, grid: QuadGrid):
    g = oscillation_grid(grid, member.h)
    values, diffs, pert = member.on_grid(g)
    return g, values, diffs, pert


def weakstar_diagnostics(u: BaseMap, members, grid: QuadGrid) -> WeakStarDiagnostics:
    """Witness weak* convergence: sup-norm decay like ``1/h`` and bounded gradients.

    The gradient bound is ``(||A|| + ||d psi||_inf) sup ||dexp^{-1}||``,
    with ``||d psi||_inf`` taken over a dense period sample and every
    argument ``h y`` actually visited.
    """
    members = list(members)
    if not members:
        return WeakStarDiagnostics(DEGENERATE, None, 0.0, 0.0, 0.0, 0.0)
    psi = members[0].seq.psi
    psi_sup, dpsi_sup = psi.sup_norms()
    hs, sups, grads, inv_norms = [], [], [], []
    for mem in members:
        g, _, diffs, pert = _sample(mem, grid)
        hs.append(mem.h)
        sups.append(float(np.max(np.linalg.norm(pert, axis=-1))))
        grads.append(float(np.max(np.linalg.norm(diffs, axis=(-2, -1)))))
        dpsi_sup = max(dpsi_sup, float(np.max(np.linalg.norm(psi.grad(mem.h * g.nodes), axis=(-2, -1)))))
        inv_norms.append(float(np.max(np.linalg.norm(g.transport_inv, ord=2, axis=(-2, -1)))))
    bound = (float(np.linalg.norm(u.A)) + dpsi_sup) * max(inv_norms)
    max_grad = max(grads)
    grad_ok = max_grad <= bound * (1 + 1e-12)
    if max(sups) == 0.0:
        return WeakStarDiagnostics(DEGENERATE, None, max_grad, bound, psi_sup, dpsi_sup)
    if len(hs) < 2 or min(sups) <= 0.0:
        status = WEAKSTAR_FAIL
        exponent = None
    else:
        exponent = float(np.polyfit(np.log(hs), np.log(sups), 1)[0])
        status = WEAKSTAR_OK if abs(exponent + 1.0) <= DECAY_TOL and grad_ok else WEAKSTAR_FAIL
    if not grad_ok:
        status = WEAKSTAR_FAIL
    return WeakStarDiagnostics(status, exponent, max_grad, bound, psi_sup, dpsi_sup)


def functional(f: Integrand, grid: QuadGrid, diffs) -> float:
    """``F = int_Q f(x, du[x]) d mu`` from frame differentials at the nodes."""
    return integrate(grid, f(grid.points, diffs))


def run_lsc(f: Integrand, u: BaseMap, seq: OscillationSequence, h_list=None,
            grid: QuadGrid | None = None, tail: int = TAIL,
            max_workers: int | None = None) -> LscReport:
    """Compare ``F(u_h)`` with ``F(u)`` along the oscillation sequence.

    The liminf is estimated by the minimum of ``F(u_h) - F(u)`` over the
    ``tail`` largest ``h``. The flag is ``SEMICONTINUITY_OK`` when that gap
    is at least ``-1e-6 (1 + |F(u)|)``.
    """
    if grid is None:
        grid = quad_grid(seq.cube, 8)
    if grid.cube != seq.cube:
        raise ValueError("grid and oscillation sequence live on different cubes")
    members = build_sequence(u, seq, h_list)
    F_u = functional(f, grid, u.differential_on(grid))

    def evaluate(mem):
        g, _, diffs, pert = _sample(mem, grid)
        return LscRow(mem.h, functional(f, g, diffs),
                      float(np.max(np.linalg.norm(pert, axis=-1))),
                      float(np.max(np.linalg.norm(diffs, axis=(-2, -1)))))

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            rows = tuple(pool.map(evaluate, members))
    else:
        rows = tuple(evaluate(mem) for mem in members)
    tol = 1e-6 * (1.0 + abs(F_u))
    gap = min(row.F_uh - F_u for row in rows[-tail:]) if rows else math.inf
    flag = OK if gap >= -tol else FAIL
    return LscReport(rows, F_u, gap, tol, flag, weakstar_diagnostics(u, members, grid))
