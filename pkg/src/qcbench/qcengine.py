"""Quasiconvexity deficits on exponential cubes, the radius-schedule verdict,
a multistart falsifier, and Euclidean cross-checks.

For ``f`` on ``L(TM, R^m)``, a base point ``x0``, a fiber element ``alpha``
at ``x0`` and a test function ``phi`` supported in ``Q^r_{x0}``, the deficit
is::

    avg_{Q^r_{x0}} f(alpha + d phi[x] o L_x) d mu  -  f(alpha),
    L_x = dexp_{x0}[log_{x0}(x)].

A quasiconvex integrand keeps the deficit above a correction that vanishes
as ``r -> 0`` for fixed ``||d phi||_inf``; :func:`check` looks for
violations that persist along a shrinking radius schedule.

A ``ConsistentWithQC`` verdict never certifies quasiconvexity. It only
reports that no violation was found.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bundle import CotangentStack, Integrand, pullback_matrices
from .errors import InjectivityViolation, ManifoldMismatch, ManifoldNotFlat, ScheduleInvalid
from .geometry import Euclidean, Point
from .perturbation import Mode, TestFunction, eval_dphi
from .quadrature import DEFAULT_ORDER, QuadGrid, average_integrate, build_cube, quad_grid

log = logging.getLogger(__name__)

CONSISTENT = "ConsistentWithQC"
VIOLATION = "ViolationFound"

EPS_SCALE = 1e-4
DEFAULT_RHO = 0.5
DEFAULT_R0 = 0.5


@dataclass(frozen=True)
class DeficitReport:
    r: float
    deficit: float
    grad_sup: float
    q: int
    phi_id: str

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Verdict:
    status: str
    evidence: tuple = ()
    threshold: float = 0.0
    note: str = ""
    phi: dict | None = None

    @property
    def violation(self) -> bool:
        return self.status == VIOLATION

    def to_dict(self) -> dict:
        return {"status": self.status, "threshold": self.threshold, "note": self.note,
                "phi": self.phi, "evidence": [e.to_dict() for e in self.evidence]}


def violation_threshold(grad_sup: float) -> float:
    """``eps = 1e-4 max(1, grad_sup^2)``; nondecreasing in ``grad_sup``."""
    return EPS_SCALE * max(1.0, grad_sup * grad_sup)


def _check_alpha(x0: Point, alpha: CotangentStack):
    if alpha.base != x0:
        raise ManifoldMismatch("alpha must be based at the cube centre")


def deficit(f: Integrand, x0: Point, alpha: CotangentStack, tf: TestFunction,
            grid: QuadGrid) -> DeficitReport:
    """Averaged quasiconvexity deficit of ``f`` at ``alpha`` for ``tf`` on ``grid``.

    At each node the analytic ``d phi`` is expressed in ``frame(x)`` and pulled
    back through ``L_x`` before ``f`` is evaluated at ``x0``.
    """
    _check_alpha(x0, alpha)
    if tf.cube != grid.cube:
        raise ValueError("test function and grid live on different cubes")
    if grid.cube.center != x0:
        raise ManifoldMismatch("grid is not centred at x0")
    if tf.m != alpha.m:
        raise ValueError(f"test function has m = {tf.m}, alpha has m = {alpha.m}")
    dphi_y = eval_dphi(tf, grid.nodes)                  # d(phi o exp)[y]
    dphi_x = np.matmul(dphi_y, grid.transport_inv)      # d phi[x] in frame(x)
    pulled = pullback_matrices(dphi_x, grid.transport)  # d phi[x] o L_x
    vals = f(x0.coords, alpha.matrix + pulled)
    avg = average_integrate(grid, vals)
    base = float(f(x0.coords, alpha.matrix))
    gsup = float(np.max(np.linalg.norm(dphi_y, axis=(-2, -1))))
    return DeficitReport(grid.cube.r, avg - base, gsup, grid.q, tf.phi_id)


def default_schedule(r0: float) -> tuple:
    return (r0, r0 / 2, r0 / 4)


def _validate_schedule(x0: Point, schedule) -> tuple:
    sched = tuple(float(r) for r in schedule)
    if not sched:
        raise ScheduleInvalid("radius schedule is empty")
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise ScheduleInvalid(f"radius schedule must be strictly decreasing, got {sched}")
    for r in sched:
        try:
            build_cube(x0, r)
        except InjectivityViolation as exc:
            raise ScheduleInvalid(f"radius {r} is not cube-valid: {exc}") from exc
    return sched


def decide(evidence, eps: float | None = None, rho: float = DEFAULT_RHO) -> tuple[str, float]:
    """Apply the persistence rule to deficits ordered by decreasing radius.

    A violation needs every deficit ``<= -eps`` and no halving step in
    which the violation shrinks toward zero by more than the factor
    ``rho``, i.e. ``|d_{i+1}| >= rho |d_i|``.
    """
    if eps is None:
        eps = violation_threshold(max(e.grad_sup for e in evidence))
    ds = [e.deficit for e in evidence]
    persistent = all(d <= -eps for d in ds)
    stable = all(abs(b) >= rho * abs(a) for a, b in zip(ds, ds[1:]))
    return (VIOLATION if persistent and stable else CONSISTENT), eps


def check(f: Integrand, x0: Point, alpha: CotangentStack, tf: TestFunction, schedule=None,
          q: int = DEFAULT_ORDER, eps: float | None = None, rho: float = DEFAULT_RHO) -> Verdict:
    """Run :func:`deficit` along a shrinking radius schedule and decide.

    ``tf`` is rescaled to each radius with its normalized shape fixed, so
    ``grad_sup`` stays the same across the schedule. The default schedule
    is ``(r0, r0/2, r0/4)`` with ``r0 = tf.cube.r``.
    """
    _check_alpha(x0, alpha)
    sched = _validate_schedule(x0, default_schedule(tf.cube.r) if schedule is None else schedule)
    evidence = []
    for r in sched:
        cube = build_cube(x0, r)
        evidence.append(deficit(f, x0, alpha, tf.rescaled(cube), quad_grid(cube, q)))
    status, eps = decide(evidence, eps, rho)
    note = "persistent violation across the schedule" if status == VIOLATION else \
        "no persistent violation on this test function"
    return Verdict(status, tuple(evidence), eps, note, tf.descriptor())


# ---------------------------------------------------------------------------
# falsifier
# ---------------------------------------------------------------------------
def _random_laminate(rng, n: int, m: int, r0: float, max_modes: int) -> list[Mode]:
    modes = []
    for _ in range(int(rng.integers(1, max_modes + 1))):
        b = rng.normal(size=m)
        b /= np.linalg.norm(b)
        nu = np.zeros(n, dtype=int)
        while not nu.any():
            nu = rng.integers(-2, 3, size=n)
        a = rng.uniform(0.2, 1.0) * r0 / (2 * math.pi * np.linalg.norm(nu))
        modes.append(Mode(a, tuple(nu), rng.uniform(0, 2 * math.pi), tuple(b)))
    return modes


def _pack(modes, m):
    return np.concatenate([[md.amplitude, md.phase, *md.vector] for md in modes])


def _unpack(theta, template, m):
    out = []
    for k, md in enumerate(template):
        chunk = theta[k * (m + 2):(k + 1) * (m + 2)]
        out.append(Mode(chunk[0], md.freq, chunk[1], tuple(chunk[2:])))
    return out


def _coordinate_search(score, theta, step, amp_cap, m, max_evals: int):
    """Derivative-free descent: try +-step per coordinate, halve on failure."""
    best = score(theta)
    evals = 1
    step = np.array(step, dtype=float)
    while evals < max_evals and np.max(step) > 1e-4:
        improved = False
        for i in range(len(theta)):
            for sgn in (1.0, -1.0):
                if evals >= max_evals:
                    break
                trial = theta.copy()
                trial[i] += sgn * step[i]
                if i % (m + 2) == 0:
                    trial[i] = float(np.clip(trial[i], -amp_cap, amp_cap))
                elif i % (m + 2) >= 2:
                    trial[i] = float(np.clip(trial[i], -2.0, 2.0))
                val = score(trial)
                evals += 1
                if val < best:
                    best, theta, improved = val, trial, True
                    break
        if not improved:
            step *= 0.5
    return theta, best


def falsify(f: Integrand, x0: Point, alpha: CotangentStack, budget: int = 50, seed: int = 0,
            r0: float = DEFAULT_R0, q: int = DEFAULT_ORDER, max_modes: int = 3,
            finalists: int = 3, local_evals: int = 40, max_workers: int | None = None) -> Verdict:
    """Multistart search for a persistent quasiconvexity violation.

    ``budget`` random laminate test functions (up to ``max_modes`` modes
    ``b (x) nu`` each) are scored by their deficit at ``r0``. The best few are
    refined by coordinate search over amplitudes, phases and ``b`` and then
    passed to :func:`check`. The first violating finalist is returned.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    _check_alpha(x0, alpha)
    n, m = x0.manifold.dim, alpha.m
    cube = build_cube(x0, r0)
    grid = quad_grid(cube, q)
    rng = np.random.default_rng(seed)
    candidates = [TestFunction(cube, tuple(_random_laminate(rng, n, m, r0, max_modes)))
                  for _ in range(budget)]

    def score(tf):
        return deficit(f, x0, alpha, tf, grid).deficit

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            scores = list(pool.map(score, candidates))
    else:
        scores = [score(tf) for tf in candidates]
    order = sorted(range(budget), key=lambda i: (scores[i], i))
    log.debug("falsify: best initial deficit %.6g", scores[order[0]])

    amp_cap = r0 / math.pi
    best_verdict = None
    for idx in order[:finalists]:
        tf = candidates[idx]
        theta0 = _pack(tf.modes, m)
        step = np.where(np.arange(len(theta0)) % (m + 2) == 0, 0.25 * np.abs(theta0) + 1e-3, 0.25)
        theta, _ = _coordinate_search(
            lambda th: score(TestFunction(cube, tuple(_unpack(th, tf.modes, m)))),
            theta0, step, amp_cap, m, local_evals)
        refined = TestFunction(cube, tuple(_unpack(theta, tf.modes, m)))
        verdict = check(f, x0, alpha, refined, q=q)
        if verdict.violation:
            return verdict
        if best_verdict is None or min(e.deficit for e in verdict.evidence) < \
                min(e.deficit for e in best_verdict.evidence):
            best_verdict = verdict
    return Verdict(CONSISTENT, best_verdict.evidence, best_verdict.threshold,
                   f"no violation found within budget {budget}", best_verdict.phi)


# ---------------------------------------------------------------------------
# Euclidean oracles
# ---------------------------------------------------------------------------
def euclid_morrey_check(f_tilde, A, tf: TestFunction, grid: QuadGrid) -> float:
    """Classical Morrey deficit ``avg_Q f(x, A + D phi(x)) dx - f(x0, A)`` on a flat cube.

    Evaluated with the flat tensor weights only; no exponential map,
    transport or Jacobian is involved.
    """
    M = grid.manifold
    if M.kind != "flat":
        raise ManifoldNotFlat(f"Morrey check needs a flat manifold, got {M!r}")
    if tf.cube != grid.cube:
        raise ValueError("test function and grid live on different cubes")
    A = np.asarray(A, dtype=float)
    x0 = grid.cube.center.coords
    xs = x0 + grid.nodes
    vals = np.asarray(f_tilde(xs, A + eval_dphi(tf, grid.nodes)), dtype=float)
    avg = math.fsum(grid.weights * vals) / math.fsum(grid.weights)
    return avg - float(f_tilde(x0, A))


@dataclass(frozen=True)
class RankOneReport:
    t: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    second_differences: np.ndarray = field(repr=False)
    convex: bool
    affine: bool

    @property
    def non_convex_direction(self) -> bool:
        return not self.convex


def rank_one_probe(f_tilde, A, b, nu, samples: int = 21, t_max: float = 1.0,
                   tol: float = 1e-10, affine_tol: float = 1e-12) -> RankOneReport:
    """Second differences of ``t -> f(A + t b (x) nu)`` on ``[-t_max, t_max]``."""
    if samples < 3:
        raise ValueError("rank-one probe needs at least 3 samples")
    A = np.asarray(A, dtype=float)
    direction = np.outer(np.asarray(b, dtype=float), np.asarray(nu, dtype=float))
    t = np.linspace(-t_max, t_max, samples)
    vals = np.asarray(f_tilde(None, A + t[:, None, None] * direction), dtype=float)
    d2 = vals[2:] - 2 * vals[1:-1] + vals[:-2]
    return RankOneReport(t, vals, d2, bool(np.all(d2 >= -tol)), bool(np.all(np.abs(d2) <= affine_tol)))


def flat_counterpart(tf: TestFunction) -> TestFunction:
    """The same test function on the flat cube of equal radius at the origin."""
    M = Euclidean(tf.dim)
    return TestFunction(build_cube(Point(M, np.zeros(tf.dim)), tf.cube.r), tf.modes, tf.bump)
