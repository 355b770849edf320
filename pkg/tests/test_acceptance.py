"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -s`` or
``python3 tests/test_acceptance.py``.
"""
import math
import time

import numpy as np
import pytest
import yaml

from qcbench import cli, lsclab, qcengine
from qcbench.bundle import CotangentStack, get_integrand
from qcbench.config import fixture_names, fixture_path, load_config
from qcbench.geometry import Euclidean, Hyperbolic, Point, Sphere, geodesic_rk4
from qcbench.perturbation import Mode, OscillationSequence, TestFunction, eval_dphi
from qcbench.quadrature import build_cube, quad_grid

QUAD, NEG, DET = (get_integrand(k) for k in ("quad", "neg_quad", "det"))
MANIFOLDS = [Euclidean(2), Sphere(2), Hyperbolic(2)]


def _report(capsys, n, ok, detail, elapsed, limit=None):
    within = limit is None or elapsed < limit
    status = "PASS" if ok and within else "FAIL"
    budget = "" if limit is None else f" (budget {limit:g} s)"
    with capsys.disabled():
        print(f"\nAC{n} {status}: {detail}; {elapsed:.2f} s{budget}")
    assert ok, detail
    assert within, f"took {elapsed:.2f} s, budget {limit} s"


def _random_tf(cube, rng, max_modes=3, amp=0.05):
    n = cube.dim
    modes = []
    for _ in range(int(rng.integers(1, max_modes + 1))):
        nu = np.zeros(n, dtype=int)
        while not nu.any():
            nu = rng.integers(-2, 3, size=n)
        modes.append(Mode(rng.uniform(0.2, 1.0) * amp, tuple(nu), rng.uniform(0, 2 * np.pi),
                          tuple(rng.normal(size=2))))
    return TestFunction(cube, tuple(modes))


def _flat_mean_sq(tf, q=96):
    """Flat-cube mean of |D phi|^2 from a tensor rule built independently of quad_grid."""
    t, w = np.polynomial.legendre.leggauss(q)
    x = t * tf.r / 2
    X, Y = np.meshgrid(x, x, indexing="ij")
    D = eval_dphi(tf, np.stack([X.ravel(), Y.ravel()], -1))
    return math.fsum(np.outer(w, w).ravel() / 4 * np.sum(D * D, axis=(-2, -1)))


def test_ac1_geometry_oracle(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for M in (Sphere(2), Hyperbolic(2)):
        X = np.array([M.random_point(rng) for _ in range(100)])
        V = np.array([M.random_tangent(x, rng, 1.0) for x in X])
        W = np.array([M.random_tangent(x, rng, 1.0) for x in X])
        end, J = geodesic_rk4(M, X, V, W, step=1e-3)
        worst = max(worst, np.max(np.abs(end - M.exp(X, V))), np.max(np.abs(J - M.dexp(X, V, W))))
    _report(capsys, 1, worst <= 1e-6, f"max |closed form - RK4| = {worst:.2e} (tol 1e-6)",
            time.perf_counter() - t0, 10)


def test_ac2_jacobian_limit(capsys):
    t0 = time.perf_counter()
    radii = np.array([0.4, 0.2, 0.1, 0.05])
    slopes = []
    for M in (Sphere(2), Hyperbolic(2)):
        sups = []
        for r in radii:
            t = np.linspace(-r / 2, r / 2, 41)
            Y = np.stack(np.meshgrid(t, t, indexing="ij"), -1).reshape(-1, 2)
            sups.append(np.max(np.abs(M.volume_jacobian(M.from_components(M.origin(), Y)) - 1)))
        slopes.append(float(np.polyfit(np.log(radii), np.log(sups), 1)[0]))
    ok = all(abs(s - 2) <= 0.1 for s in slopes)
    _report(capsys, 2, ok, f"log-log slopes S2 {slopes[0]:.4f}, H2 {slopes[1]:.4f} (2 +- 0.1)",
            time.perf_counter() - t0, 5)


def test_ac3_euclidean_reduction(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    x0 = Point(Euclidean(2), [0.0, 0.0])
    cube = build_cube(x0, 0.5)
    grid = quad_grid(cube)
    worst = 0.0
    for _ in range(20):
        A = rng.normal(size=(2, 2))
        tf = _random_tf(cube, rng)
        d = qcengine.deficit(QUAD, x0, CotangentStack(x0, A), tf, grid).deficit
        worst = max(worst, abs(d - qcengine.euclid_morrey_check(QUAD, A, tf, grid)))
    _report(capsys, 3, worst <= 1e-10, f"max |deficit - Morrey| = {worst:.2e} over 20 pairs (tol 1e-10)",
            time.perf_counter() - t0, 10)


def test_ac4_convex_consistency(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    failures, margin = [], math.inf
    for M in MANIFOLDS:
        for _ in range(10):
            x0 = Point(M, M.random_point(rng, 1.0))
            alpha = CotangentStack(x0, rng.normal(size=(2, 2)))
            tf = _random_tf(build_cube(x0, 0.5), rng)
            v = qcengine.check(QUAD, x0, alpha, tf)
            for e in v.evidence:
                eps = qcengine.violation_threshold(e.grad_sup)
                margin = min(margin, e.deficit + eps)
            if v.status != qcengine.CONSISTENT or any(
                    e.deficit < -qcengine.violation_threshold(e.grad_sup) for e in v.evidence):
                failures.append((repr(M), v.status))
    _report(capsys, 4, not failures, f"30 configs, failures {len(failures)}, min deficit + eps = {margin:.3e}",
            time.perf_counter() - t0, 60)


def test_ac5_null_lagrangian(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    x0 = Point(Euclidean(2), [0.0, 0.0])
    worst = 0.0
    for _ in range(10):
        alpha = CotangentStack(x0, rng.normal(size=(2, 2)))
        v = qcengine.check(DET, x0, alpha, _random_tf(build_cube(x0, 0.5), rng))
        worst = max(worst, max(abs(e.deficit) for e in v.evidence))
    _report(capsys, 5, worst <= 1e-8, f"max |det deficit| = {worst:.2e} over 10 (A, phi) x 3 radii (tol 1e-8)",
            time.perf_counter() - t0, 30)


def _phi_from_descriptor(desc):
    cube = build_cube(Point(Euclidean(2), [0.0, 0.0]), desc["r"])
    return TestFunction(cube, tuple(Mode(**m) for m in desc["modes"]), desc["bump"])


def test_ac6_falsification(capsys):
    t0 = time.perf_counter()
    details, ok = [], True
    for M, seed in ((Euclidean(2), 7), (Sphere(2), 11)):
        x0 = Point(M, M.origin())
        alpha = CotangentStack(x0, np.array([[1.0, 0.3], [0.2, 1.0]]))
        v = qcengine.falsify(NEG, x0, alpha, budget=50, seed=seed)
        again = qcengine.falsify(NEG, x0, alpha, budget=50, seed=seed)
        oracle = _flat_mean_sq(_phi_from_descriptor(v.phi))
        ds = [e.deficit for e in v.evidence]
        stable = max(abs(d) for d in ds) <= 2 * min(abs(d) for d in ds)
        this = (v.status == qcengine.VIOLATION and v.to_dict() == again.to_dict()
                and all(d <= -0.1 * oracle for d in ds) and stable)
        ok &= this
        details.append(f"{M!r}: {v.status}, deficits {', '.join(f'{d:.4g}' for d in ds)}, "
                       f"flat oracle {oracle:.4g}")
    _report(capsys, 6, ok, "; ".join(details), time.perf_counter() - t0, 60)


def test_ac7_curvature_correction_decay(capsys):
    t0 = time.perf_counter()
    S = Sphere(2)
    x0 = Point(S, S.origin())
    alpha = CotangentStack(x0, np.array([[1.0, 0.3], [0.2, 1.0]]))
    base = TestFunction(build_cube(x0, 0.5), (Mode(0.04, (1, 1), 0.3, (1.0, 0.5)),
                                              Mode(0.03, (0, 1), 1.0, (-0.2, 1.0))))
    corr = []
    for r in (0.5, 0.25, 0.125, 0.0625):
        cube = build_cube(x0, r)
        tf = base.rescaled(cube)
        d = qcengine.deficit(QUAD, x0, alpha, tf, quad_grid(cube)).deficit
        corr.append(abs(d - _flat_mean_sq(tf)))
    ok = all(b < a for a, b in zip(corr, corr[1:])) and corr[-1] <= 0.25 * corr[0]
    _report(capsys, 7, ok, "corrections " + ", ".join(f"{c:.3e}" for c in corr) +
            f" (last/first {corr[-1] / corr[0]:.4f})", time.perf_counter() - t0, 30)


def test_ac8_semicontinuity_direction(capsys):
    t0 = time.perf_counter()
    results = []
    for M in MANIFOLDS:
        cube = build_cube(Point(M, M.origin()), 0.5)
        modes = (Mode(0.05, (1, 0), 0.0, (1.0, 0.5)), Mode(0.03, (1, 1), np.pi, (0.0, 1.0)))
        seq = OscillationSequence(TestFunction(cube, modes, bump=False), (4, 8, 16, 32))
        u = lsclab.BaseMap(cube.center, [[1.0, 0.2], [0.1, 0.8]], [0.3, -0.1])
        for name, f in (("quad", QUAD), ("det", DET)):
            rep = lsclab.run_lsc(f, u, seq)
            results.append((f"{M!r}/{name}", rep.gap, rep.gap >= -1e-4 * (1 + abs(rep.F_u)) and rep.ok))
    ok = all(r[2] for r in results)
    _report(capsys, 8, ok, "gaps " + ", ".join(f"{n} {g:.2e}" for n, g, _ in results),
            time.perf_counter() - t0, 120)


def test_ac9_failure_direction(capsys):
    t0 = time.perf_counter()
    cfg = load_config(fixture_path("negquad_lsc.cfg"))
    spec = cfg.lsc
    u = lsclab.BaseMap(cfg.x0, spec["A"], spec["c"])
    rep = lsclab.run_lsc(cfg.integrand, u, spec["seq"], grid=quad_grid(spec["cube"], spec["quad_order"]))
    diag = rep.diagnostics
    ok = (rep.flag == lsclab.FAIL and rep.gap <= -0.05 and diag.passed
          and diag.decay_exponent is not None and abs(diag.decay_exponent + 1) <= 0.05
          and diag.max_grad <= diag.grad_bound)
    _report(capsys, 9, ok, f"{rep.flag}, gap {rep.gap:.5f}, decay exponent {diag.decay_exponent:.4f}, "
            f"max grad {diag.max_grad:.4f} <= bound {diag.grad_bound:.4f}", time.perf_counter() - t0, 60)


def test_ac10_determinism(capsys, tmp_path):
    t0 = time.perf_counter()
    compared, mismatched = 0, []
    for name in fixture_names():
        expect = yaml.safe_load(fixture_path(name).read_text())["expect"]
        for sub in sorted(expect):
            outs = [tmp_path / f"{name}-{sub}-{i}" for i in range(2)]
            for o in outs:
                cli.main([sub, "--config", str(fixture_path(name)), "--out", str(o)])
            for csv in sorted(outs[0].glob("*.csv")):
                compared += 1
                if csv.read_bytes() != (outs[1] / csv.name).read_bytes():
                    mismatched.append(f"{name}/{sub}/{csv.name}")
    ok = compared > 0 and not mismatched
    _report(capsys, 10, ok, f"{compared} CSV files compared, {len(mismatched)} differ", time.perf_counter() - t0)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
