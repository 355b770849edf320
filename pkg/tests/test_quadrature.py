import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sci

from qcbench.errors import InjectivityViolation, NonFiniteValue
from qcbench.geometry import Euclidean, Hyperbolic, Point, Sphere
from qcbench.quadrature import build_cube, integrate, quad_grid


def test_build_cube_examples():
    assert build_cube(Point(Euclidean(2), [0, 0]), 10).r == 10.0
    with pytest.raises(InjectivityViolation):
        build_cube(Point(Sphere(2), [0, 0, 1]), 5)
    assert build_cube(Point(Sphere(2), [0, 0, 1]), 1).r == 1.0
    with pytest.raises(InjectivityViolation):
        build_cube(Point(Euclidean(2), [0, 0]), 0.0)


def test_small_flat_grid():
    g = quad_grid(build_cube(Point(Euclidean(2), [0, 0]), 1), q=3)
    assert len(g) == 9
    assert math.fsum(g.weights) == pytest.approx(1.0, abs=1e-15)
    assert integrate(g, g.nodes[:, 0] ** 2) == pytest.approx(1 / 12, abs=1e-15)


def test_jacobian_sign_by_curvature():
    gs = quad_grid(build_cube(Point(Sphere(2), [0, 0, 1]), 1), q=8)
    gh = quad_grid(build_cube(Point(Hyperbolic(2), [1, 0, 0]), 1), q=8)
    assert np.all(gs.jacobians < 1) and np.all(gs.jacobians > 0)
    assert np.all(gh.jacobians >= 1)


def _dblquad_volume(curv, r):
    def J(y, x):
        t = math.hypot(x, y)
        if t == 0:
            return 1.0
        return (math.sin(t) if curv > 0 else math.sinh(t)) / t
    val, _ = sci.dblquad(J, -r / 2, r / 2, -r / 2, r / 2, epsabs=1e-13, epsrel=1e-13)
    return val


@pytest.mark.parametrize("M, curv", [(Sphere(2), 1), (Hyperbolic(2), -1)])
def test_cube_volume_against_adaptive_oracle(M, curv):
    r = 0.2
    g = quad_grid(build_cube(Point(M, M.origin()), r), q=8)
    oracle = _dblquad_volume(curv, r)
    assert g.volume == pytest.approx(oracle, abs=1e-12)
    # J = 1 - K t^2/6 + O(t^4); the mean of t^2 over the cube is r^2/6
    assert g.volume / r**2 - 1 == pytest.approx(-curv * r**2 / 36, rel=2e-2)


@settings(max_examples=30, deadline=None)
@given(q=st.integers(2, 12), a=st.integers(0, 23), b=st.integers(0, 23), r=st.floats(0.1, 3.0))
def test_exact_for_polynomial_degree(q, a, b, r):
    if a > 2 * q - 1 or b > 2 * q - 1:
        return
    g = quad_grid(build_cube(Point(Euclidean(2), [0, 0]), r), q=q)
    exact = 1.0
    for k in (a, b):
        exact *= 0.0 if k % 2 else 2 * (r / 2) ** (k + 1) / (k + 1)
    got = integrate(g, g.nodes[:, 0] ** a * g.nodes[:, 1] ** b)
    assert got == pytest.approx(exact, abs=1e-13 * max(1.0, r ** (a + b + 2)))


def test_refinement_converges_on_sphere():
    M = Sphere(2)
    cube = build_cube(Point(M, M.origin()), 1.0)
    exact = _dblquad_volume(1, 1.0)
    errs = [abs(quad_grid(cube, q).volume - exact) for q in (2, 3, 4, 6)]
    assert all(b <= a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-12


@pytest.mark.parametrize("M", [Sphere(2), Hyperbolic(2)])
def test_volume_ratio_tends_to_one_quadratically(M):
    radii = np.array([0.4, 0.2, 0.1, 0.05])
    dev = [abs(quad_grid(build_cube(Point(M, M.origin()), r), 8).volume / r**2 - 1) for r in radii]
    slope = np.polyfit(np.log(radii), np.log(dev), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.05)


def test_three_dimensional_grid():
    M = Sphere(3)
    g = quad_grid(build_cube(Point(M, M.origin()), 0.5), q=6)
    assert g.nodes.shape == (216, 3)
    assert math.fsum(g.weights) == pytest.approx(0.125, abs=1e-15)


def test_non_finite_values_rejected():
    g = quad_grid(build_cube(Point(Euclidean(2), [0, 0]), 1), q=3)
    vals = np.ones(len(g))
    vals[4] = np.nan
    with pytest.raises(NonFiniteValue):
        integrate(g, vals)
    with pytest.raises(NonFiniteValue):
        integrate(g, lambda grid: np.full(len(grid), np.inf))


def test_summation_is_order_independent():
    g = quad_grid(build_cube(Point(Sphere(2), [0, 0, 1]), 1), q=16)
    rng = np.random.default_rng(1)
    vals = np.exp(rng.normal(size=len(g)) * 5)
    ref = integrate(g, vals)
    perm = rng.permutation(len(g))
    shuffled = type(g)(g.cube, g.nodes[perm], g.weights[perm], g.jacobians[perm], g.q)
    assert integrate(shuffled, vals[perm]) == ref


def test_composite_cells_cover_cube():
    g = quad_grid(build_cube(Point(Euclidean(2), [0, 0]), 2.0), q=4, cells=3)
    assert len(g) == (4 * 3) ** 2
    assert np.all(np.abs(g.nodes) < 1.0)
    assert integrate(g, np.cos(np.pi * g.nodes[:, 0])) == pytest.approx(2 * 2 * math.sin(np.pi) / np.pi, abs=1e-6)


def test_points_lie_on_manifold():
    M = Hyperbolic(2)
    g = quad_grid(build_cube(Point(M, M.origin()), 1.0), q=5)
    np.testing.assert_allclose(M.inner(g.points, g.points), -1.0, atol=1e-13)
    np.testing.assert_allclose(np.linalg.det(g.transport), g.jacobians, atol=1e-12)
