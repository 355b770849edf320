"""Numerical testbench for Riemannian quasiconvexity and weak* lower
semicontinuity of integral functionals on model manifolds."""

__version__ = "0.1.0"

from .bundle import CotangentStack, Integrand, get_integrand
from .geometry import Euclidean, Hyperbolic, Point, Sphere, Tangent, make_manifold
from .lsclab import BaseMap, run_lsc
from .perturbation import Mode, OscillationSequence, TestFunction, laminate
from .qcengine import check, deficit, falsify
from .quadrature import build_cube, quad_grid

__all__ = [
    "BaseMap", "CotangentStack", "Euclidean", "Hyperbolic", "Integrand", "Mode",
    "OscillationSequence", "Point", "Sphere", "Tangent", "TestFunction", "build_cube",
    "check", "deficit", "falsify", "get_integrand", "laminate", "make_manifold",
    "quad_grid", "run_lsc",
]
