"""Experiment configuration files and run records.

Configs are YAML mappings with an explicit ``schema_version``. Example::

    schema_version: 1
    name: quad_sphere
    manifold: {kind: sphere, dim: 2}
    integrand: quad
    x0: [0, 0, 1]
    alpha: [[1.0, 0.3], [0.2, 1.0]]
    schedule: [0.5, 0.25, 0.125]
    quad_order: 64
    test_function:
      modes:
        - {amplitude: 0.05, freq: [1, 0], phase: 0.0, vector: [1, 0]}
    falsifier: {budget: 50, seed: 7}
    lsc:
      radius: 0.5
      quad_order: 8
      A: [[0, 0], [0, 0]]
      h_list: [4, 8, 16, 32]
      modes:
        - {amplitude: 0.05, freq: [1, 0], phase: 0.0, vector: [1, 0]}
"""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import bundle, geometry
from .errors import ConfigParseError, GeometryError
from .perturbation import Mode, OscillationSequence, TestFunction
from .quadrature import DEFAULT_ORDER, build_cube

SCHEMA_VERSION = 1
FIXTURES = Path(__file__).parent / "fixtures"

_TOP_KEYS = {"schema_version", "name", "manifold", "integrand", "m", "x0", "alpha", "schedule",
             "quad_order", "test_function", "falsifier", "lsc", "output", "expect"}


def fixture_path(name: str) -> Path:
    """Path of a shipped fixture config, e.g. ``fixture_path("quad_sphere.cfg")``."""
    p = FIXTURES / name
    if not p.exists():
        raise FileNotFoundError(f"no shipped fixture named {name!r}")
    return p


def fixture_names() -> list[str]:
    return sorted(p.name for p in FIXTURES.glob("*.cfg"))


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigParseError(f"missing required key {where}{key!r}")
    return d[key]


def _matrix(value, name: str) -> np.ndarray:
    try:
        A = np.array(value, dtype=float, ndmin=2)
    except (TypeError, ValueError):
        raise ConfigParseError(f"{name} must be a numeric matrix") from None
    if A.ndim != 2 or not np.all(np.isfinite(A)):
        raise ConfigParseError(f"{name} must be a finite 2-d matrix")
    return A


def _modes(raw, name: str) -> tuple:
    if not isinstance(raw, list) or not raw:
        raise ConfigParseError(f"{name} must be a non-empty list of modes")
    out = []
    for i, md in enumerate(raw):
        if not isinstance(md, dict):
            raise ConfigParseError(f"{name}[{i}] must be a mapping")
        try:
            out.append(Mode(float(md.get("amplitude", 1.0)), tuple(md["freq"]),
                            float(md.get("phase", 0.0)), tuple(md["vector"])))
        except KeyError as exc:
            raise ConfigParseError(f"{name}[{i}] is missing {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigParseError(f"{name}[{i}]: {exc}") from None
    return tuple(out)


def parse_integrand(spec) -> bundle.Integrand:
    """Integrand from a registry name or ``{terms: [{name, weight}, ...]}``."""
    if isinstance(spec, str):
        return bundle.get_integrand(spec)
    if isinstance(spec, dict):
        if "terms" in spec:
            terms = spec["terms"]
            if not isinstance(terms, list) or not terms:
                raise ConfigParseError("integrand.terms must be a non-empty list")
            return bundle.combine([(float(t.get("weight", 1.0)), bundle.get_integrand(_need(t, "name", "integrand.terms[]."))) for t in terms])
        f = bundle.get_integrand(_need(spec, "name", "integrand."))
        scale = float(spec.get("scale", 1.0))
        return f if scale == 1.0 else bundle.combine([(scale, f)])
    raise ConfigParseError("integrand must be a name or a mapping")


@dataclass
class ExperimentConfig:
    """Validated experiment description; ``raw`` keeps the parsed mapping."""

    raw: dict
    name: str
    manifold: geometry.Manifold
    integrand: bundle.Integrand
    x0: geometry.Point
    alpha: bundle.CotangentStack
    schedule: tuple
    quad_order: int
    test_function: TestFunction | None
    budget: int
    seed: int
    r0: float
    lsc: dict | None = field(default=None)

    @property
    def m(self) -> int:
        return self.alpha.m

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigParseError("config must be a mapping")
        unknown = set(raw) - _TOP_KEYS
        if unknown:
            raise ConfigParseError(f"unknown config keys: {', '.join(sorted(unknown))}")
        version = _need(raw, "schema_version", "")
        if version != SCHEMA_VERSION:
            raise ConfigParseError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        mspec = _need(raw, "manifold", "")
        try:
            M = geometry.make_manifold(str(_need(mspec, "kind", "manifold.")), int(_need(mspec, "dim", "manifold.")))
        except (GeometryError, TypeError, ValueError) as exc:
            raise ConfigParseError(f"manifold: {exc}") from None
        f = parse_integrand(_need(raw, "integrand", ""))

        x0raw = raw.get("x0", "origin")
        try:
            x0 = geometry.Point(M, M.origin() if x0raw == "origin" else np.array(x0raw, dtype=float))
        except (GeometryError, ValueError, TypeError) as exc:
            raise ConfigParseError(f"x0: {exc}") from None

        m = int(raw.get("m", M.dim))
        alpha_raw = raw.get("alpha")
        A = np.zeros((m, M.dim)) if alpha_raw is None else _matrix(alpha_raw, "alpha")
        if A.shape != (m, M.dim):
            raise ConfigParseError(f"alpha must be {m} x {M.dim}, got {A.shape}")
        try:
            f.validate(m, M.dim)
        except ValueError as exc:
            raise ConfigParseError(f"integrand: {exc}") from None
        alpha = bundle.CotangentStack(x0, A)

        schedule = tuple(float(r) for r in raw.get("schedule", (0.5, 0.25, 0.125)))
        if not schedule:
            raise ConfigParseError("schedule must list at least one radius")
        for r in schedule:
            build_cube(x0, r)  # InjectivityViolation propagates
        q = int(raw.get("quad_order", DEFAULT_ORDER))

        tf = None
        if "test_function" in raw:
            tspec = raw["test_function"]
            modes = _modes(_need(tspec, "modes", "test_function."), "test_function.modes")
            try:
                tf = TestFunction(build_cube(x0, schedule[0]), modes, bool(tspec.get("bump", True)))
            except ValueError as exc:
                raise ConfigParseError(f"test_function: {exc}") from None
            if tf.m != m:
                raise ConfigParseError(f"test_function vectors have length {tf.m}, expected m = {m}")

        fal = raw.get("falsifier", {}) or {}
        lsc = raw.get("lsc")
        if lsc is not None:
            lsc = cls._parse_lsc(lsc, x0, m)
        return cls(raw=copy.deepcopy(raw), name=str(raw.get("name", "experiment")), manifold=M,
                   integrand=f, x0=x0, alpha=alpha, schedule=schedule, quad_order=q,
                   test_function=tf, budget=int(fal.get("budget", 50)), seed=int(fal.get("seed", 0)),
                   r0=float(fal.get("r0", schedule[0])), lsc=lsc)

    @staticmethod
    def _parse_lsc(spec: dict, x0, m: int) -> dict:
        if not isinstance(spec, dict):
            raise ConfigParseError("lsc must be a mapping")
        n = x0.manifold.dim
        cube = build_cube(x0, float(spec.get("radius", 0.5)))
        A = _matrix(spec.get("A", np.zeros((m, n))), "lsc.A")
        if A.shape != (m, n):
            raise ConfigParseError(f"lsc.A must be {m} x {n}, got {A.shape}")
        c = np.array(spec.get("c", np.zeros(m)), dtype=float)
        modes = _modes(_need(spec, "modes", "lsc."), "lsc.modes")
        try:
            base = TestFunction(cube, modes, bool(spec.get("bump", False)))
            seq = OscillationSequence(base, tuple(spec.get("h_list", (4, 8, 16, 32))))
        except ValueError as exc:
            raise ConfigParseError(f"lsc: {exc}") from None
        return {"cube": cube, "A": A, "c": c, "seq": seq, "quad_order": int(spec.get("quad_order", 8))}


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"malformed config {path}: {exc}") from None
    return ExperimentConfig.from_dict(raw)


@dataclass
class RunRecord:
    """Everything needed to audit one CLI run; JSON round-trips losslessly."""

    subcommand: str
    config: dict
    reports: list
    verdict: dict
    wall_time: float
    version: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))
