"""Command-line front end.

Usage::

    qcbench check          --config quad_sphere.cfg --out results/
    qcbench falsify        --config negquad_flat.cfg --seed 7
    qcbench lsc            --config negquad_lsc.cfg
    qcbench euclid-compare --config det_flat.cfg --quad-order 48

Exit codes: 0 for ConsistentWithQC / SEMICONTINUITY_OK / agreement,
2 for ViolationFound / SEMICONTINUITY_FAIL / disagreement, 1 for
configuration or runtime errors (message on stderr).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, lsclab, qcengine
from .config import ExperimentConfig, RunRecord, load_config
from .errors import ConfigParseError, QCBenchError
from .quadrature import build_cube, quad_grid

log = logging.getLogger("qcbench")

SUBCOMMANDS = ("check", "falsify", "lsc", "euclid-compare")
EUCLID_TOL = 1e-10

DEFICIT_COLUMNS = ("r", "deficit", "grad_sup", "q", "phi_id")
LSC_COLUMNS = ("h", "F_uh", "sup_diff", "grad_sup")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def _dump_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def emit_plotdata(report, path) -> Path:
    """Write a two-column whitespace-delimited file with a ``#`` header.

    A :class:`~qcbench.qcengine.Verdict` gives ``r deficit``; an
    :class:`~qcbench.lsclab.LscReport` gives ``h F_uh``. ``None`` or an
    empty report writes the header only.
    """
    path = Path(path)
    if isinstance(report, lsclab.LscReport):
        header, pairs = "# h F_uh", [(row.h, row.F_uh) for row in report.rows]
    elif isinstance(report, qcengine.Verdict):
        header, pairs = "# r deficit", [(e.r, e.deficit) for e in report.evidence]
    elif report is None:
        header, pairs = "# x y", []
    else:
        raise TypeError(f"cannot emit plot data for {type(report).__name__}")
    lines = [header] + [f"{_fmt(a)} {_fmt(b)}" for a, b in pairs]
    path.write_text("\n".join(lines) + "\n")
    return path


def _apply_overrides(cfg: ExperimentConfig, seed, quad_order) -> ExperimentConfig:
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    if quad_order is not None:
        q = int(quad_order)
        cfg = replace(cfg, quad_order=q)
        if cfg.lsc is not None:
            cfg = replace(cfg, lsc=dict(cfg.lsc, quad_order=q))
    return cfg


def _need_tf(cfg: ExperimentConfig):
    if cfg.test_function is None:
        raise ConfigParseError("this subcommand needs a 'test_function' section")
    return cfg.test_function


def _run_check(cfg, out: Path):
    tf = _need_tf(cfg)
    verdict = qcengine.check(cfg.integrand, cfg.x0, cfg.alpha, tf, cfg.schedule, q=cfg.quad_order)
    _write_verdict(verdict, out)
    return verdict.to_dict(), [e.to_dict() for e in verdict.evidence], 2 if verdict.violation else 0


def _run_falsify(cfg, out: Path):
    verdict = qcengine.falsify(cfg.integrand, cfg.x0, cfg.alpha, budget=cfg.budget, seed=cfg.seed,
                               r0=cfg.r0, q=cfg.quad_order)
    _write_verdict(verdict, out)
    return verdict.to_dict(), [e.to_dict() for e in verdict.evidence], 2 if verdict.violation else 0


def _write_verdict(verdict, out: Path):
    write_csv(out / "deficits.csv", DEFICIT_COLUMNS, [e.to_dict() for e in verdict.evidence])
    _dump_json(out / "verdict.json", verdict.to_dict())
    emit_plotdata(verdict, out / "deficit_vs_r.dat")


def _run_lsc(cfg, out: Path):
    if cfg.lsc is None:
        raise ConfigParseError("the lsc subcommand needs an 'lsc' section")
    spec = cfg.lsc
    u = lsclab.BaseMap(cfg.x0, spec["A"], spec["c"])
    grid = quad_grid(spec["cube"], spec["quad_order"])
    report = lsclab.run_lsc(cfg.integrand, u, spec["seq"], grid=grid)
    rows = [{"h": r.h, "F_uh": r.F_uh, "sup_diff": r.sup_diff, "grad_sup": r.grad_sup} for r in report.rows]
    write_csv(out / "lsc.csv", LSC_COLUMNS, rows)
    summary = report.to_dict()
    _dump_json(out / "lsc.json", summary)
    emit_plotdata(report, out / "F_vs_h.dat")
    return summary, rows, 0 if report.ok else 2


def _run_euclid(cfg, out: Path):
    tf = _need_tf(cfg)
    rows = []
    for r in cfg.schedule:
        cube = build_cube(cfg.x0, r)
        grid = quad_grid(cube, cfg.quad_order)
        tf_r = tf.rescaled(cube)
        d = qcengine.deficit(cfg.integrand, cfg.x0, cfg.alpha, tf_r, grid).deficit
        morrey = qcengine.euclid_morrey_check(cfg.integrand, cfg.alpha.matrix, tf_r, grid)
        rows.append({"r": r, "deficit": d, "morrey": morrey, "abs_diff": abs(d - morrey)})
    write_csv(out / "euclid.csv", ("r", "deficit", "morrey", "abs_diff"), rows)
    worst = max(row["abs_diff"] for row in rows)
    agree = worst <= EUCLID_TOL
    summary = {"max_abs_diff": worst, "tolerance": EUCLID_TOL, "agree": agree}
    _dump_json(out / "euclid.json", summary)
    return summary, rows, 0 if agree else 2


_RUNNERS = {"check": _run_check, "falsify": _run_falsify, "lsc": _run_lsc, "euclid-compare": _run_euclid}


def run(config_path, subcommand: str, out=None, seed=None, quad_order=None) -> int:
    """Run one subcommand on a config file and write its reports; returns the exit code.

    Errors propagate; :func:`main` maps them to exit code 1.
    """
    if subcommand not in _RUNNERS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    cfg = _apply_overrides(load_config(config_path), seed, quad_order)
    if out is None:
        out = (cfg.raw.get("output") or {}).get("dir") or f"qcbench-out/{cfg.name}"
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    verdict, reports, code = _RUNNERS[subcommand](cfg, out)
    record = RunRecord(subcommand, cfg.raw, reports, verdict, time.perf_counter() - t0, __version__)
    (out / "record.json").write_text(record.to_json() + "\n")
    log.info("%s on %s finished with exit code %d", subcommand, cfg.name, code)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcbench", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"qcbench {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, metavar="PATH")
        s.add_argument("--out", metavar="DIR", default=None)
        s.add_argument("--seed", type=int, default=None, metavar="N")
        s.add_argument("--quad-order", type=int, default=None, metavar="Q")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args.config, args.subcommand, args.out, args.seed, args.quad_order)
    except QCBenchError as exc:
        print(f"qcbench: error: {type(exc).__name__}: {exc}", file=sys.stderr)
    except (OSError, ValueError, TypeError, KeyError, np.linalg.LinAlgError) as exc:
        print(f"qcbench: error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
