"""Command-line interface.

Exit codes:
  0  success
  1  selfcheck found a failing check
  2  malformed or degenerate input (parse errors, mismatched landmark counts,
     degenerate projections)
  3  solver failure (every restart failed)

Diagnostics go to stderr; stdout only carries machine-readable results.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asm import AsmOptions, asm_reconstruct
from .barycentric import BasisSet
from .errors import AllRestartsFailed, KSSError
from .files import (LandmarkFile, LandmarkFormatError, atomic_write, csv_text,
                    read_basis, read_directory, read_landmarks, write_landmarks)
from .kendall import to_preshape
from .pipeline import ExperimentConfig, evaluate, make_test_projection
from .solver import SolverOptions, reconstruct

log = logging.getLogger("kss3d")

CONFIG_ENV = "KSS3D_CONFIG"
EXIT_OK, EXIT_CHECK_FAILED, EXIT_BAD_INPUT, EXIT_SOLVER = 0, 1, 2, 3


class InputError(Exception):
    """Bad user input; reported with exit code 2."""


def _load_config(path):
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: cannot read config: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise InputError(f"{path}: config must be a JSON object")
    return cfg


def _rows(X):
    return [[float(v) for v in col] for col in np.asarray(X).T]


def _rotation_doc(R):
    return {"convention": "rows-act-left", "values": [float(v) for v in np.ravel(R)]}


def cmd_reconstruct(args):
    names = args.names.split(",") if args.names else None
    lm = read_landmarks(args.landmarks, names)
    if lm.dimension != 2:
        raise InputError(f"{args.landmarks}: expected 2D landmarks, got dimension {lm.dimension}")
    shapes = read_basis(args.basis)
    k_basis = shapes[0].k
    if lm.k != k_basis:
        raise InputError(f"landmark count mismatch: {args.landmarks} has {lm.k} landmarks, "
                         f"basis {args.basis} has {k_basis}")
    if lm.names is not None and shapes[0].names is not None and lm.names != shapes[0].names:
        raise InputError("landmark names differ from the basis name order")
    cfg = _load_config(args.opts)
    W = lm.matrix
    to_preshape(W)
    doc = {"method": args.method, "k": lm.k, "names": shapes[0].names}
    if args.method == "kss":
        solver_cfg = dict(cfg.get("solver", cfg))
        if args.seed is not None:
            solver_cfg["seed"] = args.seed
        try:
            opts = SolverOptions.from_dict(solver_cfg)
        except (TypeError, ValueError) as exc:
            raise InputError(f"solver options: {exc}") from exc
        basis = BasisSet.from_configurations([s.matrix for s in shapes],
                                             [s.label for s in shapes])
        res = reconstruct(W, basis, opts)
        doc.update({
            "weights": [float(v) for v in res.weights],
            "rotation": _rotation_doc(res.rotation),
            "objective": float(res.objective),
            "objective_trace": [float(v) for v in res.objective_trace],
            "iterations": res.iterations,
            "restart_index": res.restart_index,
            "landmarks3d": _rows(res.landmarks3d),
            "warnings": res.warnings,
        })
    else:
        asm_cfg = dict(cfg.get("asm", {}))
        if args.seed is not None:
            asm_cfg["seed"] = args.seed
        try:
            asm_opts = AsmOptions(**asm_cfg)
        except TypeError as exc:
            raise InputError(f"asm options: {exc}") from exc
        res = asm_reconstruct(W, np.stack([s.matrix for s in shapes]), asm_opts)
        doc.update({
            "coefficients": [float(v) for v in res.c],
            "rotation": _rotation_doc(res.cam.rotation),
            "alpha": res.cam.alpha,
            "translation": [float(v) for v in res.cam.t],
            "objective": float(res.residual),
            "objective_trace": [float(v) for v in res.trace],
            "landmarks3d": _rows(res.X3d),
            "warnings": res.warnings,
        })
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_evaluate(args):
    train = read_directory(args.train)
    test = read_directory(args.test)
    if train[0].k != test[0].k:
        raise InputError(f"landmark count mismatch: training has {train[0].k}, "
                         f"testing has {test[0].k}")
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
        cfg.setdefault("solver", {})["seed"] = args.seed
    if args.jobs is not None:
        cfg["jobs"] = args.jobs
    try:
        config = ExperimentConfig.from_dict(cfg)
        reports, rows = evaluate([s.matrix for s in train], [s.matrix for s in test], config)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    out = Path(args.out_dir)
    atomic_write(out / "per_instance.csv", csv_text(
        ["instance_id", "method", "basis_count", "view", "error", "status"],
        [(r.instance_id, r.method, r.basis_count, r.view, float(r.error), r.status)
         for r in rows]))
    atomic_write(out / "summary.csv", csv_text(
        ["method", "basis_count", "view", "mean", "variance", "median", "q1", "q3", "failures"],
        [(r.method, r.basis_count, r.view, r.mean, r.variance, r.median, r.q1, r.q3, r.failures)
         for r in reports]))
    if not args.no_figures:
        from .plotting import error_boxplot
        for view in dict.fromkeys(r.view for r in reports):
            safe = view.replace(",", "_")
            error_boxplot(reports, view, out / "figures" / f"errors_{safe}.png")
    for r in reports:
        print(f"{r.method:14s} n={r.basis_count:<4d} view={r.view:20s} "
              f"mean={r.mean:.4f} var={r.variance:.4f} failures={r.failures}", file=sys.stderr)
    return EXIT_OK


def cmd_selfcheck(args):
    from .selfcheck import format_table, run_checks
    checks = run_checks(seed=args.seed or 0, fault=args.inject_fault)
    print(format_table(checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK_FAILED


def cmd_project(args):
    lm = read_landmarks(args.shape)
    if lm.dimension != 3:
        raise InputError(f"{args.shape}: expected a 3D shape, got dimension {lm.dimension}")
    try:
        view = args.view if args.view in ("z", "x", "y") else [float(v) for v in args.view.split(",")]
    except ValueError:
        raise InputError(f"--view: expected z, x, y or vx,vy,vz; got {args.view!r}") from None
    try:
        W = make_test_projection(to_preshape(lm.matrix), view)
    except ValueError as exc:
        raise InputError(f"--view: {exc}") from exc
    write_landmarks(args.out, LandmarkFile.from_matrix(W, lm.names, "pre-shape"))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="kss3d",
        description="3D landmark shape estimation from single 2D projections in "
                    "Kendall shape space.",
        epilog="exit codes: 0 success, 1 selfcheck failure, 2 malformed or degenerate "
               "input, 3 solver failure. Default config path: $" + CONFIG_ENV + ".",
        formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reconstruct", help="estimate a 3D shape from 2D landmarks")
    r.add_argument("--landmarks", required=True, help="2D landmark file (JSON or CSV)")
    r.add_argument("--basis", required=True, help="basis file with 3D shapes")
    r.add_argument("--method", choices=["kss", "asm"], default="kss")
    r.add_argument("--out", help="result file (stdout when omitted)")
    r.add_argument("--opts", help="JSON options file")
    r.add_argument("--seed", type=int)
    r.add_argument("--names", help="comma-separated landmark names for CSV input")
    r.set_defaults(func=cmd_reconstruct)

    e = sub.add_parser("evaluate", help="run the reconstruction experiment")
    e.add_argument("--train", required=True, help="directory of 3D training shapes")
    e.add_argument("--test", required=True, help="directory of 3D test shapes")
    e.add_argument("--config", help="JSON experiment config")
    e.add_argument("--out-dir", required=True)
    e.add_argument("--seed", type=int)
    e.add_argument("--jobs", type=int, help="worker processes")
    e.add_argument("--no-figures", action="store_true", help="skip the boxplot figures")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("selfcheck", help="run numerical self-checks")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--inject-fault", choices=["gradient-sign", "distance-offset"],
                   help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_selfcheck)

    j = sub.add_parser("project", help="project a 3D shape to a 2D pre-shape")
    j.add_argument("--shape", required=True)
    j.add_argument("--view", default="z", help="z, x, y or vx,vy,vz")
    j.add_argument("--out", required=True)
    j.set_defaults(func=cmd_project)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (InputError, LandmarkFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except AllRestartsFailed as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except KSSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
