"""``sclab`` command-line interface.

Commands::

    sclab check <spec.json>                exactness report (JSON)
    sclab solve <spec.json> --problem X    spectra (CSV) and summary (JSON)
    sclab info  <spec.json>                dimensions and mesh statistics

``--fixture NAME`` may replace the spec path for the built-in meshes.
Exit codes: 0 success or exact, 1 not exact (or, with ``--strict``, a local
condition fails), 2 usage or spec error, 3 numerical failure.
``SCLAB_THREADS`` caps the BLAS/LAPACK thread pools.
"""
from __future__ import annotations

import os
import sys

_threads = os.environ.get("SCLAB_THREADS")
if _threads:
    # must happen before numpy loads its BLAS
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "BLIS_NUM_THREADS"):
        os.environ[_var] = _threads

import argparse
import csv
import json
import logging
import time
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as sl

from . import __version__
from .conditions import check_assumptions
from .fixtures import FIXTURES, get_fixture
from .hierarchy import (hierarchical_bezier_mesh, hierarchical_dims, hierarchical_incidence,
                        select_active)
from .meshspec import MeshSpec, SpecError, build_geometry, build_stack, load_spec
from .solvers import (analytic_square_spectrum, match_spectrum, maxwell_mixed_1, maxwell_mixed_2,
                      maxwell_primal, stokes_infsup)
from .tensor import dimension_report, export_matrix_market
from .topology import exactness_check

log = logging.getLogger("sclab")

EXIT_OK, EXIT_NOT_EXACT, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
PROBLEMS = ("maxwell", "maxwell-mixed1", "maxwell-mixed2", "infsup")


class UsageError(Exception):
    pass


def _dump_json(obj, stream=None) -> None:
    stream = stream or sys.stdout
    json.dump(obj, stream, indent=2, sort_keys=True, default=_json_default)
    stream.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError("not serializable: %r" % type(o))


def _resolve_spec(args) -> MeshSpec:
    if args.fixture and args.spec:
        raise UsageError("give either a spec path or --fixture, not both")
    if args.fixture:
        try:
            return get_fixture(args.fixture)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from exc
    if not args.spec:
        raise UsageError("a spec path or --fixture is required")
    if not Path(args.spec).is_file():
        raise UsageError("no such file: %s" % args.spec)
    return load_spec(args.spec)


def _header(spec: MeshSpec, args) -> dict:
    return {"spec_hash": spec.hash, "name": spec.name, "sclab_version": __version__, "seed": args.seed}


def _random_dd_probe(stack, rng: np.random.Generator, trials: int = 3) -> float:
    """Largest ``|D^{k+1} D^k x|`` over random integer vectors ``x``."""
    spaces = [select_active(stack, k) for k in range(stack.n + 1)]
    D = [hierarchical_incidence(spaces[k], spaces[k + 1]) for k in range(stack.n)]
    worst = 0.0
    for k in range(stack.n - 1):
        for _ in range(trials):
            x = rng.integers(-5, 6, size=D[k].shape[1]).astype(float)
            y = D[k + 1] @ (D[k] @ x)
            worst = max(worst, float(np.abs(y).max()) if y.size else 0.0)
    return worst


def cmd_check(args) -> int:
    spec = _resolve_spec(args)
    stack = build_stack(spec)
    rng = np.random.default_rng(args.seed)
    report = _header(spec, args)
    t0 = time.perf_counter()
    ex = exactness_check(stack, method=args.rank_method)
    report.update(ex)
    if stack.n == 2:
        a = check_assumptions(stack)
        report["assumption_support"] = a["support"]
        report["assumption_overlap"] = a["overlap"]
        assumptions_ok = a["support"]["ok"] and a["overlap"]["ok"]
    else:
        assumptions_ok = True
    report["dd_probe_max"] = _random_dd_probe(stack, rng)
    report["verdict"] = "exact" if ex["exact"] else "not exact"
    report["elapsed_s"] = time.perf_counter() - t0
    _emit(report, args)
    if not ex["exact"]:
        return EXIT_NOT_EXACT
    if args.strict and not assumptions_ok:
        return EXIT_NOT_EXACT
    return EXIT_OK


def cmd_info(args) -> int:
    spec = _resolve_spec(args)
    if args.emit_spec:
        sys.stdout.write(spec.to_json() + "\n")
        return EXIT_OK
    stack = build_stack(spec)
    report = _header(spec, args)
    report["base"] = dimension_report(stack.base)
    report["levels"] = stack.N + 1
    dims = hierarchical_dims(stack)
    report["dims"] = dims
    if stack.n == 2:
        report["dim_identity"] = {"lhs": dims[0] + dims[2], "rhs": dims[1] + 1,
                                  "holds": dims[0] + dims[2] == dims[1] + 1}
    report["active_counts"] = {k: select_active(stack, k).counts for k in range(stack.n + 1)}
    mesh = hierarchical_bezier_mesh(stack)
    report["active_elements"] = [int(m.sum()) for m in mesh]
    report["total_active_elements"] = int(sum(m.sum() for m in mesh))
    report["refined_fraction"] = [float(stack.omega(j, j - 1).mean()) for j in range(1, stack.N + 1)]
    _emit(report, args)
    return EXIT_OK


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _spectrum_rows(values):
    return [(i + 1, "%.15g" % v) for i, v in enumerate(values)]


def cmd_solve(args) -> int:
    spec = _resolve_spec(args)
    if spec.n != 2:
        raise UsageError("problem %s needs a two-dimensional spec" % args.problem)
    if args.dump_matrices and not args.out:
        raise UsageError("--dump-matrices requires --out")
    geom = build_geometry(spec)
    mats: Optional[dict] = {} if args.dump_matrices else None
    summary = _header(spec, args)
    summary["problem"] = args.problem
    t0 = time.perf_counter()
    if args.problem == "infsup":
        stack = build_stack(spec, rotated=True)
        res = stokes_infsup(stack, geom, norm=args.norm, matrices=mats)
        summary.update(res.summary())
        values = res.eigenvalues[res.eigenvalues > res.tol][: args.nev]
    else:
        stack = build_stack(spec)
        solver = {"maxwell": maxwell_primal, "maxwell-mixed1": maxwell_mixed_1,
                  "maxwell-mixed2": maxwell_mixed_2}[args.problem]
        res = solver(stack, geom, nev=args.nev, tol=args.tol, matrices=mats)
        summary.update(res.summary())
        values = res.nonzero[: args.nev]
        if geom.kind in ("identity", "box"):
            side = np.asarray(geom.upper) - np.asarray(geom.lower)
            if np.isclose(side[0], side[1]):
                ref = analytic_square_spectrum(values.size + 8, float(side[0]))
                m = match_spectrum(values, ref)
                summary["analytic_match"] = m
                summary["analytic_max_rel_error"] = float(np.max(np.abs(values - ref[: values.size])
                                                                  / ref[: values.size])) if values.size else 0.0
        if res.residual > args.residual_tol:
            summary["residual_failure"] = True
    summary["elapsed_s"] = time.perf_counter() - t0
    summary["spectrum"] = [float(v) for v in values]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "spectrum.csv", ("index", "lambda"), _spectrum_rows(values))
        if mats:
            for name, A in mats.items():
                export_matrix_market(out / ("%s.mtx" % name), A, comment="sclab %s" % spec.hash)
            summary["matrices"] = sorted("%s.mtx" % k for k in mats)
        with open(out / "summary.json", "w", newline="\n", encoding="utf-8") as fh:
            _dump_json(summary, fh)
    if args.csv:
        if args.csv == "-":
            w = csv.writer(sys.stdout, lineterminator="\n")
            w.writerow(("index", "lambda"))
            w.writerows(_spectrum_rows(values))
        else:
            _write_csv(args.csv, ("index", "lambda"), _spectrum_rows(values))
    if args.csv != "-":
        _dump_json(summary)
    return EXIT_NUMERIC if summary.get("residual_failure") else EXIT_OK


def _emit(report: dict, args) -> None:
    if getattr(args, "report", None):
        with open(args.report, "w", newline="\n", encoding="utf-8") as fh:
            _dump_json(report, fh)
    _dump_json(report)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sclab", description="Hierarchical spline complexes: exactness and stability.")
    p.add_argument("--version", action="version", version="sclab " + __version__)
    p.add_argument("--seed", type=int, default=0, help="seed for randomized oracles")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp_):
        sp_.add_argument("spec", nargs="?", help="JSON mesh spec")
        sp_.add_argument("--fixture", choices=FIXTURES, help="use a built-in mesh instead of a file")
        sp_.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    c = sub.add_parser("check", help="exactness and local-condition report")
    common(c)
    c.add_argument("--rank-method", choices=("modular", "float"), default="modular")
    c.add_argument("--strict", action="store_true", help="exit 1 when a local condition fails")
    c.add_argument("--report", help="also write the JSON report to this file")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("solve", help="Maxwell eigenvalues or the inf-sup constant")
    common(s)
    s.add_argument("--problem", choices=PROBLEMS, default="maxwell")
    s.add_argument("--nev", type=int, default=50, help="number of eigenvalues to report")
    s.add_argument("--tol", type=float, default=None, help="absolute zero-eigenvalue tolerance")
    s.add_argument("--norm", choices=("grad_penalty", "strain_nitsche"), default="grad_penalty",
                   help="velocity norm for the inf-sup test")
    s.add_argument("--residual-tol", type=float, default=1e-8)
    s.add_argument("--out", help="directory for spectrum.csv, summary.json and matrices")
    s.add_argument("--csv", help="write the spectrum CSV here ('-' for stdout)")
    s.add_argument("--dump-matrices", action="store_true", help="write MatrixMarket files to --out")
    s.set_defaults(func=cmd_solve)

    i = sub.add_parser("info", help="dimensions, active counts and mesh statistics")
    common(i)
    i.add_argument("--emit-spec", action="store_true", help="print the (normalized) spec JSON")
    i.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, SpecError) as exc:
        print("sclab: error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except NotImplementedError as exc:
        print("sclab: error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, np.linalg.LinAlgError, sl.LinAlgError, FloatingPointError) as exc:
        print("sclab: numerical failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
