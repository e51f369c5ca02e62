"""Command-line surface: validate, solve, extract, sweep, counterexample, oracle.

Every emitted structured artifact embeds its run manifest (command, input
digest, options, seeds, tool version); identical manifests reproduce
byte-identical files.  Wall-clock timing is segregated into a `.timing.json`
sidecar so the main outputs stay diffable.

Exit codes: 0 success/certified; 2 best-effort (solve) or smallness
condition only partially met (validate); 3 diverged; 4 precondition failed;
64 schema violation (message carries a JSON pointer); 1 other errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

from . import __version__
from .atoms import AtomMap, Lattice, set_atom_cap
from .errors import (
    A3ViolationError,
    BarronPDEError,
    ConstructionError,
    DivergenceError,
    SchemaError,
)
from .netx import Box, CosineNetwork, extract, fit_rate_slope, rate_sweep
from .oracle import fd_partial_check, pointwise_product_check, residual_pointwise
from .problem import (
    FORMAT_VERSION,
    counterexample_eta,
    neuron_bound,
    problem_from_json_obj,
    validate,
)
from .solver import SolveOptions, solve

EXIT_OK = 0
EXIT_BEST_EFFORT = 2
EXIT_DIVERGED = 3
EXIT_PRECONDITION = 4
EXIT_SCHEMA = 64


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        fh.write(_dump(obj))


def _read_json(path: str):
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        return json.loads(raw), hashlib.sha256(raw).hexdigest()
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}", "/") from exc


def _manifest(command: str, path: str, digest: str, options: dict, seeds) -> dict:
    return {
        "command": command,
        "problem_path": path,
        "options": options,
        "seeds": list(seeds),
        "tool_version": __version__,
        "input_digest": f"sha256:{digest}",
    }


def _check_format(obj, path: str) -> None:
    if not isinstance(obj, dict) or obj.get("format") != FORMAT_VERSION:
        raise SchemaError(
            f"{path}: unsupported or missing format marker "
            f"(this reader understands {FORMAT_VERSION})",
            "/format",
        )


def _read_atom_map(path: str):
    obj, digest = _read_json(path)
    _check_format(obj, path)
    try:
        return AtomMap.from_json_obj(obj), digest
    except (ValueError, BarronPDEError) as exc:
        raise SchemaError(f"{path}: {exc}", "/atoms") from exc


def _read_problem(path: str):
    obj, digest = _read_json(path)
    return (*problem_from_json_obj(obj), digest)


def _solve_options(args, file_defaults: dict) -> SolveOptions:
    merged = dict(file_defaults)
    for key, val in (
        ("mode", args.mode),
        ("tol", args.tol),
        ("max_iters", args.max_iters),
        ("prune_tau_frac", args.prune_frac),
        ("residual_points", args.residual_points),
    ):
        if val is not None:
            merged[key] = val
    return SolveOptions(**merged)


# ------------------------------------------------------------------ commands


def cmd_validate(args) -> int:
    p, _, digest = _read_problem(args.problem)
    report = validate(p)
    out = {"format": FORMAT_VERSION, **report.to_obj()}
    out["manifest"] = _manifest("validate", args.problem, digest, {}, [])
    sys.stdout.write(_dump(out))
    if report.a3prime_holds:
        return EXIT_OK
    if report.a3_holds:
        return EXIT_BEST_EFFORT
    return EXIT_PRECONDITION


def cmd_solve(args) -> int:
    p, file_solver, digest = _read_problem(args.problem)
    opts = _solve_options(args, file_solver)
    manifest = _manifest("solve", args.problem, digest, opts.to_obj(), [])
    t0 = time.perf_counter()
    u, report = solve(p, opts)
    wall = time.perf_counter() - t0
    if args.out:
        _write_json(args.out, {"format": FORMAT_VERSION, **u.to_json_obj(), "manifest": manifest})
    if args.report:
        _write_json(
            args.report, {"format": FORMAT_VERSION, **report.to_obj(), "manifest": manifest}
        )
        _write_json(args.report + ".timing.json", {"wall_seconds": wall})
    sys.stdout.write(
        f"iterations={report.iterations} u_norm_s2={report.u_norm_s2!r} "
        f"bound_rhs={report.bound_rhs!r} residual_linf={report.residual_linf!r}\n"
    )
    return EXIT_OK if report.certified else EXIT_BEST_EFFORT


def cmd_extract(args) -> int:
    u, digest = _read_atom_map(args.solution)
    if (args.n is None) == (args.eps is None):
        raise BarronPDEError("give exactly one of --n / --eps")
    if args.eps is not None:
        missing = [
            name for name, val in (("--C", args.C), ("--vol", args.vol), ("--fnorm", args.fnorm))
            if val is None
        ]
        if missing:
            raise BarronPDEError(f"--eps needs {', '.join(missing)}")
        n = neuron_bound(args.C, args.vol, args.fnorm, args.eps)
    else:
        n = args.n
    seed = args.seed if args.seed is not None else (args.global_seed or 0)
    net = extract(u, args.k, n, seed)
    options = {"k": args.k, "n": n, "eps": args.eps, "C": args.C, "vol": args.vol, "fnorm": args.fnorm}
    manifest = _manifest("extract", args.solution, digest, options, [seed])
    if args.out:
        _write_json(args.out, {"format": FORMAT_VERSION, **net.to_json_obj(), "manifest": manifest})
    sys.stdout.write(f"n={net.n} source_norm={net.meta['source_norm']!r}\n")
    return EXIT_OK


def _parse_box(spec: str, d: int) -> Box:
    lo_s, _, hi_s = spec.partition(":")
    lo, hi = float(lo_s), float(hi_s)
    return Box((lo,) * d, (hi,) * d)


def _sweep_one(problem_path: str, args, base_seed: int):
    p, file_solver, digest = _read_problem(problem_path)
    opts = _solve_options(args, file_solver)
    u, report = solve(p, opts)
    if not report.certified:
        raise A3ViolationError(f"{problem_path}: sweep requires a certified solve")
    box = _parse_box(args.box, p.lattice.d)
    n_list = [int(tok) for tok in args.n_list.split(",") if tok]
    seeds = [base_seed + i for i in range(args.seeds)]
    rows, summary = rate_sweep(u, args.k, box, n_list, seeds)
    slope = fit_rate_slope(summary)
    return p, digest, report, rows, summary, slope


def cmd_sweep(args) -> int:
    base_seed = args.global_seed or 0
    paths = args.dims if args.dims else [args.problem]
    with_dim = args.dims is not None
    lines = []
    header = "d,n,seed,err,bound,mean_sq_err" if with_dim else "n,seed,err,bound,mean_sq_err"
    lines.append(header)
    sidecar = {"runs": []}
    for path in paths:
        p, digest, report, rows, summary, slope = _sweep_one(path, args, base_seed)
        mean_sq = {row["n"]: row["mean_sq_err"] for row in summary}
        for row in rows:
            cells = [
                str(row["n"]),
                str(row["seed"]),
                repr(row["err"]),
                repr(row["bound"]),
                repr(mean_sq[row["n"]]),
            ]
            if with_dim:
                cells.insert(0, str(p.lattice.d))
            lines.append(",".join(cells))
        sidecar["runs"].append(
            {
                "problem_path": path,
                "d": p.lattice.d,
                "iterations": report.iterations,
                "slope": slope,
                "summary": summary,
                "manifest": _manifest(
                    "sweep",
                    path,
                    digest,
                    {"k": args.k, "n_list": args.n_list, "box": args.box, "seeds": args.seeds},
                    list(range(base_seed, base_seed + args.seeds)),
                ),
            }
        )
        sys.stdout.write(f"problem={path} d={p.lattice.d} iterations={report.iterations} slope={slope!r}\n")
    with open(args.out_csv, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    _write_json(args.out_csv + ".manifest.json", sidecar)
    return EXIT_OK


def cmd_counterexample(args) -> int:
    eps = args.eps
    hmin = args.hmin if args.hmin is not None else 0.5 * math.sqrt(2.0 * eps)
    lattice = Lattice(1, (hmin,))
    eta = counterexample_eta(eps, lattice)
    norm_b1 = eta.barron_norm(1.0)
    at_zero = eta.eval([0.0])
    verdict = "FAIL-ELLIPTICITY" if 1.0 + at_zero < 0 else "ELLIPTIC"
    if args.out:
        manifest = _manifest(
            "counterexample", "", "none", {"eps": eps, "hmin": hmin}, []
        )
        _write_json(
            args.out,
            {
                "format": FORMAT_VERSION,
                **eta.to_json_obj(),
                "manifest": manifest,
            },
        )
    sys.stdout.write(
        f"eta_norm_b1={norm_b1!r} eta_at_zero={at_zero!r} verdict={verdict}\n"
    )
    return EXIT_OK


def cmd_oracle(args) -> int:
    seed = args.seed if args.seed is not None else (args.global_seed or 0)
    if args.check == "residual":
        p, _, _ = _read_problem(args.problem)
        u, _ = _read_atom_map(args.solution)
        stats = residual_pointwise(u, p, args.points, seed=seed, mode=args.mode)
        sys.stdout.write(_dump({"format": FORMAT_VERSION, **stats.to_obj()}))
        if args.max_residual is not None and stats.linf > args.max_residual:
            sys.stderr.write(
                f"residual linf {stats.linf!r} exceeds --max-residual {args.max_residual!r}\n"
            )
            return 1
        return EXIT_OK
    if args.check == "product":
        g, _ = _read_atom_map(args.g)
        h, _ = _read_atom_map(args.h)
        gap = pointwise_product_check(g, h, args.samples, seed=seed)
        sys.stdout.write(_dump({"format": FORMAT_VERSION, "max_relative_discrepancy": gap}))
        return EXIT_OK
    if args.check == "derivative":
        g, _ = _read_atom_map(args.g)
        gap = fd_partial_check(g, args.samples, seed=seed)
        sys.stdout.write(_dump({"format": FORMAT_VERSION, "max_discrepancy": gap}))
        return EXIT_OK
    raise BarronPDEError(f"unknown oracle check {args.check!r}")


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="barronpde",
        description="Frequency-domain elliptic solver with Barron-norm certificates",
    )
    parser.add_argument("--seed", dest="global_seed", type=int, default=None,
                        help="base seed for commands that sample (default 0)")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("BARRONPDE_THREADS", "0")),
                        help="reserved worker-thread cap; current build is serial")
    parser.add_argument("--atom-cap", type=int, default=None,
                        help="override the hard atom cap")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="check a problem file and print its constants")
    sp.add_argument("problem")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("solve", help="solve a problem and write solution/report")
    sp.add_argument("problem")
    sp.add_argument("--mode", choices=["combined", "nested"], default=None)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--max-iters", type=int, default=None)
    sp.add_argument("--prune-frac", type=float, default=None)
    sp.add_argument("--residual-points", type=int, default=None)
    sp.add_argument("--out", default=None, help="solution atom-map JSON path")
    sp.add_argument("--report", default=None, help="solve report JSON path")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("extract", help="sample a cosine network from a solution file")
    sp.add_argument("solution")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--eps", type=float, default=None)
    sp.add_argument("--C", type=float, default=None)
    sp.add_argument("--vol", type=float, default=None)
    sp.add_argument("--fnorm", type=float, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("sweep", help="solve, then sweep network width against the rate bound")
    sp.add_argument("problem", nargs="?")
    sp.add_argument("--n-list", required=True)
    sp.add_argument("--seeds", type=int, default=20)
    sp.add_argument("--box", default="0:1", help="per-axis interval LO:HI")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--out-csv", required=True)
    sp.add_argument("--dims", nargs="+", default=None,
                    help="problem files forming a dimension family (adds a d column)")
    sp.add_argument("--mode", choices=["combined", "nested"], default=None)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--max-iters", type=int, default=None)
    sp.add_argument("--prune-frac", type=float, default=None)
    sp.add_argument("--residual-points", type=int, default=None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("counterexample", help="emit the ellipticity-failure perturbation")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--hmin", type=float, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_counterexample)

    sp = sub.add_parser("oracle", help="independent pointwise checks")
    osub = sp.add_subparsers(dest="check", required=True)
    op = osub.add_parser("residual")
    op.add_argument("problem")
    op.add_argument("solution")
    op.add_argument("--points", type=int, default=1000)
    op.add_argument("--mode", choices=["analytic", "finite_difference"], default="analytic")
    op.add_argument("--max-residual", type=float, default=None)
    op.add_argument("--seed", type=int, default=None)
    op.set_defaults(func=cmd_oracle)
    op = osub.add_parser("product")
    op.add_argument("g")
    op.add_argument("h")
    op.add_argument("--samples", type=int, default=32)
    op.add_argument("--seed", type=int, default=None)
    op.set_defaults(func=cmd_oracle)
    op = osub.add_parser("derivative")
    op.add_argument("g")
    op.add_argument("--samples", type=int, default=32)
    op.add_argument("--seed", type=int, default=None)
    op.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sweep" and args.problem is None and not args.dims:
        parser.error("sweep needs a problem file or --dims")
    if args.atom_cap is not None:
        set_atom_cap(args.atom_cap)
    try:
        return args.func(args)
    except SchemaError as exc:
        sys.stderr.write(f"schema error at {exc.pointer}: {exc}\n")
        return EXIT_SCHEMA
    except A3ViolationError as exc:
        sys.stderr.write(f"precondition failed: {exc}\n")
        return EXIT_PRECONDITION
    except DivergenceError as exc:
        sys.stderr.write(f"diverged: {exc}\n")
        if exc.report is not None:
            sys.stderr.write(_dump(exc.report.to_obj()))
        return EXIT_DIVERGED
    except ConstructionError as exc:
        sys.stderr.write(f"construction error: {exc}\n")
        return 1
    except (BarronPDEError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
