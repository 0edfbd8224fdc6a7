"""Command-line interface: ``generate``, ``summarize`` and ``sweep``.

Exit codes: 0 success, 2 usage or input error, 3 solver stopped at
``--max-iters`` without converging (the result is still written).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .baselines import spectral_cluster, undirected_summarize
from .graph import EdgeListError, dump_edge_list, read_edge_list, symmetrize, to_skew
from .linalg import SvdConvergenceError
from .solver import INITS, SCHEMES, SolverConfig, SolverError, harden, result_to_dict, solve
from .sweep import SweepSpec, run_sweep, write_sweep
from .synthetic import (
    DipsSpec,
    NoiseConfig,
    NoiseUnreachableError,
    add_noise,
    generate_dips,
    measure_noise,
    parse_pattern,
    save_labeled,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3

log = logging.getLogger("stnmf")


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _emit(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_generate(args) -> int:
    k = len(args.groups)
    try:
        pattern = parse_pattern(args.pattern, k)
        spec = DipsSpec(tuple(args.groups), pattern, args.weight, args.density)
        noise = NoiseConfig(args.gamma_b, args.gamma_d, args.seed + 1)
        lg = add_noise(generate_dips(spec, args.seed), noise)
    except NoiseUnreachableError as exc:
        raise UsageError(str(exc)) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    gb, gd = measure_noise(lg)
    measured = _dump_json({"gamma_b": gb, "gamma_d": gd})
    if args.output is None:
        sys.stdout.write(dump_edge_list(lg.graph))
        sys.stderr.write(measured)
    else:
        side = save_labeled(lg, args.output)
        sys.stdout.write(measured)
        log.info("wrote %s and %s", args.output, side)
    return EXIT_OK


def _load_lambda(path: Optional[str]):
    if path is None:
        return None
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read lambda matrix {path}: {exc}") from None


def cmd_summarize(args) -> int:
    try:
        g = read_edge_list(args.file)
    except FileNotFoundError:
        raise UsageError(f"no such file: {args.file}") from None
    except (EdgeListError, OSError) as exc:
        raise UsageError(str(exc)) from None
    try:
        cfg = SolverConfig(k=args.k, scheme=args.scheme, lambda_scale=args.lambda_scale,
                           max_iters=args.max_iters, rel_tol=args.rel_tol, seed=args.seed,
                           init=args.init, lambda_matrix=_load_lambda(args.lambda_matrix))
        if args.k > g.n:
            raise ValueError(f"k={args.k} exceeds vertex count n={g.n}")
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None

    if args.method == "stnmf":
        result = solve(to_skew(g), cfg)
        summary = harden(result.factors, eps_assign=args.eps_assign, rel_threshold=args.rel_threshold)
        _emit(_dump_json(result_to_dict(cfg, result, summary)), args.output)
        return EXIT_OK if result.converged else EXIT_NOT_CONVERGED
    W = symmetrize(g)
    if args.method == "spectral":
        res = spectral_cluster(W, args.k, args.seed)
        _emit(_dump_json(res.to_dict()), args.output)
        return EXIT_OK
    res = undirected_summarize(W, args.k, cfg)
    _emit(_dump_json(res.to_dict()), args.output)
    return EXIT_OK if res.aux["converged"] else EXIT_NOT_CONVERGED


def cmd_sweep(args) -> int:
    try:
        spec = SweepSpec.load(args.spec)
    except FileNotFoundError:
        raise UsageError(f"no such file: {args.spec}") from None
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"invalid sweep spec {args.spec}: {exc}") from None
    pairs = run_sweep(spec, args.workers)
    out, summ = write_sweep(spec, pairs, args.output, args.summary)
    failed = sum(1 for _, r in pairs if r.error)
    sys.stdout.write(f"{len(pairs)} rows ({failed} with errors) -> {out}; summary -> {summ}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stnmf", description="Directed graph summarization by structured NMF.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic block graph with ground truth")
    g.add_argument("--groups", type=_int_list, required=True, help="group sizes, e.g. 5,5")
    g.add_argument("--pattern", default="banded",
                   help="relations as I:J pairs (0:1,1:2) or one of chain, banded, transitive")
    g.add_argument("--gamma-b", type=float, default=0.0, help="background noise ratio")
    g.add_argument("--gamma-d", type=float, default=0.0, help="direction noise ratio, below 0.5")
    g.add_argument("--density", type=float, default=1.0, help="edge probability inside pattern blocks")
    g.add_argument("--weight", type=float, default=1.0, help="weight of pattern edges")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", help="edge-list path; truth goes to <stem>.truth.json")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("summarize", help="summarize an edge list into k compressed nodes")
    s.add_argument("file", help="edge-list file")
    s.add_argument("-k", type=int, required=True, help="number of compressed nodes")
    s.add_argument("--method", choices=("stnmf", "spectral", "undirected"), default="stnmf")
    s.add_argument("--scheme", choices=SCHEMES, default="adaptive")
    s.add_argument("--lambda", dest="lambda_scale", type=float, default=1.0,
                   help="fixed scheme: Lambda = value * all-ones")
    s.add_argument("--lambda-matrix", help="fixed scheme: JSON file with a full k x k Lambda")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--init", choices=INITS, default="nndsvd")
    s.add_argument("--max-iters", type=int, default=2000)
    s.add_argument("--rel-tol", type=float, default=1e-8)
    s.add_argument("--eps-assign", type=float, default=1e-6)
    s.add_argument("--rel-threshold", type=float, default=1e-6)
    s.add_argument("-o", "--output", help="JSON output path (default stdout)")
    s.set_defaults(func=cmd_summarize)

    w = sub.add_parser("sweep", help="run a noise sweep described by a JSON file")
    w.add_argument("spec", help="sweep specification (JSON)")
    w.add_argument("--workers", type=int, help="worker processes (capped by STNMF_WORKERS)")
    w.add_argument("-o", "--output", help="override the CSV path from the spec")
    w.add_argument("--summary", help="override the summary CSV path from the spec")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"stnmf {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except (SolverError, SvdConvergenceError) as exc:
        sys.stderr.write(f"stnmf {args.command}: solver failed: {exc}\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
