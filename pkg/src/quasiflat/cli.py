"""Command-line front end.

Every command prints a report on standard output.  With ``--json`` (or
``--format json``) the report is a JSON document carrying the package
version and the fully resolved run configuration; runs are deterministic for
a given seed.  Exit status: 0 when the report passes or the command only
generates data, 1 when a check fails, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Optional

import numpy as np

from . import __version__
from .acceptance import CRITERIA, run_criterion
from .analysis import (
    DEFAULT_SEED,
    classical_cesaro_hopf_image,
    commutation_obstruction_check,
    coordinate_words,
    inner_faithfulness_scan,
    mc_trace_state,
    stationarity_check_classical,
    thoma_stationarity_check,
)
from .fixtures import load_family, load_group, load_json, load_square
from .latin import admissible_squares, enumerate_squares, hopf_image_group, to_permutations
from .magic import matrix_to_json, orbit_decomposition, quasi_transitivity
from .models import (
    InducedVirtuallyAbelian,
    ModelPoint,
    canonical_word,
    eval_word,
    magic_matrix,
    parse_word,
    sample_point,
    word_trace,
)
from .perm import orbit_partition

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(DEFAULT_SEED),
                        help=f"RNG seed (default {DEFAULT_SEED})")
    parser.add_argument("--json", action="store_const", const="json", dest="format",
                        default=d("text"), help="emit a JSON report")
    parser.add_argument("--format", choices=["text", "json", "csv"], default=d("text"))
    parser.add_argument("--tol", type=float, default=d(None), help="override the command tolerance")
    parser.add_argument("--samples", type=int, default=d(None), help="number of random samples")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quasiflat",
                                     description="Quasi-flat models of quantum permutation groups")
    parser.add_argument("--version", action="version", version=__version__)
    _global_options(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("orbits", parents=[common],
                       help="orbits of a permutation group or of sampled model magic unitaries")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--group")
    src.add_argument("--family")
    p.add_argument("--threshold", type=float, default=1e-8)

    latin = sub.add_parser("latin", help="sparse Latin squares").add_subparsers(dest="action", required=True)
    p = latin.add_parser("enumerate", parents=[common])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--count-only", action="store_true")
    p = latin.add_parser("admissible", parents=[common])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--group", required=True)
    p = latin.add_parser("group", parents=[common])
    p.add_argument("--square", required=True)

    model = sub.add_parser("model", help="model families").add_subparsers(dest="action", required=True)
    p = model.add_parser("sample", parents=[common])
    p.add_argument("--family", required=True)
    p = model.add_parser("eval", parents=[common])
    p.add_argument("--family", required=True)
    p.add_argument("--word", required=True, help='raw word such as "1:2,2:1"')
    p.add_argument("--point", help="point JSON file (default: sample one from --seed)")
    p = model.add_parser("trace", parents=[common])
    p.add_argument("--family", required=True)
    p.add_argument("--word", required=True)

    an = sub.add_parser("analyze", help="verdicts").add_subparsers(dest="action", required=True)
    p = an.add_parser("faithful", parents=[common])
    p.add_argument("--family", required=True)
    p.add_argument("--max-len", type=int, required=True)
    p = an.add_parser("stationary", parents=[common])
    p.add_argument("--group", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--max-degree", type=int, default=2, help="maximal coordinate word length")
    p = an.add_parser("cesaro", parents=[common])
    p.add_argument("--square", required=True)
    p.add_argument("--kmax", type=int, default=10**4)
    p = an.add_parser("thoma", parents=[common])
    p.add_argument("--group", required=True)
    p.add_argument("--subgroup", required=True)
    p = an.add_parser("obstruction", parents=[common])
    p.add_argument("--k", type=int, required=True)

    p = sub.add_parser("selftest", parents=[common], help="run the acceptance criteria")
    p.add_argument("--criteria", help="comma-separated criterion numbers (default: all)")
    return parser


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "format"}


# commands return (report, passed) with passed None for generative commands

def cmd_orbits(args):
    if args.group:
        G = load_group(args.group)
        blocks = orbit_partition(G)
        sizes = {len(b) for b in blocks}
        k = sizes.pop() if len(sizes) == 1 else None
        return {"order": G.order, "blocks": [list(b) for b in blocks], "quasi_transitivity": k}, None
    f = load_family(args.family)
    rng = np.random.default_rng(args.seed)
    samples = [magic_matrix(f, sample_point(f, rng)) for _ in range(args.samples or 10)]
    d = orbit_decomposition(samples, args.threshold)
    return {"blocks": [list(b) for b in d.blocks], "epsilon": d.epsilon.tolist(),
            "quasi_transitivity": quasi_transitivity(d), "diagnostics": list(d.diagnostics)}, None


def cmd_latin(args):
    if args.action == "enumerate":
        squares = list(enumerate_squares(args.n, args.k))
        report = {"count": len(squares)}
        if not args.count_only:
            report["squares"] = [L.to_json() for L in squares]
        return report, None
    if args.action == "admissible":
        G = load_group(args.group)
        squares = admissible_squares(args.n, args.k, G)
        return {"count": len(squares), "squares": [L.to_json() for L in squares]}, None
    L = load_square(args.square)
    G = hopf_image_group(L)
    return {"square": L.to_json(), "permutations": [p.to_json() for p in to_permutations(L)],
            "order": G.order, "elements": [g.to_json() for g in sorted(G.elements)]}, None


def cmd_model(args):
    f = load_family(args.family)
    rng = np.random.default_rng(args.seed)
    if args.action == "sample":
        p = sample_point(f, rng)
        report = {"family": f.to_json(), "point": p.to_json()}
        if f.word_based or f.variant == "Classical":
            report["magic_support"] = magic_matrix(f, p).support().tolist()
        return report, None
    w = canonical_word(f, parse_word(args.word))
    if args.action == "eval":
        p = ModelPoint.from_json(load_json(args.point)) if args.point else sample_point(f, rng)
        A = eval_word(f, p, w)
        return {"family": f.to_json(), "word": w.to_json(), "matrix": matrix_to_json(A),
                "trace": [word_trace(f, p, w).real, word_trace(f, p, w).imag]}, None
    est = mc_trace_state(f, w, args.samples or 10**4, args.seed)
    return {"family": f.to_json(), "word": w.to_json(), "estimate": est.to_json()}, None


def cmd_analyze(args):
    tol = args.tol
    if args.action == "faithful":
        f = load_family(args.family)
        rep = inner_faithfulness_scan(f, args.max_len, args.samples or 100,
                                      1e-6 if tol is None else tol, args.seed)
        return rep.to_json(), rep.passed
    if args.action == "stationary":
        G = load_group(args.group)
        words = coordinate_words(G.degree, args.max_degree)
        mode = "exact" if args.exact else "monte-carlo"
        rep = stationarity_check_classical(G, args.k, words, mode, args.samples or 10**4,
                                           args.seed, floor=1e-10 if tol is None else tol)
        return rep.to_json(), rep.passed
    if args.action == "cesaro":
        rep = classical_cesaro_hopf_image(load_square(args.square), args.kmax,
                                          1e-6 if tol is None else tol)
        return rep.to_json(), rep.passed
    if args.action == "thoma":
        f = InducedVirtuallyAbelian(load_group(args.group), load_group(args.subgroup))
        rep = thoma_stationarity_check(f, tol=1e-12 if tol is None else tol)
        return rep.to_json(), rep.passed
    rep = commutation_obstruction_check(args.k, args.samples or 100, args.seed,
                                        norm_tol=1e-10 if tol is None else tol)
    return rep.to_json(), rep.passed


def cmd_selftest(args):
    numbers = sorted(CRITERIA) if not args.criteria else [int(x) for x in args.criteria.split(",")]
    unknown = [n for n in numbers if n not in CRITERIA]
    if unknown:
        raise UsageError(f"unknown criteria {unknown}")
    results = [run_criterion(n, args.tol, args.seed) for n in numbers]
    passed = all(r.passed for r in results)
    return {"pass": passed, "failed": [r.number for r in results if not r.passed],
            "criteria": [r.to_json() for r in results],
            "lines": [r.line() for r in results]}, passed


COMMANDS = {"orbits": cmd_orbits, "latin": cmd_latin, "model": cmd_model,
            "analyze": cmd_analyze, "selftest": cmd_selftest}


def _text(report: dict, passed: Optional[bool]) -> str:
    if "lines" in report:
        body = "\n".join(report["lines"])
    elif set(report) == {"count"}:
        body = str(report["count"])
    else:
        body = "\n".join(f"{k}: {v if isinstance(v, (str, int, float, type(None))) else json.dumps(v, default=str)}"
                         for k, v in report.items() if k != "pass")
    if passed is not None:
        body += "\n" + ("PASS" if passed else "FAIL")
    return body


def _csv(report: dict) -> str:
    out = io.StringIO()
    rows = next((report[k] for k in ("entries", "verdicts", "criteria")
                 if isinstance(report.get(k), list)), None)
    if rows:
        keys = list(rows[0])
        writer = csv.DictWriter(out, fieldnames=keys)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: json.dumps(r.get(k), default=str) if isinstance(r.get(k), (list, dict))
                             else r.get(k) for k in keys})
    else:
        writer = csv.writer(out)
        writer.writerow(["key", "value"])
        for k, v in report.items():
            writer.writerow([k, json.dumps(v, default=str) if isinstance(v, (list, dict)) else v])
    return out.getvalue().rstrip("\n")


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        report, passed = COMMANDS[args.command](args)
    except (UsageError, ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"quasiflat: error: {exc}", file=sys.stderr)
        return 2
    if passed is not None and "pass" not in report:
        report = {"pass": passed, **report}
    if args.format == "json":
        print(json.dumps({"version": __version__, "config": _config(args), **report},
                         indent=1, sort_keys=False, default=str))
    elif args.format == "csv":
        print(_csv(report))
    else:
        print(_text(report, passed))
    return 0 if passed is None or passed else 1


if __name__ == "__main__":
    sys.exit(main())
