"""Command-line front end.

Commands: analyze | lmi | rankcheck | realize | genflip | eval.  Exit codes:
0 convex / full rank / success, 3 not convex / rank deficient, 4 marginal or
indeterminate, 1 usage error, 2 numeric failure.  All randomness flows from
--seed (or FREECONVEX_SEED) through named sub-streams, and identical
configurations produce byte-identical JSON.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import parser as _parser
from .algebra import LinearPencil, NumericalRankAmbiguity
from .convexity import (
    MissingOverride,
    NotAtom,
    NotConvex,
    full_rank_on_interior,
    is_convex,
    make_flip_poly,
)
from .ncpoly import MatrixTuple, _matrix_to_json
from .realization import (
    SingularAtOrigin,
    realize_expression,
    realize_with_inverse,
)
from .sdp import (
    IterationLimit,
    MarginalSdp,
    NumericalBreakdown,
    SizeLimitExceeded,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_NEGATIVE = 3
EXIT_MARGINAL = 4

_STREAMS = {"decomposition": 0, "det-check": 1, "witness-scan": 2}


def _stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(_STREAMS[name],))
    )


def _emit(data, args) -> None:
    if args.format == "text":
        _emit_text(data)
    else:
        sys.stdout.write(
            json.dumps(data, sort_keys=True, separators=(",", ":")) + "\n"
        )


def _emit_text(data, indent: int = 0) -> None:
    pad = "  " * indent
    if isinstance(data, dict):
        for k in sorted(data):
            v = data[k]
            if isinstance(v, (dict, list)):
                sys.stdout.write(f"{pad}{k}:\n")
                _emit_text(v, indent + 1)
            else:
                sys.stdout.write(f"{pad}{k}: {v}\n")
    elif isinstance(data, list):
        for v in data:
            if isinstance(v, (dict, list)):
                _emit_text(v, indent + 1)
            else:
                sys.stdout.write(f"{pad}- {v}\n")
    else:
        sys.stdout.write(f"{pad}{data}\n")


def _read_input(text: str) -> str:
    path = Path(text)
    try:
        if path.is_file():
            return path.read_text()
    except OSError:
        pass
    return text


def _parse_expression(args):
    text = _read_input(args.input)
    return _parser.parse(text)


def _load_pencil(path: str) -> LinearPencil:
    with open(path) as fh:
        return LinearPencil.from_json_dict(json.load(fh))


def _load_point(path: str) -> MatrixTuple:
    with open(path) as fh:
        return MatrixTuple.from_json_dict(json.load(fh))


# -- commands ----------------------------------------------------------------

def cmd_analyze(args) -> int:
    e = _parse_expression(args)
    rng = _stream(args.seed, "decomposition")
    report = is_convex(
        e, args.tol, rng, g=args.vars, use_gns=not args.no_gns, seed=args.seed
    )
    _emit(report.to_json_dict(include_sdp=args.dump_sdp), args)
    return EXIT_OK if report.verdict == "convex" else EXIT_NEGATIVE


def cmd_lmi(args) -> int:
    e = _parse_expression(args)
    rng = _stream(args.seed, "decomposition")
    report = is_convex(
        e, args.tol, rng, g=args.vars, use_gns=not args.no_gns, seed=args.seed
    )
    if report.verdict != "convex":
        raise NotConvex("the free invertibility set is not convex")
    _emit(report.minimal_pencil.to_json_dict(), args)
    return EXIT_OK


def cmd_rankcheck(args) -> int:
    Ltilde = _load_pencil(args.pencil)
    L = _load_pencil(args.domain)
    if not L.is_hermitian_monic(max(args.tol, 1e-6)):
        print("error: domain pencil must be hermitian monic", file=sys.stderr)
        return EXIT_USAGE
    rng = _stream(args.seed, "witness-scan")
    outcome = full_rank_on_interior(
        Ltilde, L, args.tol, rng, use_gns=not args.no_gns
    )
    _emit(outcome.to_json_dict(include_sdp=args.dump_sdp), args)
    return EXIT_OK if outcome.result == "full_rank" else EXIT_NEGATIVE


def cmd_realize(args) -> int:
    e = _parse_expression(args)
    if args.with_inverse:
        r = realize_with_inverse(e, args.vars, args.tol)
    else:
        r = realize_expression(e, args.vars, args.tol)
    _emit(r.to_json_dict(), args)
    return EXIT_OK


def _parse_vector(text: str) -> np.ndarray:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return np.array([complex(p.replace("i", "j")) for p in parts])


def cmd_genflip(args) -> int:
    u = _parse_vector(args.u)
    vs = [_parse_vector(v) for v in args.v]
    overrides = {}
    for spec in args.override or []:
        parts = spec.split(",")
        if len(parts) not in (3, 4):
            raise ValueError(f"bad override {spec!r}; expected j,k,re[,im]")
        j, k = int(parts[0]) - 1, int(parts[1])
        val = float(parts[2]) + 1j * (float(parts[3]) if len(parts) == 4 else 0.0)
        overrides[(j, k)] = val
    L = make_flip_poly(u, vs, overrides)
    _emit(L.to_json_dict(), args)
    return EXIT_OK


def cmd_eval(args) -> int:
    e = _parse_expression(args)
    g = args.vars
    point = _load_point(args.point)
    f = _parser.to_polynomial(e, g if g else max(e.max_var_index(), point.g))
    if point.g != f.g:
        print(
            f"error: point has {point.g} matrices, expression needs {f.g}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    value = f.evaluate(point)
    _emit(
        {
            "rows": value.shape[0],
            "cols": value.shape[1],
            "value": _matrix_to_json(value),
        },
        args,
    )
    return EXIT_OK


# -- argument parsing --------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="freeconvex",
        description="Convexity of free invertibility sets and LMI representations",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, needs_input=True):
        if needs_input:
            sp.add_argument("input", help="expression text or path to a file")
        sp.add_argument("--vars", type=int, default=None, help="variable count override")
        sp.add_argument("--tol", type=float, default=1e-8)
        sp.add_argument(
            "--seed",
            type=int,
            default=int(os.environ.get("FREECONVEX_SEED", "0")),
        )
        sp.add_argument("--trials", type=int, default=20)
        sp.add_argument("--max-level", type=int, default=4)
        fmt = sp.add_mutually_exclusive_group()
        fmt.add_argument(
            "--json", dest="format", action="store_const", const="json", default="json"
        )
        fmt.add_argument("--text", dest="format", action="store_const", const="text")
        sp.add_argument("--dump-sdp", action="store_true")
        sp.add_argument("--no-gns", action="store_true")

    common(sub.add_parser("analyze", help="decide convexity of K_f"))
    common(sub.add_parser("lmi", help="minimal hermitian pencil with K_f = D_L"))
    rc = sub.add_parser("rankcheck", help="invertibility of a pencil on int D_L")
    common(rc, needs_input=False)
    rc.add_argument("--pencil", required=True, help="pencil JSON file")
    rc.add_argument("--domain", required=True, help="hermitian monic pencil JSON file")
    re_ = sub.add_parser("realize", help="minimal state-space realization")
    common(re_)
    re_.add_argument(
        "--with-inverse",
        action="store_true",
        help="realize the direct sum with the inverse",
    )
    gf = sub.add_parser("genflip", help="generate a flip-structured pencil")
    common(gf, needs_input=False)
    gf.add_argument("--u", required=True, help="comma-separated entries of u")
    gf.add_argument(
        "--v", action="append", required=True, help="comma-separated v_j (repeatable)"
    )
    gf.add_argument(
        "--override",
        action="append",
        help="j,k,re[,im] replacement where u vanishes (repeatable)",
    )
    ev = sub.add_parser("eval", help="evaluate a polynomial expression at a point")
    common(ev)
    ev.add_argument("--point", required=True, help="point JSON file {n, X}")
    return ap


_COMMANDS = {
    "analyze": cmd_analyze,
    "lmi": cmd_lmi,
    "rankcheck": cmd_rankcheck,
    "realize": cmd_realize,
    "genflip": cmd_genflip,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if not (0 < args.tol <= 1e-2):
        print("error: --tol must lie in (0, 1e-2]", file=sys.stderr)
        return EXIT_USAGE
    if args.max_level < 1:
        print("error: --max-level must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (NotConvex, NotAtom) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    except MarginalSdp as exc:
        print(f"marginal: {exc}", file=sys.stderr)
        return EXIT_MARGINAL
    except (
        SingularAtOrigin,
        NumericalBreakdown,
        IterationLimit,
        SizeLimitExceeded,
        NumericalRankAmbiguity,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (
        _parser.ParseError,
        _parser.RationalNotPolynomial,
        MissingOverride,
        FileNotFoundError,
        json.JSONDecodeError,
        KeyError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
