"""The ``forge`` command line.

Every subcommand prints a JSON result to stdout.  Exit codes: 0 pass,
1 property violation, 2 input error, 3 cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .decoupling.davis_garsia import davis_garsia_decompose, davis_garsia_oracle
from .decoupling.ratios import decoupling_ratio
from .decoupling.tangent import tangent_copy, verify_tangent
from .embedding import (
    DEFAULT_CAP,
    Morphism,
    build_canonical_1p,
    build_canonical_2p,
    equal_law,
    martingale_law,
    pullback_martingale,
)
from .errors import CapExceededError, F4ViolationError, ForgeError, SchemaError
from .filtration import (
    BiFiltration,
    Filtration1P,
    Martingale1P,
    Martingale2P,
    check_f4,
    differences,
    is_martingale,
    validate_bifiltration,
    validate_filtration,
)
from .harness.serialize import enc_point, enc_rational, parse, serialize, to_obj
from .harness.suites import SUITES, run_suite
from .measure import SampleSpace, validate_space
from .square import square_functions

OK, VIOLATION, INPUT_ERROR, CAP_EXCEEDED = 0, 1, 2, 3


class InputError(Exception):
    pass


def _json(x):
    """Make exact values printable: rationals become {"num", "den"}."""
    if isinstance(x, Fraction):
        return enc_rational(x)
    if isinstance(x, dict):
        return {str(k): _json(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json(v) for v in x]
    if isinstance(x, frozenset):
        return sorted((enc_point(p) for p in x), key=repr)
    return x


def _emit(out: dict, path=None):
    text = json.dumps(_json(out), ensure_ascii=False, sort_keys=True, indent=1)
    print(text)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")


def _load(path, cap=None):
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise InputError(f"{path}: {e.strerror}") from None
    return parse(data, cap=cap)


def _expect(value, types, what):
    if not isinstance(value, types):
        raise InputError(f"expected {what}, got {type(value).__name__}")
    return value


def _witness(w):
    if w is None:
        return None
    return {"index": list(w.index), "given": w.given, "first": w.first, "second": w.second, "lhs": w.lhs, "rhs": w.rhs}


def _validate_filt(filt):
    if isinstance(filt, Filtration1P):
        return validate_filtration(filt)
    return validate_bifiltration(filt)


# -- subcommands -----------------------------------------------------------------


def cmd_validate(args):
    x = _load(args.file)
    if isinstance(x, SampleSpace):
        v = validate_space(x)
    elif isinstance(x, (Filtration1P, BiFiltration)):
        v = _validate_filt(x)
    elif isinstance(x, (Martingale1P, Martingale2P)):
        v = _validate_filt(x.filtration)
        if v.ok:
            v = is_martingale(x)
    else:
        raise InputError("validate takes a space, filtration or martingale")
    _emit({"valid": v.ok, "violation": v.violation})
    return OK if v.ok else VIOLATION


def cmd_check_f4(args):
    bf = _expect(_load(args.file), BiFiltration, "a bifiltration")
    v = validate_bifiltration(bf)
    if not v.ok:
        raise InputError(v.violation)
    report = check_f4(bf)
    out = {"f4": report.holds, "direct_check": report.direct_holds}
    if args.witness and not report.holds:
        out["witness"] = _witness(report.witness)
    _emit(out)
    return OK if report.holds else VIOLATION


def cmd_embed(args):
    filt = _load(args.file)
    if args.two_param:
        bf = _expect(filt, BiFiltration, "a bifiltration")
        try:
            _, morph = build_canonical_2p(bf, cap=args.cap)
        except F4ViolationError as e:
            _emit({"embedded": False, "reason": "F4 condition violated", "witness": _witness(e.witness)})
            return VIOLATION
    else:
        _expect(filt, Filtration1P, "a one-parameter filtration")
        _, morph = build_canonical_1p(filt, cap=args.cap)
    Path(args.output).write_bytes(serialize(morph) + b"\n")
    cert = morph.certificate
    _emit({"embedded": True, "atoms": len(morph.model.space), "certificate": cert.verdict, "output": args.output})
    return OK if cert.verdict else VIOLATION


def cmd_verify(args):
    morph = _expect(_load(args.model, cap=args.cap), Morphism, "a model")
    cert = morph.certificate
    out = to_obj(cert)
    out["deficits"] = [{"atom": a, "deficit": d} for a, d in cert.deficits()]
    _emit(out)
    return OK if cert.verdict else VIOLATION


def _source_martingale(morph, path):
    m = _expect(_load(path), (Martingale1P, Martingale2P), "a martingale")
    if m.filtration != morph.model.source:
        raise InputError("martingale is not on the model's source filtration")
    return m


def cmd_push(args):
    morph = _expect(_load(args.model, cap=args.cap), Morphism, "a model")
    m = _source_martingale(morph, args.martingale)
    pulled = pullback_martingale(morph, m)
    law = equal_law(martingale_law(m), martingale_law(pulled))
    mart = is_martingale(pulled).ok
    ok = law and mart and morph.certificate.verdict
    _emit({"joint_law_equal": law, "pullback_is_martingale": mart, "certificate": morph.certificate.verdict})
    if args.output:
        Path(args.output).write_bytes(serialize(pulled) + b"\n")
    return OK if ok else VIOLATION


def cmd_square(args):
    m = _expect(_load(args.martingale), (Martingale1P, Martingale2P), "a martingale")
    v = _validate_filt(m.filtration)
    if v.ok:
        v = is_martingale(m)
    if not v.ok:
        raise InputError(v.violation)
    sq = square_functions(m)
    out = {
        "norms": sq.norms(),
        "E_S2": sq.S2.integral(),
        "E_s2": sq.s2.integral(),
        "conservation": sq.S2.integral() == sq.s2.integral() == sq.energy,
    }
    if sq.sigma2 is not None:
        out["E_sigma2"] = sq.sigma2.integral()
        out["conservation"] = out["conservation"] and sq.sigma2.integral() == sq.energy
    _emit(out)
    return OK if out["conservation"] else VIOLATION


def cmd_decouple(args):
    morph = _expect(_load(args.model, cap=args.cap), Morphism, "a model")
    m = _source_martingale(morph, args.sequence)
    pulled = pullback_martingale(morph, m)
    diffs = differences(pulled)
    seq = diffs if isinstance(diffs, dict) else {n: d for n, d in enumerate(diffs, start=1)}
    tp = tangent_copy(morph.model, seq, mode=args.mode, cap=args.cap)
    cert = verify_tangent(tp)
    squares = {k: d.square() for k, d in seq.items()}
    res = decoupling_ratio(morph.model, squares, args.phi, mode=args.mode)
    out = {
        "tangent_verified": cert.ok,
        "checked": cert.checked,
        "doubled_points": len(tp.doubled_space),
        "phi": args.phi,
        "lhs": res.lhs,
        "rhs": res.rhs,
        "ratio": res.ratio,
    }
    if not cert.ok:
        out["failure"] = {"stage": cert.stage, "key": cert.key, "kind": cert.kind, "deficit": cert.deficit}
    _emit(out)
    return OK if cert.ok else VIOLATION


def cmd_davis_garsia(args):
    m = _expect(_load(args.martingale), Martingale2P, "a two-parameter martingale")
    v = validate_bifiltration(m.filtration)
    if v.ok:
        v = is_martingale(m)
    if not v.ok:
        raise InputError(v.violation)
    try:
        dec = davis_garsia_decompose(m, seed=args.seed, verbose=args.verbose)
    except F4ViolationError as e:
        _emit({"decomposed": False, "reason": "F4 condition violated", "witness": _witness(e.witness)})
        return VIOLATION
    out = {
        "objective": dec.objective,
        "H1_sigma": dec.objective_g_is_f,
        "garsia": dec.objective_h_is_f,
        "H1_S": dec.H1_S,
        "ratio_to_H1_S": dec.ratio,
        "theta": [[list(k[:2]), k[2], t] for k, t in sorted(dec.theta.items())],
    }
    ok = dec.objective <= dec.objective_g_is_f + 1e-6
    if args.verbose:
        out["trace"] = [list(t) for t in dec.trace]
    if args.oracle_steps:
        orc = davis_garsia_oracle(m, grid_steps=args.oracle_steps)
        out["oracle"] = {"objective": orc.objective, "grid": orc.grid, "evaluated": orc.evaluated}
        ok = ok and abs(orc.objective - dec.objective) <= 1e-4
    _emit(out)
    return OK if ok else VIOLATION


def cmd_suite(args):
    report = run_suite(args.name, args.seed, args.trials, jobs=args.jobs)
    text = json.dumps(report, ensure_ascii=False, sort_keys=True, indent=1)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    agg = report["aggregate"]
    print(json.dumps({"suite": args.name, "passed": report["passed"], "aggregate": agg}, sort_keys=True))
    return OK if report["passed"] else VIOLATION


# -- parser ----------------------------------------------------------------------


def _seed(text):
    s = int(text)
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return s


def _positive(text):
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="forge", description="Filtrations, canonical product models and decoupling checks.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="validate a space, filtration or martingale")
    s.add_argument("file")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("check-f4", help="decide the F4 condition of a bifiltration")
    s.add_argument("file")
    s.add_argument("--witness", action="store_true", help="print a violating atom triple")
    s.set_defaults(func=cmd_check_f4)

    s = sub.add_parser("embed", help="build the canonical model and morphism")
    s.add_argument("file")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--one-param", action="store_true")
    g.add_argument("--two-param", action="store_true")
    s.add_argument("--cap", type=_positive, default=DEFAULT_CAP)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("verify", help="certificate of a stored model")
    s.add_argument("model")
    s.add_argument("--cap", type=_positive, default=DEFAULT_CAP)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("push", help="pull a martingale back to the canonical model")
    s.add_argument("model")
    s.add_argument("martingale")
    s.add_argument("--cap", type=_positive, default=DEFAULT_CAP)
    s.add_argument("-o", "--output", help="write the pulled-back martingale here")
    s.set_defaults(func=cmd_push)

    s = sub.add_parser("square", help="square functions and their norms")
    s.add_argument("martingale")
    s.set_defaults(func=cmd_square)

    s = sub.add_parser("decouple", help="tangent copy, its certificate and decoupling ratios")
    s.add_argument("model")
    s.add_argument("sequence", help="martingale on the model's source filtration")
    s.add_argument("--phi", default="sqrt", help="sqrt, log1p or capped:c")
    s.add_argument("--mode", default="two-stage", choices=("two-stage", "cells"))
    s.add_argument("--cap", type=_positive, default=DEFAULT_CAP)
    s.set_defaults(func=cmd_decouple)

    s = sub.add_parser("davis-garsia", help="split a two-parameter martingale")
    s.add_argument("martingale")
    s.add_argument("--oracle-steps", type=int, default=0, help="also run the grid oracle with K steps")
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("-v", "--verbose", action="store_true", help="include the solver trace")
    s.set_defaults(func=cmd_davis_garsia)

    s = sub.add_parser("suite", help="run a named property suite")
    s.add_argument("name", choices=sorted(SUITES))
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--jobs", type=_positive, default=1)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_suite)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return INPUT_ERROR if e.code else OK
    try:
        return args.func(args)
    except CapExceededError as e:
        print(f"forge: {e}", file=sys.stderr)
        return CAP_EXCEEDED
    except SchemaError as e:
        print(f"forge: schema error at {e.path}: {e.message}", file=sys.stderr)
        return INPUT_ERROR
    except (InputError, ValueError, KeyError) as e:
        print(f"forge: {e}", file=sys.stderr)
        return INPUT_ERROR
    except ForgeError as e:
        print(f"forge: {e}", file=sys.stderr)
        return VIOLATION


if __name__ == "__main__":
    sys.exit(main())
