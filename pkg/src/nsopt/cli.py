"""Command-line front end.

Three subcommands:

``nsopt simplify``
    Rewrite a nested sum at minimal depth and report the shift point
    lambda, the depths before and after, and an exact verification sweep.

``nsopt verify``
    Compare two expressions value-by-value over an exact integer range.

``nsopt telescope``
    Solve sigma(g) - g = f for a single summand f, growing the tower
    only by certified generators (never by the summand itself).

Exit codes: 0 success, 1 verify found a counterexample, 2 parse error,
3 unsupported input shape, 4 internal verification failure (never
expected; asserted unreachable in the test suite).

Reports are deterministic: identical invocations produce byte-identical
output.  All arithmetic is exact rational; nothing is floated.
"""

import argparse
import json
import os
import sys

from .dfield import elem_to_str, tower_to_json
from .expr import (
    NotPolynomialPart,
    ParseError,
    ProductSpec,
    compile,
    evaluate,
    expr_depth,
    parse,
    reinterpret,
    to_src,
)
from .telescope import UnsupportedShape, telescope_depth_optimal


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------


def _read_expression(args) -> str:
    if args.file is not None:
        if args.expression is not None:
            print("error: give an expression inline or via --file, not both",
                  file=sys.stderr)
            raise SystemExit(2)
        with open(args.file, "r", encoding="utf-8") as fh:
            return fh.read().strip()
    if args.expression is None:
        print("error: no expression given", file=sys.stderr)
        raise SystemExit(2)
    return args.expression


def _parse_or_exit(text: str):
    try:
        return parse(text)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        raise SystemExit(2)


def _product_spec(text: str) -> ProductSpec:
    """Decode a --with-product value of the form name:alpha[:lower].

    alpha is a rational expression in n, e.g. b:(n+1)/(2*(2*n+1)):1
    registers the inverse central binomial product.
    """
    parts = text.split(":")
    if len(parts) not in (2, 3):
        print(f"error: bad --with-product {text!r} (want name:alpha[:lower])",
              file=sys.stderr)
        raise SystemExit(2)
    name, alpha_src = parts[0], parts[1]
    lower = 1
    if len(parts) == 3:
        try:
            lower = int(parts[2])
        except ValueError:
            print(f"error: bad --with-product lower bound {parts[2]!r}",
                  file=sys.stderr)
            raise SystemExit(2)
    try:
        alpha_expr = parse(alpha_src)
    except ParseError as exc:
        print(f"parse error in --with-product alpha: {exc}", file=sys.stderr)
        raise SystemExit(2)
    rf = _as_ratfunc(alpha_expr)
    if rf is None:
        print(f"error: --with-product alpha must be rational in n: {alpha_src!r}",
              file=sys.stderr)
        raise SystemExit(2)
    return ProductSpec(name, rf, lower)


def _as_ratfunc(e):
    # Const and single-variable Base are the only rational shapes the
    # parser leaves unmerged
    from .expr import Base, Const
    from .algebra import RatFunc
    from fractions import Fraction

    if isinstance(e, Const):
        return RatFunc.from_const(Fraction(e.value))
    if isinstance(e, Base):
        return e.rf
    return None


def _atom_power_default(args) -> int:
    if args.max_atom_power is not None:
        return args.max_atom_power
    env = os.environ.get("NSOPT_MAX_ATOM_POWER")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            print(f"error: bad NSOPT_MAX_ATOM_POWER {env!r}", file=sys.stderr)
            raise SystemExit(2)
    return 6


# ---------------------------------------------------------------------------
# simplify
# ---------------------------------------------------------------------------


def cmd_simplify(args) -> int:
    text = _read_expression(args)
    e = _parse_or_exit(text)
    products = tuple(_product_spec(p) for p in args.with_product or ())
    try:
        res = compile(
            e,
            products=products,
            max_atom_power=_atom_power_default(args),
            max_monomial_degree=args.max_monomial_degree,
        )
    except UnsupportedShape as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return 3

    out = reinterpret(res.tower, res.spec, res.elem)
    out_text = to_src(out, h_sugar=args.h_sugar)

    verification = []
    ok = True
    for k in range(res.lam, res.lam + args.verify_range + 1):
        lhs = evaluate(e, k)
        rhs = evaluate(out, k)
        eq = lhs == rhs
        ok = ok and eq
        verification.append((k, lhs, rhs, eq))

    report = {
        "input_text": text,
        "output_text": out_text,
        "lambda": res.lam,
        "input_depth": expr_depth(e),
        "output_depth": expr_depth(out),
        "optimality_certified": res.optimality_certified,
        "tower_summary": tower_to_json(res.tower),
        "verification": [
            [k, str(lhs), str(rhs), eq] for k, lhs, rhs, eq in verification
        ],
    }

    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(f"input:  {text}")
        print(f"output: {out_text}")
        print(f"lambda: {res.lam}")
        print(f"depth:  {report['input_depth']} -> {report['output_depth']}")
        print(f"optimality_certified: {'true' if res.optimality_certified else 'false'}")
        lo, hi = res.lam, res.lam + args.verify_range
        status = "exact" if ok else "FAILED"
        print(f"verified: k = {lo}..{hi} {status}")
        if args.emit_tower:
            print("tower:")
            for g in report["tower_summary"]["generators"]:
                print(
                    f"  {g['name']} {g['kind']} "
                    f"shift_part={g['shift_part']} depth={g['depth']}"
                )

    if not ok:
        first_bad = next(k for k, _, _, eq in verification if not eq)
        print(f"verification failed at k = {first_bad}", file=sys.stderr)
        return 4
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    lhs = _parse_or_exit(args.lhs)
    rhs = _parse_or_exit(args.rhs)
    for k in range(0, args.range + 1):
        lv = evaluate(lhs, k)
        rv = evaluate(rhs, k)
        if lv != rv:
            print(f"counterexample: k = {k}: lhs = {lv}, rhs = {rv}")
            return 1
    print(f"equal: k = 0..{args.range} exact")
    return 0


# ---------------------------------------------------------------------------
# telescope
# ---------------------------------------------------------------------------


def cmd_telescope(args) -> int:
    e = _parse_or_exit(args.summand)
    products = tuple(_product_spec(p) for p in args.with_product or ())
    try:
        res = compile(
            e,
            products=products,
            max_atom_power=_atom_power_default(args),
            max_monomial_degree=args.max_monomial_degree,
        )
        t = telescope_depth_optimal(
            res.tower,
            res.elem,
            max_atom_power=_atom_power_default(args),
            max_monomial_degree=args.max_monomial_degree,
            allow_fallback=False,
        )
    except UnsupportedShape as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return 3

    if not t.solved:
        print("NO_SOLUTION")
        print(f"certificate: {t.note}")
        return 0

    try:
        g_text = to_src(reinterpret(t.tower, res.spec, t.g), h_sugar=args.h_sugar)
    except NotPolynomialPart:
        g_text = elem_to_str(t.tower, t.g)
    print(f"g = {g_text}")
    if t.adjoined:
        print(f"adjoined: {', '.join(t.adjoined)}")
        for name in t.adjoined:
            i = t.tower.gen_index(name)
            g = t.tower.gens[i]
            print(
                f"  {name} {g.kind} "
                f"shift_part={elem_to_str(t.tower.prefix(i), g.shift_part)}"
            )
    else:
        print("adjoined: (none)")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _add_search_flags(sub):
    sub.add_argument(
        "--max-atom-power",
        type=int,
        default=None,
        help="largest 1/atom^e considered when growing the tower"
        " (default 6; NSOPT_MAX_ATOM_POWER overrides)",
    )
    sub.add_argument(
        "--max-monomial-degree",
        type=int,
        default=3,
        help="largest generator-monomial degree in candidate shift parts",
    )
    sub.add_argument(
        "--with-product",
        action="append",
        metavar="NAME:ALPHA[:LOWER]",
        help="register a product generator with ratio ALPHA (rational in n)"
        " before compiling; repeatable",
    )


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="nsopt",
        description="Depth-optimal simplification of nested sums.",
    )
    sp = ap.add_subparsers(dest="command", required=True)

    s = sp.add_parser("simplify", help="rewrite a nested sum at minimal depth")
    s.add_argument("expression", nargs="?", help="expression in n")
    s.add_argument("--file", help="read the expression from a file instead")
    s.add_argument(
        "--verify-range",
        type=int,
        default=60,
        metavar="N",
        help="check input == output exactly for k = lambda..lambda+N",
    )
    _add_search_flags(s)
    s.add_argument("--emit-tower", action="store_true", help="print the tower")
    s.add_argument("--json", action="store_true", help="machine-readable report")
    s.add_argument(
        "--h-sugar",
        action="store_true",
        help="print harmonic sums as H(n) / H(o,n)",
    )
    s.set_defaults(func=cmd_simplify)

    v = sp.add_parser("verify", help="exact comparison of two expressions")
    v.add_argument("lhs")
    v.add_argument("rhs")
    v.add_argument(
        "--range",
        type=int,
        default=60,
        metavar="N",
        help="compare for k = 0..N (default 60)",
    )
    v.set_defaults(func=cmd_verify)

    t = sp.add_parser("telescope", help="solve sigma(g) - g = f for one summand")
    t.add_argument("summand", help="summand expression in n")
    _add_search_flags(t)
    t.add_argument(
        "--h-sugar",
        action="store_true",
        help="print harmonic sums as H(n) / H(o,n)",
    )
    t.set_defaults(func=cmd_telescope)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
