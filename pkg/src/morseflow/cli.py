"""Command line interface: ``morseflow analyze|word2braid|extend|compare|selfcheck``."""
from __future__ import annotations

import argparse
import json
import os
import random
import sys
import time
from importlib import resources

from .braid import (BraidValidationError, dump_braid, extend, load_braid, parse_word,
                    word_to_diagram)
from .complex import CellBudgetExceeded
from .dynamics import InvariantError, format_lambda_table, lambda_table

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 2, 3

FIXTURES = ["exampleA", "sigma_d3", "sigma_d4", "sigma_d5", "pseudo_anosov"]


def fixture_path(name, directory=None):
    if directory:
        return os.path.join(directory, f"{name}.json")
    return str(resources.files("morseflow") / "data" / f"{name}.json")


def golden_path(name, suffix="report.json"):
    return str(resources.files("morseflow") / "data" / "golden" / f"{name}.{suffix}")


def _emit(text, path=None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_analyze(args):
    from .grading import to_dot
    from .pipeline import analyze, report_json
    b = load_braid(args.braid)
    res = analyze(b, cell_budget=args.cell_budget, keep_chain_maps=args.debug_chain_maps)
    text = report_json(res)
    if args.json:
        _emit(text, args.json)
    else:
        sys.stdout.write(text)
    if args.lambda_table:
        _emit(format_lambda_table(lambda_table(res.dynamics.complex, res.dynamics.lam)), args.lambda_table)
    if args.dot:
        os.makedirs(args.dot, exist_ok=True)
        stem = os.path.splitext(os.path.basename(args.braid))[0]
        _emit(to_dot(res.diagram, "full"), os.path.join(args.dot, f"{stem}_full.dot"))
        _emit(to_dot(res.diagram.reduced, "reduced"), os.path.join(args.dot, f"{stem}_reduced.dot"))
    if args.debug_chain_maps:
        x = res.dynamics.complex
        x.boundary_matrix().dump_triplets((args.json or "boundary") + ".triplets")
    return EXIT_OK


def cmd_word2braid(args):
    b = word_to_diagram(parse_word(args.word), args.n_inner)
    _emit(dump_braid(b), args.output)
    return EXIT_OK


def cmd_extend(args):
    if args.k < 0:
        raise ValueError("k must be nonnegative")
    b = load_braid(args.braid)
    for _ in range(args.k):
        b = extend(b)
    _emit(dump_braid(b), args.output)
    return EXIT_OK


def compare_braids(a, b, cell_budget=None):
    from .grading import diagram_isomorphic
    from .pipeline import analyze
    ra, rb = analyze(a, cell_budget), analyze(b, cell_budget)
    return {"isomorphic": diagram_isomorphic(ra.reduced, rb.reduced),
            "polynomial_equal": ra.total() == rb.total()}


def cmd_compare(args):
    out = compare_braids(load_braid(args.a), load_braid(args.b), args.cell_budget)
    sys.stdout.write(json.dumps(out, sort_keys=True) + "\n")
    return EXIT_OK


def selfcheck(verbose=False, fixtures_dir=None, skip=(), log=print):
    """Run the property checks on the shipped fixtures; returns the failures."""
    from .algebra import random_down_sets, verify_equivalence
    from .dynamics import verify_block
    from .order import down_sets, join_irreducibles, poset_from_leq
    from .pipeline import analyze, report_json
    failures = []

    def record(name, ok, started):
        if verbose:
            log(f"{'PASS' if ok else 'FAIL'} {name} ({time.perf_counter() - started:.2f}s)")
        if not ok:
            failures.append(name)

    t = time.perf_counter()
    rng = random.Random(7)
    ok = True
    for _ in range(200):
        p = _random_poset(rng, rng.randint(1, 8), poset_from_leq)
        lat = down_sets(p)
        j = join_irreducibles(lat)
        # irreducibles are the principal down-sets, ordered by inclusion
        if sorted(map(sorted, j.labels)) != sorted(sorted(p.down_set(a)) for a in range(p.n)):
            ok = False
        rebuilt = {frozenset().union(*(j.labels[k] for k in d)) for d in down_sets(j)}
        if rebuilt != set(lat):
            ok = False
    record("birkhoff round trips", ok, t)
    for name in FIXTURES:
        if name in skip:
            continue
        t = time.perf_counter()
        try:
            b = load_braid(fixture_path(name, fixtures_dir))
            res = analyze(b)
        except (BraidValidationError, InvariantError, ValueError) as exc:
            record(f"{name}: analysis ({exc})", False, t)
            continue
        record(f"{name}: analysis", True, t)
        dyn = res.dynamics
        t = time.perf_counter()
        record(f"{name}: boundary squares to zero", dyn.complex.boundary_matrix().squares_to_zero(), t)
        t = time.perf_counter()
        ok = all(verify_block(dyn.complex, dyn.rel, dyn.scd, dyn.scd.order.down_set(k))
                 for k in range(len(dyn.scd)))
        record(f"{name}: principal down-sets are attracting blocks", ok, t)
        t = time.perf_counter()
        try:
            verify_equivalence(res.graded, res.conley, random_down_sets(dyn.scd.leq, 50, random.Random(1)))
            ok = True
        except AssertionError:
            ok = False
        record(f"{name}: homology of sampled down-sets preserved", ok, t)
        t = time.perf_counter()
        record(f"{name}: Morse relations", res.relations.holds, t)
        record(f"{name}: total homology is one point",
               dict(res.spectral.infinity) == {(0, 0): 1}, t)
        gold = golden_path(name)
        if os.path.exists(gold) and fixtures_dir is None:
            with open(gold) as fh:
                record(f"{name}: report matches golden file", fh.read() == report_json(res), t)
    return failures


def _random_poset(rng, n, poset_from_leq):
    # random DAG on 0..n-1 with edges going up, then its transitive closure
    rel = [[i == j or (i < j and rng.random() < 0.3) for j in range(n)] for i in range(n)]
    for k in range(n):
        for i in range(n):
            if rel[i][k]:
                for j in range(n):
                    if rel[k][j]:
                        rel[i][j] = True
    return poset_from_leq(n, lambda a, b: rel[a][b])


def cmd_selfcheck(args):
    failures = selfcheck(args.verbose, args.fixtures, skip=tuple(args.skip or ()))
    if failures:
        for f in failures:
            print(f"FAIL {f}", file=sys.stderr)
        return EXIT_INTERNAL
    print("selfcheck ok")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="morseflow", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="full analysis of a braid file (JSON report on stdout)")
    a.add_argument("braid")
    a.add_argument("--dot", metavar="DIR", help="write full and reduced phase diagrams as DOT")
    a.add_argument("--lambda-table", metavar="PATH", help="write the λ grid (d = 2 only)")
    a.add_argument("--json", metavar="PATH", help="write the report here instead of stdout")
    a.add_argument("--cell-budget", type=int, default=None)
    a.add_argument("--debug-chain-maps", action="store_true",
                   help="keep reduction chain maps and dump boundary triplets")
    a.add_argument("--field", choices=["gf2"], default="gf2")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("word2braid", help='braid file from a positive word such as "s1 s1 s2"')
    w.add_argument("word")
    w.add_argument("n_inner", type=int)
    w.add_argument("-o", "--output")
    w.set_defaults(func=cmd_word2braid)

    e = sub.add_parser("extend", help="apply the extension operator k times")
    e.add_argument("braid")
    e.add_argument("k", type=int)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_extend)

    c = sub.add_parser("compare", help="compare reduced phase diagrams of two braid files")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--cell-budget", type=int, default=None)
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("selfcheck", help="run the property checks on the shipped fixtures")
    s.add_argument("--verbose", action="store_true")
    s.add_argument("--fixtures", metavar="DIR", help="read fixtures from DIR instead")
    s.add_argument("--skip", action="append", metavar="NAME", help="skip a fixture")
    s.set_defaults(func=cmd_selfcheck)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BraidValidationError, CellBudgetExceeded, ValueError, OSError) as exc:
        where = getattr(args, "braid", None) or getattr(args, "a", None)
        print(f"error: {where + ': ' if where else ''}{exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InvariantError, AssertionError) as exc:
        print(f"internal invariant failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
