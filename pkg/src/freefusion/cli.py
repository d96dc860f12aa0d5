"""Command-line front door.

Subcommands: class, check-axioms, world, auto, witness.  Human-readable
summaries go to stdout; machine artifacts are written only via --out.
Exit codes: 0 success/verified, 1 violation/invalid, 2 usage error,
3 solver exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import conjugacy
from .automorphisms import (
    ConstraintPolicy,
    GenericAutomorphism,
    IdentityAutomorphism,
    TableAutomorphism,
    build_commutator,
    build_L2_homogeneous,
    build_piecewise_increasing,
    certify_unbounded,
    check_moves_maximally,
    l2_pair_pattern,
    make_unboundedly_increasing,
)
from .classes import BUILTIN_CLASSES, OnePointConstraint, class_from_json, class_to_json, contains
from .core import FiniteStructure, compute_type
from .errors import FreefusionError, SolverExhausted
from .fusion import FUSION_NAMES, World, fusion_by_name
from .independence import AXIOMS, applicable_axioms, check_axiom, canonical_relation

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_EXHAUSTED = 3


def _load_json(path: str) -> dict:
    return json.loads(Path(path).read_text())


def _emit(data: dict, out: str | None) -> None:
    text = json.dumps(data, sort_keys=True, separators=(",", ":"))
    if out:
        Path(out).write_text(text + "\n")
    else:
        pass  # machine artifacts only via --out


def _load_class(spec: str):
    if spec.startswith("@"):
        return class_from_json(_load_json(spec[1:]))
    if spec in BUILTIN_CLASSES:
        return BUILTIN_CLASSES[spec]()
    raise FreefusionError(f"unknown class {spec!r}; builtins: {sorted(BUILTIN_CLASSES)}")


def constraint_from_json(data: dict) -> OnePointConstraint:
    def opt_frac(v):
        return None if v is None else Fraction(v)

    gap = data.get("order_gap")
    return OnePointConstraint(
        pos=tuple((n, tuple(t)) for n, t in data.get("pos", [])),
        neg=tuple((n, tuple(t)) for n, t in data.get("neg", [])),
        dist={int(p): Fraction(d) for p, d in data.get("dist", [])},
        order_gap=(opt_frac(gap[0]), opt_frac(gap[1])) if gap else None,
        out_arrows=frozenset(data.get("out_arrows", [])),
        in_arrows=frozenset(data.get("in_arrows", [])),
    )


# -- automorphism bundles -------------------------------------------------------


def _auto_bundle(g: GenericAutomorphism, spec: dict) -> dict:
    registry: dict = {}
    tree = conjugacy._collect_tables(g, registry)
    return {
        "world": g.world.export_json(),
        "spec": spec,
        "tree": tree,
        "tables": {
            name: {"pairs": sorted([list(p) for p in t.fwd.items()]), "fix": sorted(t.fix)}
            for name, t in registry.values()
        },
    }


def _build_auto(world: World, spec: dict) -> GenericAutomorphism:
    kind = spec["kind"]
    if kind == "l2hom":
        return build_L2_homogeneous(world, spec["mode"])
    if kind == "commutator":
        h = _build_auto(world, spec["h"])
        pol = ConstraintPolicy(spec["policy"], Fraction(spec.get("epsilon", "1/4")))
        return build_commutator(h, pol)
    if kind == "piecewise":
        return build_piecewise_increasing(world, spec["copies"])
    if kind == "unbounded":
        return make_unboundedly_increasing(_build_auto(world, spec["h"]))
    if kind == "identity":
        return IdentityAutomorphism(world)
    raise FreefusionError(f"unknown strategy kind {spec['kind']!r}")


def _parse_strategy(text: str) -> dict:
    """strategy specs: l2hom:increasing | commutator:move-max[:eps] | piecewise:K."""
    parts = text.split(":")
    if parts[0] == "l2hom":
        return {"kind": "l2hom", "mode": parts[1]}
    if parts[0] == "commutator":
        mode = "increasing" if parts[1] != "move-max-arrow" else "forward-arrow"
        spec = {
            "kind": "commutator",
            "policy": parts[1] if parts[1] != "move-max-arrow" else "move-max",
            "h": {"kind": "l2hom", "mode": mode},
        }
        if len(parts) > 2:
            spec["epsilon"] = parts[2]
        return spec
    if parts[0] == "piecewise":
        return {"kind": "piecewise", "copies": int(parts[1])}
    if parts[0] == "identity":
        return {"kind": "identity"}
    raise FreefusionError(f"cannot parse strategy {text!r}")


def _replay_auto(bundle: dict) -> GenericAutomorphism:
    """Rebuild the automorphism over the replayed world and re-pin its tables."""
    world = World.replay(bundle["world"])
    g = _build_auto(world, bundle["spec"])
    _repin(g, bundle["tree"], bundle["tables"])
    return g


def _repin(g: GenericAutomorphism, tree: dict, tables: dict) -> None:
    from .automorphisms import (
        CommutatorAutomorphism,
        ConjugateAutomorphism,
        InverseAutomorphism,
        ProductAutomorphism,
    )

    if isinstance(g, TableAutomorphism) and tree["kind"] == "table":
        for a, b in tables[tree["id"]]["pairs"]:
            g.fwd.setdefault(a, b)
            g.bwd.setdefault(b, a)
    elif isinstance(g, CommutatorAutomorphism) and tree["kind"] == "commutator":
        _repin(g.h, tree["h"], tables)
        _repin(g.f, tree["f"], tables)
    elif isinstance(g, InverseAutomorphism) and tree["kind"] == "inverse":
        _repin(g.g, tree["g"], tables)
    elif isinstance(g, ConjugateAutomorphism) and tree["kind"] == "conjugate":
        _repin(g.g, tree["g"], tables)
        _repin(g.a, tree["a"], tables)
    elif isinstance(g, ProductAutomorphism) and tree["kind"] == "product":
        for f, ft in zip(g.factors, tree["factors"]):
            _repin(f, ft, tables)


# -- subcommands ------------------------------------------------------------------


def cmd_class(args) -> int:
    c = _load_class(args.cls)
    if args.structure:
        s = FiniteStructure.from_json_dict(_load_json(args.structure))
        ok = contains(c, s)
        print(f"structure {'is' if ok else 'is NOT'} in the {c.kind} class")
        return EXIT_OK if ok else EXIT_VIOLATION
    info = {"descriptor": class_to_json(c), **c.describe()}
    print(json.dumps(info, indent=2, sort_keys=True))
    _emit(info, args.out)
    return EXIT_OK


def cmd_check_axioms(args) -> int:
    c = _load_class(args.cls)
    axioms = applicable_axioms(c) if args.axiom == "all" else (args.axiom,)
    reports = []
    bad = False
    for ax in axioms:
        rep = check_axiom(c, None, ax, size_bound=args.size, trials=args.trials, seed=args.seed)
        reports.append(rep.to_json_dict())
        status = "ok" if rep.ok else f"{len(rep.violations)} violations"
        print(f"{ax}: {rep.instances} instances, {status}")
        bad = bad or not rep.ok
    _emit({"class": args.cls, "reports": reports}, args.out)
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_world(args) -> int:
    if args.action == "new":
        w = World(fusion_by_name(args.fusion), seed=args.seed, mode=args.mode)
        print(f"new {args.fusion} world, seed {args.seed}")
        _emit(w.export_json(), args.out)
        return EXIT_OK
    w = World.replay(_load_json(args.world))
    if args.action == "show":
        print(f"fusion {fusion_by_name.__name__ if False else args.world}")
        print(f"points: {len(w.structure.points)}, member: {w.member()}")
        _emit(w.structure.to_json_dict(), args.out)
        return EXIT_OK
    if args.action == "realize":
        c1 = constraint_from_json(_load_json(args.l1) if args.l1.startswith("@") else json.loads(args.l1))
        if args.l2:
            c2 = constraint_from_json(_load_json(args.l2) if args.l2.startswith("@") else json.loads(args.l2))
            x = w.realize_union(c1, c2)
        else:
            x = w.new_point(c1)
        print(f"realized point {x}")
        _emit(w.export_json(), args.out)
        return EXIT_OK
    raise FreefusionError(f"unknown world action {args.action!r}")


def cmd_auto(args) -> int:
    if args.action == "build":
        w = World(fusion_by_name(args.fusion), seed=args.seed, mode=args.mode)
        spec = _parse_strategy(args.strategy)
        if args.epsilon and spec.get("kind") == "commutator":
            spec["epsilon"] = args.epsilon
        g = _build_auto(w, spec)
        print(f"built {args.strategy} over {args.fusion}")
        _emit(_auto_bundle(g, spec), args.out)
        return EXIT_OK
    bundle = _load_json(args.auto)
    g = _replay_auto(bundle)
    if args.action == "eval":
        x = int(args.point)
        y = g.eval_inverse(x) if args.inverse else g.eval(x)
        print(f"{'g^-1' if args.inverse else 'g'}({x}) = {y}")
        _emit(_auto_bundle(g, bundle["spec"]), args.out)
        return EXIT_OK
    if args.action == "certify":
        return _certify(g, args)
    raise FreefusionError(f"unknown auto action {args.action!r}")


def _certify(g: GenericAutomorphism, args) -> int:
    w = g.world
    s = w.structure
    queries = [int(t) for t in args.queries.split(",")] if args.queries else []
    if not queries:
        queries = [w.new_point(OnePointConstraint()) for _ in range(4)]
    prop = args.property
    results = []
    ok = True
    if prop == "fpf":
        for x in queries:
            moved = g.eval(x) != x
            results.append({"x": x, "moved": moved})
            ok = ok and moved
    elif prop == "increasing":
        for x in queries:
            up = s.order_coords[g.eval(x)] > s.order_coords[x]
            results.append({"x": x, "increasing": up})
            ok = ok and up
    elif prop == "l2hom":
        pats = {l2_pair_pattern(w, g, x) for x in queries}
        ok = len(pats) <= 1
        results.append({"patterns": sorted(map(list, pats))})
    elif prop == "unbounded":
        for a, b in zip(queries, queries[1:]):
            try:
                steps = certify_unbounded(g, a, b)
                results.append({"a": a, "b": b, "steps": steps})
            except FreefusionError as e:
                results.append({"a": a, "b": b, "error": str(e)})
                ok = False
    elif prop == "movemax":
        base = queries
        p = OnePointConstraint()
        try:
            x, gx = check_moves_maximally(g, p, base)
            results.append({"witness": x, "image": gx})
        except FreefusionError as e:
            results.append({"error": str(e)})
            ok = False
    else:
        raise FreefusionError(f"unknown property {prop!r}")
    print(f"{prop}: {'certified' if ok else 'FAILED'} on {len(queries)} queries")
    _emit({"property": prop, "ok": ok, "results": results}, args.out)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_witness(args) -> int:
    if args.action == "verify":
        data = _load_json(args.cert)
        ok, reasons = conjugacy.verify_certificate(data)
        print("certificate VALID" if ok else "certificate INVALID")
        for r in reasons:
            print(f"  - {r}")
        return EXIT_OK if ok else EXIT_VIOLATION
    if args.action == "vier":
        bundle = _load_json(args.auto)
        g = _replay_auto(bundle)
        w = g.world
        if args.x and args.y:
            xs = tuple(int(t) for t in args.x.split(","))
            ys = tuple(int(t) for t in args.y.split(","))
        else:
            n = int(args.x) if args.x else 1
            xs = tuple(w.new_point(OnePointConstraint()) for _ in range(n))
            ys = tuple(w.new_point(OnePointConstraint()) for _ in range(n))
            print(f"realized fresh tuples x={list(xs)} y={list(ys)}")
        cert = conjugacy.match_on_tuple(g, None, xs, ys)
        print(f"certificate built: {len(cert.dumps())} bytes")
        _emit(cert.data, args.out)
        return EXIT_OK
    if args.action == "batch":
        return _witness_batch(args)
    raise FreefusionError(f"unknown witness action {args.action!r}")


def _one_batch_trial(fusion: str, seed: int, epsilon: str) -> dict:
    w = World(fusion_by_name(fusion), seed=seed)
    mode = "increasing" if w.fused.signature.has_order else "forward-arrow"
    h = build_L2_homogeneous(w, mode)
    g = build_commutator(h, ConstraintPolicy("move-max", Fraction(epsilon)))
    xs = (w.new_point(OnePointConstraint()),)
    ys = (w.new_point(OnePointConstraint()),)
    cert = conjugacy.match_on_tuple(g, None, xs, ys)
    ok, reasons = conjugacy.verify_certificate(cert.data)
    return {"seed": seed, "ok": ok, "bytes": len(cert.dumps()), "reasons": reasons}


def _witness_batch(args) -> int:
    seeds = [args.seed + i for i in range(args.trials)]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(
                pool.map(_one_batch_trial, [args.fusion] * len(seeds), seeds, [args.epsilon] * len(seeds))
            )
    else:
        results = [_one_batch_trial(args.fusion, s, args.epsilon) for s in seeds]
    good = sum(1 for r in results if r["ok"])
    print(f"batch: {good}/{len(results)} certificates verified")
    _emit({"fusion": args.fusion, "results": results}, args.out)
    return EXIT_OK if good == len(results) else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--mode", choices=["seeded", "canonical"], default="seeded")
    common.add_argument("--epsilon", default="1/4", help="rational p/q, < 1/2 for order policies")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out", default=None, help="write the machine artifact here")

    ap = argparse.ArgumentParser(prog="freefusion", parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)

    def add_parser(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    p = add_parser("class", help="describe or test a class")
    p.add_argument("--class", dest="cls", required=True)
    p.add_argument("--structure", default=None)
    p.set_defaults(func=cmd_class)

    p = add_parser("check-axioms", help="verify independence axioms")
    p.add_argument("--class", dest="cls", required=True)
    p.add_argument("--axiom", default="all", choices=("all",) + AXIOMS)
    p.add_argument("--size", type=int, default=5)
    p.add_argument("--trials", type=int, default=0, help="0 = exhaustive")
    p.set_defaults(func=cmd_check_axioms)

    p = add_parser("world", help="build and grow generic worlds")
    p.add_argument("action", choices=["new", "realize", "show"])
    p.add_argument("--fusion", default="graph+order", choices=sorted(FUSION_NAMES))
    p.add_argument("--world", default=None)
    p.add_argument("--l1", default=None, help="constraint JSON (inline or @file)")
    p.add_argument("--l2", default=None)
    p.set_defaults(func=cmd_world)

    p = add_parser("auto", help="build, evaluate, certify automorphisms")
    p.add_argument("action", choices=["build", "eval", "certify"])
    p.add_argument("--fusion", default="graph+order", choices=sorted(FUSION_NAMES))
    p.add_argument("--strategy", default="l2hom:increasing")
    p.add_argument("--auto", default=None, help="automorphism bundle JSON")
    p.add_argument("--point", default=None)
    p.add_argument("--inverse", action="store_true")
    p.add_argument("--property", default="l2hom", choices=["fpf", "increasing", "unbounded", "l2hom", "movemax"])
    p.add_argument("--queries", default=None, help="comma-separated point ids")
    p.set_defaults(func=cmd_auto)

    p = add_parser("witness", help="four-conjugate certificates")
    p.add_argument("action", choices=["vier", "verify", "batch"])
    p.add_argument("--auto", default=None)
    p.add_argument("--x", default=None)
    p.add_argument("--y", default=None)
    p.add_argument("--cert", default=None)
    p.add_argument("--fusion", default="graph+order", choices=sorted(FUSION_NAMES))
    p.add_argument("--trials", type=int, default=5)
    p.set_defaults(func=cmd_witness)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except SolverExhausted as e:
        print(f"solver exhausted: {e}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except FreefusionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
