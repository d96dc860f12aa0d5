"""Amalgamation class descriptors with membership tests, canonical amalgams,
and one-point completion solvers.

The built-in kinds:

  forbidden    - relational structures avoiding a list of patterns (empty
                 list = random graph / hypergraph class); free independence
  metric       - rational metric spaces with distances in (0,1]
  poset        - strict partial orders via the binary relation "po"
  order        - finite strict total orders, stored as rational coordinates
  tournament   - complete antisymmetric irreflexive directed edge sets

Completion policy (the canonical mode): unspecified relations stay absent,
unspecified distances take the maximal admissible value, unspecified arrows
point from lower to higher id, order coordinates take gap midpoints or the
next integer beyond the extremes.  Seeded mode draws the same choices from an
explicit rng.  Both agree with the canonical independent amalgams.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .core import (
    EMPTY_SIG,
    GRAPH_SIG,
    METRIC_SIG,
    ORDER_SIG,
    POSET_SIG,
    TOURNAMENT_SIG,
    FiniteStructure,
    Point,
    Signature,
    _mkey,
    embeds,
)
from .errors import (
    HasExpansionComponent,
    IdentificationNotIso,
    NoCompletion,
    NotInClass,
    SignatureMismatch,
    Unsupported,
)

KINDS = ("forbidden", "metric", "poset", "order", "tournament")


@dataclass(frozen=True)
class AmalgamationClass:
    kind: str
    signature: Signature
    patterns: tuple[FiniteStructure, ...] = ()
    symmetric: frozenset[str] = frozenset()  # binary relations stored in both directions

    def __post_init__(self):
        if self.kind not in KINDS:
            raise Unsupported(f"unknown class kind {self.kind!r}")
        for p in self.patterns:
            if p.signature != self.signature:
                raise SignatureMismatch("pattern signature differs from class signature")
        for name in self.symmetric:
            if self.signature.arity(name) != 2:
                raise Unsupported("only binary relations can be symmetric")

    @property
    def independence_kind(self) -> str:
        if self.kind == "forbidden":
            return "free"
        if self.kind == "metric":
            return "metric"
        if self.kind == "poset":
            return "poset"
        return "trivial"  # order / tournament carry the indiscernible-set relation

    def describe(self) -> dict:
        out = {"kind": self.kind, "independence": self.independence_kind}
        if self.kind == "forbidden":
            out["patterns"] = [p.to_json_dict() for p in self.patterns]
            # Whether an arbitrary pattern list yields a nontrivial/transitive
            # limit is not decided here; only the built-in kinds are certified.
            out["nontrivial_transitive"] = "not decided"
        return out

    def empty_structure(self) -> FiniteStructure:
        return FiniteStructure(signature=self.signature)


def graph_class() -> AmalgamationClass:
    return AmalgamationClass("forbidden", GRAPH_SIG, symmetric=frozenset({"E"}))


def kn_free_class(n: int) -> AmalgamationClass:
    pat = FiniteStructure(signature=GRAPH_SIG, points=set(range(n)))
    for a in range(n):
        for b in range(a + 1, n):
            pat.relations["E"].update({(a, b), (b, a)})
    return AmalgamationClass("forbidden", GRAPH_SIG, (pat,), symmetric=frozenset({"E"}))


def trivial_class() -> AmalgamationClass:
    """The empty-language class: its limit is an indiscernible set."""
    return AmalgamationClass("forbidden", EMPTY_SIG)


def metric_class() -> AmalgamationClass:
    return AmalgamationClass("metric", METRIC_SIG)


def poset_class() -> AmalgamationClass:
    return AmalgamationClass("poset", POSET_SIG)


def order_class() -> AmalgamationClass:
    return AmalgamationClass("order", ORDER_SIG)


def tournament_class() -> AmalgamationClass:
    return AmalgamationClass("tournament", TOURNAMENT_SIG)


BUILTIN_CLASSES = {
    "graph": graph_class,
    "k3free": lambda: kn_free_class(3),
    "trivial": trivial_class,
    "metric": metric_class,
    "poset": poset_class,
    "order": order_class,
    "tournament": tournament_class,
}


def class_from_json(data: Mapping) -> AmalgamationClass:
    kind = data["kind"]
    if kind == "forbidden":
        pats = tuple(FiniteStructure.from_json_dict(p) for p in data.get("patterns", ()))
        sig = pats[0].signature if pats else GRAPH_SIG
        sym = frozenset(data.get("symmetric", ["E"] if "E" in sig.rel_names() else []))
        return AmalgamationClass("forbidden", sig, pats, symmetric=sym)
    return {
        "metric": metric_class,
        "poset": poset_class,
        "order": order_class,
        "tournament": tournament_class,
    }[kind]()


def class_to_json(c: AmalgamationClass) -> dict:
    out: dict = {"kind": c.kind}
    if c.kind == "forbidden":
        out["patterns"] = [p.to_json_dict() for p in c.patterns]
        out["symmetric"] = sorted(c.symmetric)
    return out


# -- membership ---------------------------------------------------------------


def contains(c: AmalgamationClass, s: FiniteStructure) -> bool:
    if s.signature != c.signature:
        raise SignatureMismatch(
            f"structure signature does not match {c.kind} class signature"
        )
    try:
        s.validate()
    except ValueError:
        return False
    if c.kind == "forbidden":
        return not any(embeds(p, s) for p in c.patterns)
    if c.kind == "poset":
        po = s.relations.get("po", set())
        for a, b in po:
            if a == b:
                return False
            for b2, cc in po:
                if b2 == b and (a, cc) not in po:
                    return False
        return True
    # metric / order / tournament axioms are exactly structure validity
    return True


# -- canonical independent amalgam --------------------------------------------


def amalgamate(
    c: AmalgamationClass,
    a_struct: FiniteStructure,
    b_struct: FiniteStructure,
    identification: Mapping[Point, Point],
) -> FiniteStructure:
    """Canonical independent amalgam of A and B over the common part C.

    `identification` maps points of B onto their copies in A; it must be an
    isomorphism of induced substructures.  Points of B outside C keep their
    ids unless they collide with A, in which case they are renamed to fresh
    ids deterministically (ascending).
    """
    if c.signature.has_order or c.signature.has_tournament:
        raise HasExpansionComponent("order/tournament parts are fused, not amalgamated")
    if not contains(c, a_struct) or not contains(c, b_struct):
        raise NotInClass("amalgamation inputs must lie in the class")
    from .core import same_type_over

    cb = sorted(identification)
    try:
        ok = same_type_over(b_struct, (), a_struct, (), dict(identification))
    except Exception as e:
        raise IdentificationNotIso(str(e))
    if not ok:
        raise IdentificationNotIso("identification is not an isomorphism")

    out = a_struct.copy()
    rename: dict[Point, Point] = dict(identification)
    nxt = max(a_struct.points | b_struct.points, default=-1) + 1
    for p in sorted(b_struct.points):
        if p in rename:
            continue
        if p in a_struct.points:
            rename[p] = nxt
            nxt += 1
        else:
            rename[p] = p
    b_new = [rename[p] for p in sorted(b_struct.points) if p not in identification]
    out.points.update(b_new)

    for name, tuples in b_struct.relations.items():
        out.relations.setdefault(name, set())
        for t in tuples:
            out.relations[name].add(tuple(rename[q] for q in t))

    if c.kind == "poset":
        # cross comparabilities only where forced through C, then nothing more
        po = out.relations["po"]
        cpts = [identification[p] for p in cb]
        aside = sorted(a_struct.points - set(cpts))
        for x in aside:
            for y in b_new:
                if any((x, m) in po and ((m, y) in po or m == y) for m in cpts):
                    po.add((x, y))
                if any((y, m) in po and ((m, x) in po or m == x) for m in cpts):
                    po.add((y, x))

    if c.kind == "metric":
        for (p, q), d in b_struct.metric.items():
            out.metric[_mkey(rename[p], rename[q])] = d
        cpts = [identification[p] for p in cb]
        for x in sorted(a_struct.points - set(cpts)):
            for y in b_new:
                vals = [out.dist(x, m) + out.dist(m, y) for m in cpts]
                out.metric[_mkey(x, y)] = min([Fraction(1), *vals])

    if not contains(c, out):
        raise NotInClass("amalgam left the class")  # pragma: no cover - closure property
    return out


# -- one-point extension -------------------------------------------------------

Fact = tuple[str, tuple[Optional[Point], ...]]  # None marks the new point


def _fact_key(f: Fact) -> tuple:
    name, t = f
    return (name, tuple(-1 if q is None else q for q in t))


@dataclass(frozen=True)
class OnePointConstraint:
    """Partial specification of a new point relative to existing ones."""

    pos: tuple[Fact, ...] = ()
    neg: tuple[Fact, ...] = ()
    dist: Mapping[Point, Fraction] = field(default_factory=dict)
    dist_bounds: Mapping[Point, tuple[Fraction, Fraction]] = field(default_factory=dict)
    order_gap: Optional[tuple[Optional[Fraction], Optional[Fraction]]] = None
    order_pref: Optional[str] = None  # "low" | "high": which free sub-gap to take
    out_arrows: frozenset[Point] = frozenset()  # new -> a
    in_arrows: frozenset[Point] = frozenset()  # a -> new

    def merged(self, other: OnePointConstraint) -> OnePointConstraint:
        gap = self.order_gap
        if other.order_gap is not None:
            if gap is None:
                gap = other.order_gap
            else:
                lo = max((g for g in (gap[0], other.order_gap[0]) if g is not None), default=None)
                hi = min((g for g in (gap[1], other.order_gap[1]) if g is not None), default=None)
                gap = (lo, hi)
        dist = dict(self.dist)
        for p, d in other.dist.items():
            if p in dist and dist[p] != d:
                raise NoCompletion(f"conflicting exact distances at point {p}")
            dist[p] = d
        if (self.out_arrows & other.in_arrows) or (self.in_arrows & other.out_arrows):
            raise NoCompletion("conflicting arrow directions")
        return OnePointConstraint(
            pos=self.pos + other.pos,
            neg=self.neg + other.neg,
            dist=dist,
            dist_bounds={**self.dist_bounds, **other.dist_bounds},
            order_gap=gap,
            order_pref=other.order_pref or self.order_pref,
            out_arrows=self.out_arrows | other.out_arrows,
            in_arrows=self.in_arrows | other.in_arrows,
        )

    def mentioned_points(self) -> set[Point]:
        pts: set[Point] = set()
        for _, t in self.pos + self.neg:
            pts.update(q for q in t if q is not None)
        pts.update(self.dist)
        pts.update(self.dist_bounds)
        pts.update(self.out_arrows)
        pts.update(self.in_arrows)
        return pts


@dataclass
class NewPointFacts:
    """The fully resolved completion for one new point; replayable verbatim."""

    new_id: Point
    rel_facts: list[tuple[str, tuple[Point, ...]]] = field(default_factory=list)
    distances: dict[Point, Fraction] = field(default_factory=dict)
    coord: Optional[Fraction] = None
    out_arrows: list[Point] = field(default_factory=list)
    in_arrows: list[Point] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        out: dict = {"id": self.new_id}
        if self.rel_facts:
            out["rels"] = sorted([[n, list(t)] for n, t in self.rel_facts])
        if self.distances:
            out["dist"] = [[p, str(d)] for p, d in sorted(self.distances.items())]
        if self.coord is not None:
            out["ord"] = str(self.coord)
        if self.out_arrows:
            out["out"] = sorted(self.out_arrows)
        if self.in_arrows:
            out["in"] = sorted(self.in_arrows)
        return out

    @staticmethod
    def from_json_dict(data: Mapping) -> NewPointFacts:
        return NewPointFacts(
            new_id=data["id"],
            rel_facts=[(n, tuple(t)) for n, t in data.get("rels", [])],
            distances={p: Fraction(d) for p, d in data.get("dist", [])},
            coord=Fraction(data["ord"]) if "ord" in data else None,
            out_arrows=list(data.get("out", [])),
            in_arrows=list(data.get("in", [])),
        )


def apply_facts(s: FiniteStructure, facts: NewPointFacts) -> None:
    """Mutating fast path used by worlds; `extend_one_point` copies first."""
    x = facts.new_id
    s.points.add(x)
    for name, t in facts.rel_facts:
        s.relations.setdefault(name, set()).add(t)
    for p, d in facts.distances.items():
        s.metric[_mkey(x, p)] = d
    if facts.coord is not None:
        s.order_coords[x] = facts.coord
    for p in facts.out_arrows:
        s.arrows.add((x, p))
    for p in facts.in_arrows:
        s.arrows.add((p, x))


def _fill_tuple(t: tuple[Optional[Point], ...], x: Point) -> tuple[Point, ...]:
    return tuple(x if q is None else q for q in t)


def solve_completion(
    c: AmalgamationClass,
    s: FiniteStructure,
    constraint: OnePointConstraint,
    new_id: Point,
    mode: str = "canonical",
    rng: Optional[random.Random] = None,
) -> NewPointFacts:
    """Resolve a constraint to concrete facts for one new point, or NoCompletion."""
    s.check_points(constraint.mentioned_points())
    if mode == "seeded" and rng is None:
        raise ValueError("seeded mode needs an rng")
    facts = NewPointFacts(new_id=new_id)

    if c.kind in ("forbidden", "poset"):
        _solve_relational(c, s, constraint, facts)
    if c.kind == "metric":
        _solve_metric(s, constraint, facts, mode, rng)
    if c.kind == "order":
        facts.coord = _solve_order(s, constraint, mode, rng)
    if c.kind == "tournament":
        _solve_tournament(s, constraint, facts, mode, rng)
    return facts


def _solve_relational(
    c: AmalgamationClass,
    s: FiniteStructure,
    constraint: OnePointConstraint,
    facts: NewPointFacts,
) -> None:
    x = facts.new_id
    pos = [(n, _fill_tuple(t, x)) for n, t in constraint.pos]
    neg = {(n, _fill_tuple(t, x)) for n, t in constraint.neg}
    for n, t in list(pos):
        if n in c.symmetric:
            pos.append((n, (t[1], t[0])))
    for n, t in list(neg):
        if n in c.symmetric:
            neg.add((n, (t[1], t[0])))
    for fact in pos:
        if fact in neg:
            raise NoCompletion(f"fact {fact} both required and forbidden")

    if c.kind == "poset":
        po = s.relations.get("po", set())
        below = {b for n, t in pos if n == "po" and t[0] == x for b in [t[1]]}
        above = {a for n, t in pos if n == "po" and t[1] == x for a in [t[0]]}
        # transitive closure of the demanded comparabilities
        below |= {q for b in below for (p, q) in po if p == b}
        above |= {p for a in above for (p, q) in po if q == a}
        if x in below or x in above or (below & above):
            raise NoCompletion("poset constraint forces a cycle through the new point")
        for a in above:
            for b in below:
                if (a, b) not in po:
                    raise NoCompletion(
                        f"poset constraint forces {a} < {b} between existing points"
                    )
        for n, t in neg:
            if n == "po" and t[0] == x and t[1] in below:
                raise NoCompletion(f"required incomparability {t} is forced")
            if n == "po" and t[1] == x and t[0] in above:
                raise NoCompletion(f"required incomparability {t} is forced")
        facts.rel_facts = [("po", (x, b)) for b in sorted(below)] + [
            ("po", (a, x)) for a in sorted(above)
        ]
    else:
        facts.rel_facts = sorted(set(pos))
        if c.patterns:
            # base is pattern-free, so any embedding in the trial uses x
            trial = s.copy()
            apply_facts(trial, facts)
            if any(embeds(p, trial) for p in c.patterns):
                raise NoCompletion("required facts complete a forbidden pattern")


def _solve_metric(
    s: FiniteStructure,
    constraint: OnePointConstraint,
    facts: NewPointFacts,
    mode: str,
    rng: Optional[random.Random],
) -> None:
    one = Fraction(1)
    spec: dict[Point, tuple[Fraction, Fraction]] = {}
    for p, d in constraint.dist.items():
        if not (0 < d <= 1):
            raise NoCompletion(f"exact distance {d} outside (0,1]")
        spec[p] = (d, d)
    for p, (lo, hi) in constraint.dist_bounds.items():
        lo, hi = max(lo, Fraction(0)), min(hi, one)
        if p in spec:
            lo, hi = max(lo, spec[p][0]), min(hi, spec[p][1])
        if lo > hi or hi <= 0:
            raise NoCompletion(f"empty distance interval at point {p}")
        spec[p] = (lo, hi)

    pts = sorted(s.points)
    # One propagation pass over the specified distances is exact here: paths
    # through unspecified points never bind (their upper bound is already the
    # diameter), and the known table satisfies the triangle inequality.
    lo_b: dict[Point, Fraction] = {}
    hi_b: dict[Point, Fraction] = {}
    for a in pts:
        hi_v = one
        lo_v = Fraction(0)
        for b, (blo, bhi) in spec.items():
            if b == a:
                continue
            d = s.dist(a, b)
            hi_v = min(hi_v, bhi + d)
            lo_v = max(lo_v, blo - d, d - bhi)
        if a in spec:
            lo_v, hi_v = max(lo_v, spec[a][0]), min(hi_v, spec[a][1])
        if lo_v > hi_v or hi_v <= 0:
            raise NoCompletion(
                f"distance interval at point {a} empty after triangle propagation"
            )
        lo_b[a], hi_b[a] = lo_v, hi_v

    if mode == "canonical":
        for a in pts:
            facts.distances[a] = hi_b[a]
    else:
        # assign one at a time, re-tightening; any in-interval value extends
        assigned: dict[Point, Fraction] = {}
        for a in pts:
            lo_v, hi_v = lo_b[a], hi_b[a]
            for b, v in assigned.items():
                d = s.dist(a, b)
                hi_v = min(hi_v, v + d)
                lo_v = max(lo_v, v - d, d - v)
            if lo_v > hi_v or hi_v <= 0:  # pragma: no cover - propagation is exact
                raise NoCompletion("sequential metric assignment failed")
            k = rng.randint(0, 16)
            v = lo_v + (hi_v - lo_v) * Fraction(k, 16)
            if v <= 0:
                v = hi_v
            assigned[a] = v
        facts.distances = assigned


def _solve_order(
    s: FiniteStructure,
    constraint: OnePointConstraint,
    mode: str,
    rng: Optional[random.Random],
) -> Fraction:
    lo, hi = constraint.order_gap if constraint.order_gap else (None, None)
    if lo is not None and hi is not None and lo >= hi:
        raise NoCompletion(f"empty order interval ({lo},{hi})")
    coords = sorted(s.order_coords.values())
    inside = [c for c in coords if (lo is None or c > lo) and (hi is None or c < hi)]

    if hi is None:
        base = [c for c in ([] if lo is None else [lo]) + coords]
        top = max(base, default=Fraction(-1))
        import math

        return Fraction(math.floor(top) + 1)
    if lo is None:
        base = [hi] + coords
        import math

        return Fraction(math.ceil(min(base)) - 1)

    gaps = []
    edges = [lo] + inside + [hi]
    for i in range(len(edges) - 1):
        gaps.append((edges[i], edges[i + 1]))
    if constraint.order_pref == "high":
        glo, ghi = gaps[-1]
    elif constraint.order_pref == "low":
        glo, ghi = gaps[0]
    elif mode == "seeded":
        glo, ghi = gaps[rng.randrange(len(gaps))]
    else:
        glo, ghi = gaps[0]
    return (glo + ghi) / 2


def _solve_tournament(
    s: FiniteStructure,
    constraint: OnePointConstraint,
    facts: NewPointFacts,
    mode: str,
    rng: Optional[random.Random],
) -> None:
    out = set(constraint.out_arrows)
    inc = set(constraint.in_arrows)
    if out & inc:
        raise NoCompletion("conflicting arrow directions")
    for p in sorted(s.points):
        if p in out or p in inc:
            continue
        if mode == "seeded":
            (out if rng.random() < 0.5 else inc).add(p)
        else:
            inc.add(p)  # canonical: lower id -> higher id; the new point is highest
    facts.out_arrows = sorted(out)
    facts.in_arrows = sorted(inc)


def extend_one_point(
    c: AmalgamationClass,
    s: FiniteStructure,
    constraint: OnePointConstraint,
    new_id: Optional[Point] = None,
    mode: str = "canonical",
    rng: Optional[random.Random] = None,
) -> tuple[FiniteStructure, Point]:
    """Pure one-point extension: returns a new structure and the new id."""
    if not contains(c, s):
        raise NotInClass("base structure is not in the class")
    x = max(s.points, default=-1) + 1 if new_id is None else new_id
    if x in s.points:
        raise ValueError(f"new id {x} already present")
    facts = solve_completion(c, s, constraint, x, mode=mode, rng=rng)
    out = s.copy()
    apply_facts(out, facts)
    if not contains(c, out):
        raise NoCompletion("completion left the class")
    return out, x


# -- type transport helpers ----------------------------------------------------


def point_facts(
    s: FiniteStructure, x: Point, others: Sequence[Point]
) -> OnePointConstraint:
    """The quantifier-free facts of x relative to `others`, as a constraint.

    Relabeling the result over an isomorphic base realizes tp(x/others).
    Only facts inside {x} ∪ others are recorded.
    """
    inside = set(others) | {x}
    pos: list[Fact] = []
    for name, tuples in s.relations.items():
        for t in tuples:
            if x in t and all(q in inside for q in t):
                pos.append((name, tuple(None if q == x else q for q in t)))
    dist = {}
    if s.signature.has_metric:
        dist = {p: s.dist(x, p) for p in others if p != x}
    gap = None
    if s.signature.has_order:
        cx = s.order_coords[x]
        below = [s.order_coords[p] for p in others if p != x and s.order_coords[p] < cx]
        above = [s.order_coords[p] for p in others if p != x and s.order_coords[p] > cx]
        gap = (max(below, default=None), min(above, default=None))
    out_a = frozenset(p for p in others if p != x and s.has_arrow(x, p))
    in_a = frozenset(p for p in others if p != x and s.has_arrow(p, x))
    return OnePointConstraint(
        pos=tuple(sorted(set(pos), key=_fact_key)),
        dist=dist,
        order_gap=gap,
        out_arrows=out_a,
        in_arrows=in_a,
    )


def relabel_constraint(
    constraint: OnePointConstraint,
    mapping: Mapping[Point, Point],
    target: FiniteStructure,
) -> OnePointConstraint:
    """Transport a constraint along a base bijection into `target`."""

    def mp(q: Optional[Point]) -> Optional[Point]:
        return None if q is None else mapping[q]

    gap = None
    if constraint.order_gap is not None:
        lo, hi = constraint.order_gap
        gap = (lo, hi)
    return OnePointConstraint(
        pos=tuple((n, tuple(mp(q) for q in t)) for n, t in constraint.pos),
        neg=tuple((n, tuple(mp(q) for q in t)) for n, t in constraint.neg),
        dist={mapping[p]: d for p, d in constraint.dist.items()},
        dist_bounds={mapping[p]: b for p, b in constraint.dist_bounds.items()},
        order_gap=gap,
        order_pref=constraint.order_pref,
        out_arrows=frozenset(mapping[p] for p in constraint.out_arrows),
        in_arrows=frozenset(mapping[p] for p in constraint.in_arrows),
    )


def transported_facts(
    s: FiniteStructure,
    x: Point,
    src_base: Sequence[Point],
    dst_base: Sequence[Point],
    dst_struct: Optional[FiniteStructure] = None,
) -> OnePointConstraint:
    """tp(x/src_base) transported along src_base[i] -> dst_base[i].

    The order gap is recomputed from the destination base coordinates so the
    realization lands in the corresponding gap.
    """
    if len(src_base) != len(set(src_base)) or len(src_base) != len(dst_base):
        raise ValueError("bases must be duplicate-free and aligned")
    t = dst_struct if dst_struct is not None else s
    mapping = dict(zip(src_base, dst_base))
    c = point_facts(s, x, src_base)
    c = relabel_constraint(c, mapping, t)
    if s.signature.has_order:
        cx = s.order_coords[x]
        below = [mapping[p] for p in src_base if p != x and s.order_coords[p] < cx]
        above = [mapping[p] for p in src_base if p != x and s.order_coords[p] > cx]
        lo = max((t.order_coords[p] for p in below), default=None)
        hi = min((t.order_coords[p] for p in above), default=None)
        c = replace(c, order_gap=(lo, hi))
    return c


def independent_completion(
    c: AmalgamationClass,
    s: FiniteStructure,
    constraint: OnePointConstraint,
    base: Iterable[Point],
    others: Iterable[Point],
) -> OnePointConstraint:
    """Extend a constraint over `base` with the facts that make the new point
    independent from `others` over `base`, per the class's canonical relation.

    free      - no relations toward others (the default completion already)
    metric    - d(x,c) = min(1, min_b d(x,b) + d(b,c)); 1 when base is empty
    poset     - comparabilities to others exactly when forced through base
    trivial   - nothing to add
    """
    base = sorted(set(base))
    extra = sorted(set(others) - set(base))
    if not extra:
        return constraint
    if c.independence_kind == "metric":
        add = {}
        for w in extra:
            if w in constraint.dist:
                continue
            vals = [constraint.dist[b] + s.dist(b, w) for b in base if b in constraint.dist]
            add[w] = min([Fraction(1), *vals])
        return constraint.merged(OnePointConstraint(dist=add))
    if c.independence_kind == "poset":
        po = s.relations.get("po", set())
        below = {t[1] for n, t in constraint.pos if n == "po" and t[0] is None}
        above = {t[0] for n, t in constraint.pos if n == "po" and t[1] is None}
        pos = []
        for w in extra:
            if any(b == w or (b, w) in po for b in below):
                pos.append(("po", (None, w)))
            if any(a == w or (w, a) in po for a in above):
                pos.append(("po", (w, None)))
        return constraint.merged(OnePointConstraint(pos=tuple(pos)))
    return constraint
