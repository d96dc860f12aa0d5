"""Finite labeled structures, signatures, and quantifier-free tuple types.

Everything downstream computes on `FiniteStructure`: a finite set of integer
point ids carrying relation tables, an optional exact-rational metric with
values in (0,1], optional rational order coordinates (encoding a strict total
order), and an optional tournament arrow set.  All arithmetic is
`fractions.Fraction`; there is no floating point anywhere in the kernel.

Types of tuples over finite base sets are marked-isomorphism canonical forms:
base points are pinned in a designated order and tuple points are pinned by
first occurrence, so the canonical form is a direct relabeling (no search) and
two types are equal iff their forms are identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import InvalidEmbedding, NotSublanguage, UnknownPoint

Point = int

# Base sets beyond this are refused: canonicalization stays desk-scale cheap
# and every paper construction used here needs far fewer base points.
BASE_CAP = 16


@dataclass(frozen=True)
class RelationSymbol:
    name: str
    arity: int

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError(f"relation {self.name!r} has arity {self.arity} < 1")


@dataclass(frozen=True)
class Signature:
    """A relational language plus at most one metric, order, and tournament component."""

    relations: tuple[RelationSymbol, ...] = ()
    has_metric: bool = False
    has_order: bool = False
    has_tournament: bool = False

    def __post_init__(self):
        names = [r.name for r in self.relations]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate relation names in {names}")

    def rel_names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.relations)

    def arity(self, name: str) -> int:
        for r in self.relations:
            if r.name == name:
                return r.arity
        raise KeyError(name)

    def is_sublanguage(self, other: Signature) -> bool:
        mine = {(r.name, r.arity) for r in self.relations}
        theirs = {(r.name, r.arity) for r in other.relations}
        return (
            mine <= theirs
            and (not self.has_metric or other.has_metric)
            and (not self.has_order or other.has_order)
            and (not self.has_tournament or other.has_tournament)
        )

    def disjoint_from(self, other: Signature) -> bool:
        if set(self.rel_names()) & set(other.rel_names()):
            return False
        for flag in ("has_metric", "has_order", "has_tournament"):
            if getattr(self, flag) and getattr(other, flag):
                return False
        return True

    def union(self, other: Signature) -> Signature:
        return Signature(
            relations=self.relations + other.relations,
            has_metric=self.has_metric or other.has_metric,
            has_order=self.has_order or other.has_order,
            has_tournament=self.has_tournament or other.has_tournament,
        )


GRAPH_SIG = Signature((RelationSymbol("E", 2),))
POSET_SIG = Signature((RelationSymbol("po", 2),))
EMPTY_SIG = Signature()
METRIC_SIG = Signature(has_metric=True)
ORDER_SIG = Signature(has_order=True)
TOURNAMENT_SIG = Signature(has_tournament=True)


def _mkey(a: Point, b: Point) -> tuple[Point, Point]:
    return (a, b) if a < b else (b, a)


@dataclass
class FiniteStructure:
    """A finite structure; treated as immutable by all pure operations.

    `relations` maps symbol name to a set of id-tuples.  `metric` keys are
    (a, b) with a < b.  `order_coords` must be injective.  `arrows` holds
    directed pairs with exactly one direction per unordered pair.
    """

    signature: Signature
    points: set[Point] = field(default_factory=set)
    relations: dict[str, set[tuple[Point, ...]]] = field(default_factory=dict)
    metric: dict[tuple[Point, Point], Fraction] = field(default_factory=dict)
    order_coords: dict[Point, Fraction] = field(default_factory=dict)
    arrows: set[tuple[Point, Point]] = field(default_factory=set)

    def __post_init__(self):
        for name in self.signature.rel_names():
            self.relations.setdefault(name, set())

    # -- accessors ---------------------------------------------------------

    def dist(self, a: Point, b: Point) -> Fraction:
        if a not in self.points or b not in self.points:
            raise UnknownPoint(f"{a if a not in self.points else b}")
        if a == b:
            return Fraction(0)
        return self.metric[_mkey(a, b)]

    def coord(self, p: Point) -> Fraction:
        if p not in self.points:
            raise UnknownPoint(str(p))
        return self.order_coords[p]

    def has_arrow(self, a: Point, b: Point) -> bool:
        return (a, b) in self.arrows

    def po_less(self, a: Point, b: Point) -> bool:
        """Strict partial order fact a < b, read from the 'po' relation."""
        return (a, b) in self.relations.get("po", set())

    def check_points(self, ids: Iterable[Point]) -> None:
        for p in ids:
            if p not in self.points:
                raise UnknownPoint(str(p))

    def copy(self) -> FiniteStructure:
        return FiniteStructure(
            signature=self.signature,
            points=set(self.points),
            relations={k: set(v) for k, v in self.relations.items()},
            metric=dict(self.metric),
            order_coords=dict(self.order_coords),
            arrows=set(self.arrows),
        )

    # -- validation --------------------------------------------------------

    def validate(self) -> None:
        sig = self.signature
        for name, tuples in self.relations.items():
            ar = sig.arity(name)
            for t in tuples:
                if len(t) != ar:
                    raise ValueError(f"{name} tuple {t} has wrong arity")
                self.check_points(t)
        if sig.has_metric:
            pts = sorted(self.points)
            for i, a in enumerate(pts):
                for b in pts[i + 1 :]:
                    d = self.metric.get(_mkey(a, b))
                    if d is None:
                        raise ValueError(f"missing distance {a},{b}")
                    if not (0 < d <= 1):
                        raise ValueError(f"distance d({a},{b})={d} outside (0,1]")
            for i, a in enumerate(pts):
                for j, b in enumerate(pts[i + 1 :], i + 1):
                    for c in pts[j + 1 :]:
                        dab, dac, dbc = self.dist(a, b), self.dist(a, c), self.dist(b, c)
                        if dab > dac + dbc or dac > dab + dbc or dbc > dab + dac:
                            raise ValueError(f"triangle inequality fails on {a},{b},{c}")
        elif self.metric:
            raise ValueError("metric table present without metric component")
        if sig.has_order:
            coords = [self.order_coords.get(p) for p in self.points]
            if any(c is None for c in coords):
                raise ValueError("missing order coordinate")
            if len(set(coords)) != len(coords):
                raise ValueError("order coordinates not injective")
        elif self.order_coords:
            raise ValueError("order coordinates present without order component")
        if sig.has_tournament:
            for a, b in self.arrows:
                if a == b:
                    raise ValueError(f"loop arrow at {a}")
                self.check_points((a, b))
                if (b, a) in self.arrows:
                    raise ValueError(f"double arrow {a},{b}")
            pts = sorted(self.points)
            for i, a in enumerate(pts):
                for b in pts[i + 1 :]:
                    if (a, b) not in self.arrows and (b, a) not in self.arrows:
                        raise ValueError(f"missing arrow between {a},{b}")
        elif self.arrows:
            raise ValueError("arrows present without tournament component")

    # -- canonical JSON ----------------------------------------------------

    def to_json_dict(self) -> dict:
        sig = self.signature
        out: dict = {
            "signature": {
                "relations": [{"name": r.name, "arity": r.arity} for r in sig.relations],
                "metric": sig.has_metric,
                "order": sig.has_order,
                "tournament": sig.has_tournament,
            },
            "points": [
                {"id": p, **({"ord": str(self.order_coords[p])} if sig.has_order else {})}
                for p in sorted(self.points)
            ],
            "relations": {
                name: sorted([list(t) for t in tuples])
                for name, tuples in sorted(self.relations.items())
            },
        }
        if sig.has_metric:
            out["metric"] = [[a, b, str(d)] for (a, b), d in sorted(self.metric.items())]
        if sig.has_tournament:
            out["arrows"] = sorted([list(t) for t in self.arrows])
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json_dict(data: Mapping) -> FiniteStructure:
        sig_d = data["signature"]
        sig = Signature(
            relations=tuple(RelationSymbol(r["name"], r["arity"]) for r in sig_d["relations"]),
            has_metric=bool(sig_d.get("metric")),
            has_order=bool(sig_d.get("order")),
            has_tournament=bool(sig_d.get("tournament")),
        )
        s = FiniteStructure(signature=sig)
        for pd in data["points"]:
            s.points.add(pd["id"])
            if "ord" in pd:
                s.order_coords[pd["id"]] = Fraction(pd["ord"])
        for name, tuples in data.get("relations", {}).items():
            s.relations[name] = {tuple(t) for t in tuples}
        for a, b, d in data.get("metric", []):
            s.metric[_mkey(a, b)] = Fraction(d)
        for a, b in data.get("arrows", []):
            s.arrows.add((a, b))
        return s


# -- graph helpers ----------------------------------------------------------


def add_edge(s: FiniteStructure, a: Point, b: Point, name: str = "E") -> None:
    """Symmetric irreflexive edge, stored in both directions."""
    if a == b:
        raise ValueError("no loops")
    s.relations.setdefault(name, set()).update({(a, b), (b, a)})


def has_edge(s: FiniteStructure, a: Point, b: Point, name: str = "E") -> bool:
    return (a, b) in s.relations.get(name, set())


# -- tuple types ------------------------------------------------------------


@dataclass(frozen=True)
class TupleType:
    """Canonical quantifier-free type of a tuple over a marked base.

    Two TupleTypes compare equal iff their `form` payloads are identical;
    the form is invariant under any ambient relabeling fixing the base
    pointwise (the only ids it mentions are canonical labels).
    """

    n: int
    m: int
    form: tuple

    def restrict(self, sublanguage: Signature, full: Signature) -> TupleType:
        if not sublanguage.is_sublanguage(full):
            raise NotSublanguage("restriction language not contained in type language")
        keep = set(sublanguage.rel_names())
        (_, n, m, pos, rels, metric, order, arrows) = self.form
        form = (
            "T",
            n,
            m,
            pos,
            tuple(e for e in rels if e[0] in keep),
            metric if sublanguage.has_metric else (),
            order if sublanguage.has_order else (),
            arrows if sublanguage.has_tournament else (),
        )
        return TupleType(self.n, self.m, form)


def _canonical_form(
    s: FiniteStructure, tup: Sequence[Point], base_order: Sequence[Point]
) -> tuple:
    label: dict[Point, int] = {}
    for p in base_order:
        label[p] = len(label)
    m = len(label)
    for p in tup:
        if p not in label:
            label[p] = len(label)
    pos = tuple(label[p] for p in tup)
    pts = sorted(label, key=label.get)

    rels = []
    for name in sorted(s.signature.rel_names()):
        inside = sorted(
            tuple(label[q] for q in t)
            for t in s.relations.get(name, ())
            if all(q in label for q in t)
        )
        rels.append((name, tuple(inside)))

    metric = ()
    if s.signature.has_metric:
        entries = []
        for i, a in enumerate(pts):
            for b in pts[i + 1 :]:
                if a != b:
                    entries.append((_mkey(label[a], label[b]), s.dist(a, b)))
        metric = tuple(sorted(entries))

    order = ()
    if s.signature.has_order:
        pairs = []
        for a in pts:
            for b in pts:
                if a != b and s.order_coords[a] < s.order_coords[b]:
                    pairs.append((label[a], label[b]))
        order = tuple(sorted(pairs))

    arrows = ()
    if s.signature.has_tournament:
        arrows = tuple(
            sorted((label[a], label[b]) for a, b in s.arrows if a in label and b in label)
        )

    return ("T", len(tup), m, pos, tuple(rels), metric, order, arrows)


def compute_type(
    s: FiniteStructure, tup: Sequence[Point], base: Iterable[Point]
) -> TupleType:
    """Canonical type of `tup` over `base` (designated base order: sorted ids)."""
    base_sorted = sorted(set(base))
    s.check_points(tup)
    s.check_points(base_sorted)
    if len(base_sorted) > BASE_CAP:
        raise ValueError(f"base of {len(base_sorted)} points exceeds cap {BASE_CAP}")
    form = _canonical_form(s, tup, base_sorted)
    return TupleType(len(tup), len(base_sorted), form)


def same_type_over(
    s1: FiniteStructure,
    tup1: Sequence[Point],
    s2: FiniteStructure,
    tup2: Sequence[Point],
    base_embedding: Mapping[Point, Point],
) -> bool:
    """True iff the canonical forms coincide after transport along `base_embedding`."""
    base1 = sorted(base_embedding)
    base2 = [base_embedding[p] for p in base1]
    s1.check_points(tup1)
    s1.check_points(base1)
    s2.check_points(tup2)
    s2.check_points(base2)
    if len(set(base2)) != len(base2):
        raise InvalidEmbedding("base embedding not injective")
    if _canonical_form(s1, (), base1) != _canonical_form(s2, (), base2):
        raise InvalidEmbedding("base embedding does not preserve structure")
    if len(tup1) != len(tup2):
        return False
    return _canonical_form(s1, tup1, base1) == _canonical_form(s2, tup2, base2)


def reduct(s: FiniteStructure, sublanguage: Signature) -> FiniteStructure:
    """Same points; only the retained components."""
    if not sublanguage.is_sublanguage(s.signature):
        raise NotSublanguage("not a sublanguage of the structure's signature")
    keep = set(sublanguage.rel_names())
    return FiniteStructure(
        signature=sublanguage,
        points=set(s.points),
        relations={k: set(v) for k, v in s.relations.items() if k in keep},
        metric=dict(s.metric) if sublanguage.has_metric else {},
        order_coords=dict(s.order_coords) if sublanguage.has_order else {},
        arrows=set(s.arrows) if sublanguage.has_tournament else set(),
    )


# -- isomorphism utilities (exhaustive, desk-scale) --------------------------


def is_isomorphism(
    s1: FiniteStructure, s2: FiniteStructure, f: Mapping[Point, Point]
) -> bool:
    if set(f) != s1.points or set(f.values()) != s2.points or len(f) != len(set(f.values())):
        return False
    for name in s1.signature.rel_names():
        image = {tuple(f[q] for q in t) for t in s1.relations.get(name, set())}
        if image != s2.relations.get(name, set()):
            return False
    if s1.signature.has_metric:
        for (a, b), d in s1.metric.items():
            if s2.dist(f[a], f[b]) != d:
                return False
    if s1.signature.has_order:
        pts = sorted(s1.points)
        for i, a in enumerate(pts):
            for b in pts[i + 1 :]:
                if (s1.order_coords[a] < s1.order_coords[b]) != (
                    s2.order_coords[f[a]] < s2.order_coords[f[b]]
                ):
                    return False
    if s1.signature.has_tournament:
        if {(f[a], f[b]) for a, b in s1.arrows} != s2.arrows:
            return False
    return True


def automorphisms(s: FiniteStructure) -> Iterator[dict[Point, Point]]:
    """All automorphisms by brute force; fine for <= 7 points."""
    pts = sorted(s.points)
    for perm in permutations(pts):
        f = dict(zip(pts, perm))
        if is_isomorphism(s, s, f):
            yield f


def embeds(pattern: FiniteStructure, s: FiniteStructure) -> bool:
    """Injective map preserving all positive relation facts of the pattern.

    Weak embedding: relation tuples of the pattern must land on relation
    tuples of `s`; absences are not required to be preserved.  Metric and
    order components must match exactly / order-isomorphically.
    """
    ppts = sorted(pattern.points)
    spts = sorted(s.points)
    if len(ppts) > len(spts):
        return False

    def extend(assign: dict[Point, Point]) -> bool:
        if len(assign) == len(ppts):
            return True
        p = ppts[len(assign)]
        used = set(assign.values())
        for q in spts:
            if q in used:
                continue
            assign[p] = q
            if _embedding_consistent(pattern, s, assign, p):
                if extend(assign):
                    return True
            del assign[p]
        return False

    return extend({})


def _embedding_consistent(
    pattern: FiniteStructure, s: FiniteStructure, assign: dict[Point, Point], new: Point
) -> bool:
    dom = set(assign)
    for name, tuples in pattern.relations.items():
        srel = s.relations.get(name, set())
        for t in tuples:
            if new in t and all(q in dom for q in t):
                if tuple(assign[q] for q in t) not in srel:
                    return False
    if pattern.signature.has_metric:
        for q in dom:
            if q != new and pattern.dist(q, new) != s.dist(assign[q], assign[new]):
                return False
    if pattern.signature.has_order:
        for q in dom:
            if q != new and (pattern.order_coords[q] < pattern.order_coords[new]) != (
                s.order_coords[assign[q]] < s.order_coords[assign[new]]
            ):
                return False
    if pattern.signature.has_tournament:
        for q in dom:
            if q == new:
                continue
            if pattern.has_arrow(q, new) and not s.has_arrow(assign[q], assign[new]):
                return False
            if pattern.has_arrow(new, q) and not s.has_arrow(assign[new], assign[q]):
                return False
    return True
