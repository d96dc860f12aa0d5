"""Free fusions and the growing generic world.

A `FusedClass` pairs an L1 amalgamation class with an L2 expansion class
over disjoint signatures; membership is membership of both reducts.  A
`World` owns a growing structure in a fused class together with a seeded
choice stream and an append-only growth log; replaying the log from the
empty structure reproduces the world bit-exactly.

Realization operations implement the joint-realization property (*): any
explicitly presented non-algebraic 1-type over a finite set, together with
any L2 constraint, is realized by a fresh point, optionally independent
from a designated set over its base.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .classes import (
    BUILTIN_CLASSES,
    AmalgamationClass,
    NewPointFacts,
    OnePointConstraint,
    apply_facts,
    contains,
    independent_completion,
    point_facts,
    solve_completion,
)
from .core import FiniteStructure, Point, Signature, TupleType, compute_type, reduct
from .errors import (
    AlgebraicType,
    NoCompletion,
    SignatureOverlap,
    Unsupported,
)


@dataclass(frozen=True)
class FusedClass:
    class1: AmalgamationClass
    class2: AmalgamationClass

    def __post_init__(self):
        if not self.class1.signature.disjoint_from(self.class2.signature):
            raise SignatureOverlap("fusion components must have disjoint signatures")

    @property
    def signature(self) -> Signature:
        return self.class1.signature.union(self.class2.signature)

    def member(self, s: FiniteStructure) -> bool:
        if s.signature != self.signature:
            return False
        return contains(self.class1, reduct(s, self.class1.signature)) and contains(
            self.class2, reduct(s, self.class2.signature)
        )

    def describe(self) -> dict:
        return {"l1": self.class1.kind, "l2": self.class2.kind}


def free_fuse(c1: AmalgamationClass, c2: AmalgamationClass) -> FusedClass:
    """Membership = conjunction of reduct memberships; amalgams componentwise."""
    return FusedClass(c1, c2)


FUSION_NAMES = {
    "graph+order": ("graph", "order"),
    "k3free+order": ("k3free", "order"),
    "graph+tournament": ("graph", "tournament"),
    "k3free+tournament": ("k3free", "tournament"),
    "metric+order": ("metric", "order"),
    "metric+tournament": ("metric", "tournament"),
    "poset+order": ("poset", "order"),
    "trivial+order": ("trivial", "order"),
    "trivial+tournament": ("trivial", "tournament"),
}


def fusion_by_name(name: str) -> FusedClass:
    if name not in FUSION_NAMES:
        raise Unsupported(f"unknown fusion {name!r}; known: {sorted(FUSION_NAMES)}")
    n1, n2 = FUSION_NAMES[name]
    return free_fuse(BUILTIN_CLASSES[n1](), BUILTIN_CLASSES[n2]())


def fusion_name(fc: FusedClass) -> str:
    for name, (n1, n2) in FUSION_NAMES.items():
        if BUILTIN_CLASSES[n1]() == fc.class1 and BUILTIN_CLASSES[n2]() == fc.class2:
            return name
    raise Unsupported("fusion is not one of the named built-ins")


# -- type presentation ---------------------------------------------------------


def constraint_from_type(
    tt: TupleType, base: Sequence[Point], s: FiniteStructure
) -> OnePointConstraint:
    """Decode a 1-type canonical form over a concrete base into a constraint.

    `base` lists the base points in their designated (sorted-at-computation)
    order.  Raises AlgebraicType when the type pins the point to a base point.
    """
    if tt.n != 1:
        raise Unsupported("only 1-types decode into one-point constraints")
    if tt.m != len(base):
        raise ValueError("base length does not match the type's base size")
    (_, _, m, pos, rels, metric, order, arrows) = tt.form
    label = pos[0]
    if label < m:
        raise AlgebraicType("type demands equality with a base point")

    def pt(lab: int) -> Optional[Point]:
        return None if lab == label else base[lab]

    pos_facts = []
    for name, tuples in rels:
        for t in tuples:
            if label in t:
                pos_facts.append((name, tuple(pt(q) for q in t)))
    dist = {}
    for (a, b), d in metric:
        if label in (a, b):
            other = b if a == label else a
            if other != label:
                dist[base[other]] = d
    gap = None
    if s.signature.has_order:
        below = [base[a] for a, b in order if b == label and a != label]
        above = [base[b] for a, b in order if a == label and b != label]
        lo = max((s.order_coords[p] for p in below), default=None)
        hi = min((s.order_coords[p] for p in above), default=None)
        gap = (lo, hi)
    out_a = frozenset(base[b] for a, b in arrows if a == label and b != label)
    in_a = frozenset(base[a] for a, b in arrows if b == label and a != label)
    return OnePointConstraint(
        pos=tuple(sorted(set(pos_facts))),
        dist=dist,
        order_gap=gap,
        out_arrows=out_a,
        in_arrows=in_a,
    )


TypeSpec = "OnePointConstraint | tuple[TupleType, Sequence[Point]]"


def _as_constraint(w: World, p) -> OnePointConstraint:
    if isinstance(p, OnePointConstraint):
        return p
    tt, base = p
    return constraint_from_type(tt, list(base), w.structure)


# -- the world ------------------------------------------------------------------


class World:
    """Single-owner growing structure in a fused class.

    All growth goes through `new_point`, which resolves a constraint to
    concrete facts (splitting it between the two component solvers), applies
    them in place, and appends them to the growth log.
    """

    def __init__(self, fused: FusedClass, seed: int = 0, mode: str = "seeded"):
        if mode not in ("seeded", "canonical"):
            raise ValueError(f"unknown mode {mode!r}")
        self.fused = fused
        self.seed = seed
        self.mode = mode
        self.rng = random.Random(seed)
        self.structure = FiniteStructure(signature=fused.signature)
        self.log: list[dict] = []
        self._next_id = 0

    # -- growth ------------------------------------------------------------

    def fresh_id(self) -> Point:
        x = self._next_id
        self._next_id += 1
        return x

    def new_point(self, constraint: OnePointConstraint) -> Point:
        facts = self._solve(constraint)
        apply_facts(self.structure, facts)
        self.log.append(facts.to_json_dict())
        return facts.new_id

    def _solve(self, constraint: OnePointConstraint) -> NewPointFacts:
        x = self.fresh_id()
        s = self.structure
        f1 = solve_completion(self.fused.class1, s, constraint, x, self.mode, self.rng)
        f2 = solve_completion(self.fused.class2, s, constraint, x, self.mode, self.rng)
        merged = NewPointFacts(
            new_id=x,
            rel_facts=f1.rel_facts,
            distances=f1.distances,
            coord=f2.coord,
            out_arrows=f2.out_arrows,
            in_arrows=f2.in_arrows,
        )
        if self.fused.class1.kind in ("order", "tournament"):  # pragma: no cover
            raise Unsupported("expansion class on the L1 side")
        return merged

    # -- realization (*) -----------------------------------------------------

    def realize_union(self, p1, p2) -> Point:
        """Realize p1 ∪ p2 for an L1 1-type p1 and an L2 1-type p2."""
        c1 = _as_constraint(self, p1)
        c2 = _as_constraint(self, p2)
        self._check_component(c1, self.fused.class1)
        self._check_component(c2, self.fused.class2)
        return self.new_point(c1.merged(c2))

    def realize_independent(
        self,
        p,
        c_set: Iterable[Point],
        extra_l2: Optional[OnePointConstraint] = None,
    ) -> Point:
        """Realize p over its base, independent from `c_set` over the base.

        The independence completion is the canonical independent amalgam of
        the L1 part; the L2 part is free and may be pinned by `extra_l2`.
        """
        constraint = _as_constraint(self, p)
        base = self._l1_base(constraint)
        constraint = independent_completion(
            self.fused.class1, self.structure, constraint, base, set(c_set)
        )
        if extra_l2 is not None:
            self._check_component(extra_l2, self.fused.class2)
            constraint = constraint.merged(extra_l2)
        return self.new_point(constraint)

    def _l1_base(self, constraint: OnePointConstraint) -> set[Point]:
        pts: set[Point] = set()
        for _, t in constraint.pos + constraint.neg:
            pts.update(q for q in t if q is not None)
        pts.update(constraint.dist)
        pts.update(constraint.dist_bounds)
        return pts

    def _check_component(self, c: OnePointConstraint, comp: AmalgamationClass) -> None:
        sig = comp.signature
        names = set(sig.rel_names())
        for name, _ in c.pos + c.neg:
            if name not in names:
                raise Unsupported(f"fact on {name!r} is not in the {comp.kind} component")
        if (c.dist or c.dist_bounds) and not sig.has_metric:
            raise Unsupported("distance facts outside the metric component")
        if c.order_gap is not None and not sig.has_order:
            raise Unsupported("order facts outside the order component")
        if (c.out_arrows or c.in_arrows) and not sig.has_tournament:
            raise Unsupported("arrow facts outside the tournament component")

    # -- snapshots and replay -------------------------------------------------

    def snapshot(self) -> FiniteStructure:
        return self.structure.copy()

    def member(self) -> bool:
        return self.fused.member(self.structure)

    def export_json(self) -> dict:
        return {
            "fusion": fusion_name(self.fused),
            "seed": self.seed,
            "mode": self.mode,
            "log": self.log,
        }

    def dumps(self) -> str:
        return json.dumps(self.export_json(), sort_keys=True, separators=(",", ":"))

    @staticmethod
    def replay(data: Mapping) -> World:
        """Rebuild a world from its growth log; bit-exact by construction."""
        w = World(fusion_by_name(data["fusion"]), seed=data["seed"], mode=data["mode"])
        for entry in data["log"]:
            facts = NewPointFacts.from_json_dict(entry)
            apply_facts(w.structure, facts)
            w.log.append(entry)
            w._next_id = max(w._next_id, facts.new_id + 1)
        return w
