"""Canonical ternary independence relations and a brute-force axiom verifier.

`indep(r, s, A, B, C)` decides "A independent from B over C" on the induced
substructure of A ∪ B ∪ C only (locality), for the four relation kinds:

  free     A∩B ⊆ C and no relation tuple mixes A∖C and B∖C
  metric   every cross distance factors through C (maximal when C = ∅)
  poset    A∩B ⊆ C and every cross comparability factors through C
  trivial  A∩B ⊆ C (the indiscernible-set relation)

`check_axiom` verifies the stationary-independence axioms on every structure
of a class up to a size bound (enumeration up to isomorphism - all checks
read only induced substructures, and relabel-invariance is itself part of
the Invariance suite) or on seeded samples.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .classes import (
    AmalgamationClass,
    OnePointConstraint,
    extend_one_point,
    independent_completion,
    point_facts,
)
from .core import FiniteStructure, Point, compute_type, is_isomorphism
from .errors import Unsupported

AXIOMS = (
    "Invariance",
    "Monotonicity",
    "Transitivity",
    "Symmetry",
    "Existence",
    "Stationarity",
    "WeakStationarity",
)


@dataclass(frozen=True)
class IndependenceRelation:
    kind: str  # free | metric | poset | trivial | fused:<l1 kind>

    @property
    def l1_kind(self) -> str:
        return self.kind.split(":", 1)[1] if self.kind.startswith("fused:") else self.kind


def canonical_relation(c) -> IndependenceRelation:
    """The canonical relation of a class or fused class."""
    from .fusion import FusedClass

    if isinstance(c, FusedClass):
        return IndependenceRelation(f"fused:{c.class1.independence_kind}")
    return IndependenceRelation(c.independence_kind)


def indep(
    r: IndependenceRelation,
    s: FiniteStructure,
    a_set: Iterable[Point],
    b_set: Iterable[Point],
    c_set: Iterable[Point],
) -> bool:
    """A independent from B over C."""
    A, B, C = set(a_set), set(b_set), set(c_set)
    s.check_points(A | B | C)
    kind = r.l1_kind

    if kind == "metric":
        # Bounded-space reading: cross distances equal the capped amalgam value
        # min(1, min_c d(a,c)+d(c,b)); with C = ∅ they are maximal.
        one = Fraction(1)
        for a in A:
            for b in B:
                d = s.dist(a, b)
                if not C:
                    if d != one:
                        return False
                else:
                    best = min(s.dist(a, c) + s.dist(c, b) for c in C)
                    if d != min(one, best):
                        return False
        return True

    if A & B - C:
        return False
    if kind == "trivial":
        return True
    if kind == "free":
        across = (A - C, B - C)
        for tuples in s.relations.values():
            for t in tuples:
                if not all(q in A | B | C for q in t):
                    continue
                if any(q in across[0] for q in t) and any(q in across[1] for q in t):
                    return False
        return True
    if kind == "poset":
        po = s.relations.get("po", set())
        for a in A - C:
            for b in B - C:
                if (a, b) in po and not any((a, c) in po and (c, b) in po for c in C):
                    return False
                if (b, a) in po and not any((b, c) in po and (c, a) in po for c in C):
                    return False
        return True
    raise Unsupported(f"independence kind {kind!r}")


def indep_corner(
    r: IndependenceRelation,
    s: FiniteStructure,
    a_set: Iterable[Point],
    c_set: Iterable[Point],
    d_set: Iterable[Point],
    b_set: Iterable[Point],
) -> bool:
    """A ⫝_{C;D} B: the conjunction AC ⫝_D B and A ⫝_C BD."""
    A, B, C, D = set(a_set), set(b_set), set(c_set), set(d_set)
    return indep(r, s, A | C, B, D) and indep(r, s, A, B | D, C)


# -- axiom reports -------------------------------------------------------------


@dataclass
class AxiomReport:
    axiom: str
    instances: int = 0
    violations: list[dict] = field(default_factory=list)
    exhaustive: bool = False
    notes: str = ""

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {
            "axiom": self.axiom,
            "instances": self.instances,
            "exhaustive": self.exhaustive,
            "violations": self.violations,
            "notes": self.notes,
        }

    def record(self, s: FiniteStructure, detail: dict, cap: int = 20) -> None:
        if len(self.violations) < cap:
            self.violations.append({"structure": s.to_json_dict(), **detail})


def applicable_axioms(c) -> tuple[str, ...]:
    """Def 2.1 axioms that hold for the class's canonical relation.

    Order and tournament classes carry the trivial relation of their
    indiscernible-set reduct; full Stationarity fails there (a new base point
    can separate a gap), so Weak Stationarity stands in for it.
    """
    r = canonical_relation(c)
    if r.l1_kind == "trivial" and not r.kind.startswith("fused:"):
        return (
            "Invariance",
            "Monotonicity",
            "Transitivity",
            "Symmetry",
            "Existence",
            "WeakStationarity",
        )
    if r.kind.startswith("fused:"):
        return (
            "Invariance",
            "Monotonicity",
            "Transitivity",
            "Symmetry",
            "Existence",
            "WeakStationarity",
        )
    return ("Invariance", "Monotonicity", "Transitivity", "Symmetry", "Existence", "Stationarity")


# -- structure enumeration and sampling ----------------------------------------


def _graph_like_reps(c: AmalgamationClass, n: int) -> list[FiniteStructure]:
    """All members on n points up to isomorphism, single binary symmetric relation."""
    from .classes import contains

    name = c.signature.rel_names()[0]
    pairs = list(itertools.combinations(range(n), 2))
    perms = list(itertools.permutations(range(n)))
    pair_index = {p: i for i, p in enumerate(pairs)}
    seen = set()
    out = []
    for mask in range(1 << len(pairs)):
        canon = mask
        for perm in perms:
            m2 = 0
            for i, (a, b) in enumerate(pairs):
                if mask >> i & 1:
                    m2 |= 1 << pair_index[tuple(sorted((perm[a], perm[b])))]
            canon = min(canon, m2)
        if canon in seen:
            continue
        seen.add(canon)
        s = FiniteStructure(signature=c.signature, points=set(range(n)))
        for i, (a, b) in enumerate(pairs):
            if canon >> i & 1:
                s.relations[name].update({(a, b), (b, a)})
        if contains(c, s):
            out.append(s)
    return out


def _tournament_reps(n: int) -> list[FiniteStructure]:
    from .classes import tournament_class

    c = tournament_class()
    pairs = list(itertools.combinations(range(n), 2))
    pair_index = {p: i for i, p in enumerate(pairs)}
    perms = list(itertools.permutations(range(n)))
    seen = set()
    out = []
    for mask in range(1 << len(pairs)):
        canon = mask
        for perm in perms:
            m2 = 0
            for i, (a, b) in enumerate(pairs):
                pa, pb = perm[a], perm[b]
                bit = mask >> i & 1
                if pa > pb:
                    pa, pb = pb, pa
                    bit ^= 1
                m2 |= bit << pair_index[(pa, pb)]
            canon = min(canon, m2)
        if canon in seen:
            continue
        seen.add(canon)
        s = FiniteStructure(signature=c.signature, points=set(range(n)))
        for i, (a, b) in enumerate(pairs):
            s.arrows.add((b, a) if canon >> i & 1 else (a, b))
        out.append(s)
    return out


def _poset_reps(n: int) -> list[FiniteStructure]:
    """Strict partial orders up to isomorphism, by one-point extensions."""
    from .classes import poset_class

    c = poset_class()
    if n == 0:
        return [FiniteStructure(signature=c.signature)]
    smaller = _poset_reps(n - 1)
    seen = set()
    out = []
    for s in smaller:
        po = s.relations["po"]
        pts = sorted(s.points)
        downsets = _closed_subsets(pts, po, down=True)
        upsets = _closed_subsets(pts, po, down=False)
        x = n - 1
        for dn in downsets:
            for up in upsets:
                if dn & up:
                    continue
                if not all((d, u) in po for d in dn for u in up):
                    continue
                t = s.copy()
                t.points.add(x)
                t.relations["po"].update({(d, x) for d in dn} | {(x, u) for u in up})
                key = _poset_canon(t)
                if key not in seen:
                    seen.add(key)
                    out.append(t)
    return out


def _closed_subsets(pts: list[Point], po: set, down: bool) -> list[set[Point]]:
    """Down-sets contain all predecessors; up-sets all successors."""
    out = []
    for bits in range(1 << len(pts)):
        sub = {pts[i] for i in range(len(pts)) if bits >> i & 1}
        if down:
            ok = all(q in sub for p in sub for q in pts if (q, p) in po)
        else:
            ok = all(q in sub for p in sub for q in pts if (p, q) in po)
        if ok:
            out.append(sub)
    return out


def _poset_canon(s: FiniteStructure) -> tuple:
    pts = sorted(s.points)
    po = s.relations["po"]
    best = None
    for perm in itertools.permutations(range(len(pts))):
        rel = tuple(sorted((perm[pts.index(a)], perm[pts.index(b)]) for a, b in po))
        if best is None or rel < best:
            best = rel
    return (len(pts), best)


def _order_rep(n: int) -> FiniteStructure:
    from .classes import order_class

    s = FiniteStructure(signature=order_class().signature, points=set(range(n)))
    for i in range(n):
        s.order_coords[i] = Fraction(i)
    return s


def _metric_reps(n: int, denominators: Sequence[int] = (1, 2)) -> list[FiniteStructure]:
    from .classes import metric_class

    values = sorted(
        {Fraction(p, q) for q in denominators for p in range(1, q + 1)} | {Fraction(1)}
    )
    pairs = list(itertools.combinations(range(n), 2))
    out = []
    seen = set()
    for combo in itertools.product(values, repeat=len(pairs)):
        s = FiniteStructure(signature=metric_class().signature, points=set(range(n)))
        for (a, b), d in zip(pairs, combo):
            s.metric[(a, b)] = d
        try:
            s.validate()
        except ValueError:
            continue
        key = _metric_canon(s)
        if key not in seen:
            seen.add(key)
            out.append(s)
    return out


def _metric_canon(s: FiniteStructure) -> tuple:
    pts = sorted(s.points)
    best = None
    for perm in itertools.permutations(pts):
        f = dict(zip(pts, perm))
        rel = tuple(
            s.dist(f[a], f[b]) for i, a in enumerate(pts) for b in pts[i + 1 :]
        )
        if best is None or rel < best:
            best = rel
    return best


def enumerate_structures(c, max_size: int) -> list[FiniteStructure]:
    """Members of the class up to isomorphism, sizes 0..max_size."""
    from .fusion import FusedClass

    out: list[FiniteStructure] = []
    for n in range(max_size + 1):
        if isinstance(c, FusedClass):
            out.extend(_fused_reps(c, n))
            continue
        if c.kind == "forbidden":
            if len(c.signature.relations) == 0:
                s = FiniteStructure(signature=c.signature, points=set(range(n)))
                out.append(s)
            elif c.signature.rel_names() == ("E",):
                out.extend(_graph_like_reps(c, n))
            else:
                raise Unsupported("exhaustive enumeration beyond graphs is not built in")
        elif c.kind == "tournament":
            out.extend(_tournament_reps(n))
        elif c.kind == "poset":
            out.extend([s for s in _poset_reps(n) if len(s.points) == n])
        elif c.kind == "order":
            out.append(_order_rep(n))
        elif c.kind == "metric":
            out.extend(_metric_reps(n))
    return out


def _fused_reps(c, n: int) -> list[FiniteStructure]:
    """Fused-class members up to isomorphism.

    The L2 expansion is rigid (orders: fix coordinates 0..n-1; tournaments
    are enumerated), so L1 members are enumerated as labeled structures.
    """
    from .fusion import FusedClass

    assert isinstance(c, FusedClass)
    if c.class2.kind != "order":
        raise Unsupported("exhaustive fused enumeration is built in for order expansions")
    if c.class1.signature.rel_names() not in ((), ("E",)):
        raise Unsupported("exhaustive fused enumeration needs a graph-like L1 part")
    from .classes import contains

    sig = c.signature
    out = []
    pairs = list(itertools.combinations(range(n), 2))
    name = "E" if c.class1.signature.rel_names() else None
    for mask in range(1 << (len(pairs) if name else 0)):
        s = FiniteStructure(signature=sig, points=set(range(n)))
        for i in range(n):
            s.order_coords[i] = Fraction(i)
        if name:
            for i, (a, b) in enumerate(pairs):
                if mask >> i & 1:
                    s.relations[name].update({(a, b), (b, a)})
            if not contains(c.class1, _project(s, c.class1.signature)):
                continue
        out.append(s)
    return out


def _project(s: FiniteStructure, sig) -> FiniteStructure:
    from .core import reduct

    return reduct(s, sig)


def sample_structure(c, n: int, rng: random.Random) -> FiniteStructure:
    """A seeded random member of the class on n points."""
    from .fusion import FusedClass

    if isinstance(c, FusedClass):
        s1 = sample_structure(c.class1, n, rng)
        s = FiniteStructure(signature=c.signature, points=set(range(n)))
        for name, tuples in s1.relations.items():
            s.relations[name] = set(tuples)
        s.metric = dict(s1.metric)
        if c.class2.kind == "order":
            coords = list(range(n))
            rng.shuffle(coords)
            s.order_coords = {i: Fraction(coords[i]) for i in range(n)}
        elif c.class2.kind == "tournament":
            for a, b in itertools.combinations(range(n), 2):
                s.arrows.add((a, b) if rng.random() < 0.5 else (b, a))
        else:
            raise Unsupported("sampling fused classes needs an order/tournament L2 part")
        return s

    from .classes import contains

    if c.kind == "forbidden":
        name = c.signature.rel_names()[0] if c.signature.relations else None
        for attempt in range(200):
            s = FiniteStructure(signature=c.signature, points=set(range(n)))
            if name:
                p = 0.5 * (0.8**attempt) + 0.05
                for a, b in itertools.combinations(range(n), 2):
                    if rng.random() < p:
                        s.relations[name].update({(a, b), (b, a)})
            if contains(c, s):
                return s
        raise Unsupported(f"could not sample a member of size {n}")  # pragma: no cover
    if c.kind == "tournament":
        s = FiniteStructure(signature=c.signature, points=set(range(n)))
        for a, b in itertools.combinations(range(n), 2):
            s.arrows.add((a, b) if rng.random() < 0.5 else (b, a))
        return s
    if c.kind == "order":
        s = FiniteStructure(signature=c.signature, points=set(range(n)))
        coords = list(range(n))
        rng.shuffle(coords)
        s.order_coords = {i: Fraction(coords[i]) for i in range(n)}
        return s
    if c.kind == "poset":
        s = FiniteStructure(signature=c.signature, points=set(range(n)))
        order = list(range(n))
        rng.shuffle(order)
        po = s.relations["po"]
        for i, j in itertools.combinations(range(n), 2):
            if rng.random() < 0.4:
                po.add((order[i], order[j]))
        changed = True
        while changed:
            changed = False
            for (a, b), (b2, d) in itertools.product(list(po), list(po)):
                if b == b2 and (a, d) not in po:
                    po.add((a, d))
                    changed = True
        return s
    if c.kind == "metric":
        s = FiniteStructure(signature=c.signature, points=set(range(n)))
        denoms = [1, 2, 3, 4, 5, 6, 7, 8]
        pts = []
        for x in range(n):
            # sequential assignment with exact tightening
            vals = {}
            for p in pts:
                lo = Fraction(0)
                hi = Fraction(1)
                for q, v in vals.items():
                    d = s.dist(p, q)
                    hi = min(hi, v + d)
                    lo = max(lo, v - d, d - v)
                den = rng.choice(denoms)
                grid = [Fraction(k, den) for k in range(1, den + 1) if lo <= Fraction(k, den) <= hi]
                vals[p] = rng.choice(grid) if grid else hi
            for p, v in vals.items():
                s.metric[(min(p, x), max(p, x))] = v
            pts.append(x)
        return s
    raise Unsupported(c.kind)  # pragma: no cover


# -- the axiom checker ----------------------------------------------------------


def check_axiom(
    c,
    r: Optional[IndependenceRelation],
    axiom: str,
    size_bound: int = 5,
    trials: int = 0,
    seed: int = 0,
) -> AxiomReport:
    """Exhaustive (trials=0) or sampled verification of one axiom."""
    if axiom not in AXIOMS:
        raise Unsupported(f"unknown axiom {axiom!r}")
    r = r if r is not None else canonical_relation(c)
    report = AxiomReport(axiom=axiom, exhaustive=(trials == 0))
    if trials == 0:
        if size_bound > 7:
            raise Unsupported("exhaustive mode is capped at 7 points")
        for s in enumerate_structures(c, size_bound):
            _check_on_structure(c, r, axiom, s, report, rng=None)
    else:
        rng = random.Random(seed)
        for _ in range(trials):
            n = rng.randint(1, size_bound)
            s = sample_structure(c, n, rng)
            _check_on_structure(c, r, axiom, s, report, rng=rng)
    return report


def _masks(pts: list[Point]) -> list[frozenset[Point]]:
    out = []
    for bits in range(1 << len(pts)):
        out.append(frozenset(pts[i] for i in range(len(pts)) if bits >> i & 1))
    return out


def build_mask_table(r: IndependenceRelation, s: FiniteStructure) -> np.ndarray:
    """Boolean tensor T[A,B,C] = indep(A,B,C) over all subset bitmasks.

    Bit i of a mask stands for the i-th point in sorted order.  The builder
    reduces each kind to a per-point "bad partner" mask and an OR-over-subset
    dynamic program, so one entry costs O(1) array work.
    """
    pts = sorted(s.points)
    n = len(pts)
    idx = {p: i for i, p in enumerate(pts)}
    M = 1 << n
    m = np.arange(M, dtype=np.intp)
    A3, B3, C3 = m[:, None, None], m[None, :, None], m[None, None, :]
    kind = r.l1_kind

    def or_dp(per_point: list[int]) -> np.ndarray:
        out = np.zeros(M, dtype=np.int64)
        for x in range(1, M):
            low = x & -x
            out[x] = out[x ^ low] | per_point[low.bit_length() - 1]
        return out

    if kind == "trivial":
        return (A3 & B3 & ~C3) == 0

    if kind == "free":
        nbr = [0] * n
        for tuples in s.relations.values():
            for t in tuples:
                inside = [idx[q] for q in t]
                for u in inside:
                    for v in inside:
                        if u != v:
                            nbr[u] |= 1 << v
        NU = or_dp(nbr)
        AnC, BnC = A3 & ~C3, B3 & ~C3
        return ((A3 & B3 & ~C3) == 0) & ((NU[AnC] & BnC) == 0)

    if kind == "poset":
        po = s.relations.get("po", set())
        pairs = [
            (idx[a], idx[b], _between_mask(po, idx, a, b)) for a, b in po
        ]
        bad_or = np.zeros((M, M), dtype=np.int64)
        for Cm in range(M):
            bad = [0] * n
            for u, v, between in pairs:
                if between & Cm == 0:
                    bad[u] |= 1 << v
                    bad[v] |= 1 << u
            bad_or[Cm] = or_dp(bad)
        AnC, BnC = A3 & ~C3, B3 & ~C3
        return ((A3 & B3 & ~C3) == 0) & ((bad_or[C3, AnC] & BnC) == 0)

    if kind == "metric":
        one = Fraction(1)
        factor = [[0] * n for _ in range(n)]
        for u in range(n):
            for v in range(n):
                d = s.dist(pts[u], pts[v])
                for w in range(n):
                    thru = s.dist(pts[u], pts[w]) + s.dist(pts[w], pts[v])
                    if d == min(one, thru):
                        factor[u][v] |= 1 << w
        bad_or = np.zeros((M, M), dtype=np.int64)
        for Cm in range(M):
            bad = [0] * n
            for u in range(n):
                for v in range(n):
                    if Cm == 0:
                        ok = u != v and s.dist(pts[u], pts[v]) == one
                    else:
                        ok = factor[u][v] & Cm != 0
                    if not ok:
                        bad[u] |= 1 << v
            bad_or[Cm] = or_dp(bad)
        return (bad_or[C3, A3] & B3) == 0

    raise Unsupported(kind)  # pragma: no cover


def _between_mask(po: set, idx: dict, a: Point, b: Point) -> int:
    out = 0
    for c in idx:
        if (a, c) in po and (c, b) in po:
            out |= 1 << idx[c]
    return out


def _check_on_structure(c, r, axiom, s, report, rng) -> None:
    pts = sorted(s.points)
    sampled = rng is not None
    if axiom == "Invariance":
        _check_invariance(r, s, report, rng)
        return
    if axiom == "Existence":
        _check_existence(c, r, s, report, rng)
        return
    if axiom in ("Stationarity", "WeakStationarity"):
        _check_stationarity(c, r, s, report, rng, weak=(axiom == "WeakStationarity"))
        return

    if sampled:
        masks = _masks(pts)

        def T(A, B, C) -> bool:
            return indep(r, s, A, B, C)

        for _ in range(40):
            A, B, C, D = (rng.choice(masks) for _ in range(4))
            report.instances += 1
            if axiom == "Symmetry":
                bad = T(A, B, C) != T(B, A, C)
            elif axiom == "Monotonicity":
                bad = T(A, C | D, B) and not (T(A, C, B) and T(A, D, B | C))
            else:  # Transitivity
                bad = T(A, C, B) and T(A, D, B | C) and not (T(A, C | D, B))
            if bad:
                report.record(
                    s, {"A": sorted(A), "B": sorted(B), "C": sorted(C), "D": sorted(D)}
                )
        return

    # exhaustive sweep over all subset masks, vectorized
    T = build_mask_table(r, s)
    n = len(pts)
    M = 1 << n

    def rec(detail_masks: dict) -> None:
        report.record(
            s,
            {k: [pts[i] for i in range(n) if v >> i & 1] for k, v in detail_masks.items()},
        )

    if axiom == "Symmetry":
        report.instances += M**3
        diff = T != T.swapaxes(0, 1)
        if diff.any():
            for A, B, C in np.argwhere(diff)[:20]:
                rec({"A": int(A), "B": int(B), "C": int(C)})
        return

    m = np.arange(M, dtype=np.intp)
    union = m[:, None] | m[None, :]
    # tensors below carry axes (A, B, C, D); T[x, y, z] = x indep from y over z
    t_acb = T.transpose(0, 2, 1)  # t_acb[a, b, c] = T[a, c, b]
    over_b_cd = T[
        m[:, None, None, None], union[None, None, :, :], m[None, :, None, None]
    ]  # A indep_B C∪D
    over_bc_d = T[
        m[:, None, None, None], m[None, None, None, :], union[None, :, :, None]
    ]  # A indep_{B∪C} D
    report.instances += M**4
    if axiom == "Monotonicity":
        viol = over_b_cd & ~(t_acb[:, :, :, None] & over_bc_d)
    else:  # Transitivity
        viol = t_acb[:, :, :, None] & over_bc_d & ~over_b_cd
    if viol.any():
        for A, B, C, D in np.argwhere(viol)[:20]:
            rec({"A": int(A), "B": int(B), "C": int(C), "D": int(D)})


def _check_invariance(r, s, report, rng) -> None:
    """Relabel-invariance: evaluation agrees along every isomorphic relabeling.

    Combined with locality (evaluation reads only the induced substructure on
    A∪B∪C) this is exactly Def 2.1(i): equal marked types mean there is an
    isomorphic relabeling carrying one configuration to the other.
    Exhaustive mode sweeps every permutation and every subset triple.
    """
    pts = sorted(s.points)
    n = len(pts)
    if rng is not None:
        local_rng = rng
        masks = _masks(pts)
        for _ in range(10):
            perm = list(pts)
            local_rng.shuffle(perm)
            f = dict(zip(pts, perm))
            t = _relabel(s, f)
            for _ in range(20):
                A, B, C = (local_rng.choice(masks) for _ in range(3))
                report.instances += 1
                fa, fb, fc = (frozenset(f[p] for p in X) for X in (A, B, C))
                if indep(r, s, A, B, C) != indep(r, t, fa, fb, fc):
                    report.record(
                        s,
                        {"A": sorted(A), "B": sorted(B), "C": sorted(C), "perm": perm},
                    )
        return

    T = build_mask_table(r, s)
    M = 1 << n
    for perm in itertools.permutations(range(n)):
        f = {pts[i]: pts[perm[i]] for i in range(n)}
        t = _relabel(s, f)
        Tp = build_mask_table(r, t)
        pm = np.zeros(M, dtype=np.intp)
        for mask in range(M):
            img = 0
            for i in range(n):
                if mask >> i & 1:
                    img |= 1 << perm[i]
            pm[mask] = img
        report.instances += M**3
        same = Tp[np.ix_(pm, pm, pm)] == T
        if not same.all():
            for A, B, C in np.argwhere(~same)[:20]:
                report.record(
                    s,
                    {
                        "A": [pts[i] for i in range(n) if A >> i & 1],
                        "B": [pts[i] for i in range(n) if B >> i & 1],
                        "C": [pts[i] for i in range(n) if C >> i & 1],
                        "perm": [f[p] for p in pts],
                    },
                )


def _relabel(s: FiniteStructure, f: dict[Point, Point]) -> FiniteStructure:
    t = FiniteStructure(signature=s.signature, points={f[p] for p in s.points})
    for name, tuples in s.relations.items():
        t.relations[name] = {tuple(f[q] for q in tt) for tt in tuples}
    for (a, b), d in s.metric.items():
        t.metric[(min(f[a], f[b]), max(f[a], f[b]))] = d
    for p, co in s.order_coords.items():
        t.order_coords[f[p]] = co
    t.arrows = {(f[a], f[b]) for a, b in s.arrows}
    return t


def _check_existence(c, r, s, report, rng) -> None:
    """Realize tp(x/B) independent from C over B via extend_one_point, verify both."""
    from .fusion import FusedClass

    if isinstance(c, FusedClass):
        raise Unsupported("Existence checking runs on the component classes")
    pts = sorted(s.points)
    if rng is None:
        cases = [
            (x, B, C)
            for x in pts
            for B in _masks([p for p in pts if p != x])
            for C in _masks(pts)
        ]
    else:
        cases = []
        for _ in range(10):
            if not pts:
                break
            x = rng.choice(pts)
            others = [p for p in pts if p != x]
            B = frozenset(rng.sample(others, rng.randint(0, min(3, len(others)))))
            C = frozenset(rng.sample(pts, rng.randint(0, min(3, len(pts)))))
            cases.append((x, B, C))
    for x, B, C in cases:
        report.instances += 1
        constraint = point_facts(s, x, sorted(B))
        constraint = independent_completion(c, s, constraint, B, C)
        try:
            t, new = extend_one_point(c, s, constraint)
        except Exception as e:
            report.record(s, {"x": x, "B": sorted(B), "C": sorted(C), "error": str(e)})
            continue
        ok_type = compute_type(t, (new,), B) == compute_type(t, (x,), B)
        ok_ind = indep(r, t, {new}, C, B)
        if not (ok_type and ok_ind):
            report.record(
                s,
                {
                    "x": x,
                    "B": sorted(B),
                    "C": sorted(C),
                    "type_ok": ok_type,
                    "indep_ok": ok_ind,
                },
            )


def _check_stationarity(c, r, s, report, rng, weak: bool) -> None:
    """Same type over B + both independent from C over B => same type over BC.

    Weak form concludes only for the L1 part and is the fused-class check.
    """
    from .core import EMPTY_SIG
    from .fusion import FusedClass

    fused = isinstance(c, FusedClass)
    if fused:
        l1_sig = c.class1.signature
    elif c.kind in ("order", "tournament"):
        # plain expansion classes are fusions of the trivial structure
        fused, l1_sig = True, EMPTY_SIG
    else:
        l1_sig = c.signature
    pts = sorted(s.points)
    full_cache: dict[tuple, object] = {}

    def tp(x, Bm):
        key = (x, Bm, "full")
        if key not in full_cache:
            full_cache[key] = compute_type(s, (x,), Bm)
        return full_cache[key]

    proj = {}

    def _project_cached():
        if "s" not in proj:
            from .core import reduct

            proj["s"] = reduct(s, l1_sig) if fused else s
        return proj["s"]

    def tp_l1(x, Bm):
        key = (x, Bm, "l1")
        if key not in full_cache:
            full_cache[key] = compute_type(_project_cached(), (x,), Bm)
        return full_cache[key]

    if rng is None:
        quads = [
            (x, y, B, C)
            for x in pts
            for y in pts
            if x < y
            for B in _masks([p for p in pts if p not in (x, y)])
            for C in _masks(pts)
        ]
    else:
        quads = []
        for _ in range(40):
            if len(pts) < 2:
                break
            x, y = rng.sample(pts, 2)
            others = [p for p in pts if p not in (x, y)]
            B = frozenset(rng.sample(others, rng.randint(0, min(3, len(others)))))
            C = frozenset(rng.sample(pts, rng.randint(0, min(3, len(pts)))))
            quads.append((x, y, B, C))
    for x, y, B, C in quads:
        report.instances += 1
        if tp(x, B) != tp(y, B):
            continue
        if not (indep(r, s, {x}, C, B) and indep(r, s, {y}, C, B)):
            continue
        BC = B | C
        same = tp_l1(x, frozenset(BC)) == tp_l1(y, frozenset(BC)) if weak else tp(
            x, frozenset(BC)
        ) == tp(y, frozenset(BC))
        if not same:
            report.record(s, {"x": x, "y": y, "B": sorted(B), "C": sorted(C)})


def find_stationarity_counterexample(c, trials: int, seed: int, size_bound: int = 5):
    """Seeded search for a full-Stationarity violation (used on fusions)."""
    r = canonical_relation(c)
    rng = random.Random(seed)
    for trial in range(trials):
        n = rng.randint(3, size_bound)
        s = sample_structure(c, n, rng)
        rep = AxiomReport(axiom="Stationarity")
        _check_stationarity(c, r, s, rep, rng=None, weak=False)
        if rep.violations:
            return trial, s, rep.violations[0]
    return None
