"""Lazy generic automorphisms of a world, built by constrained back-and-forth.

A table-backed automorphism keeps a finite partial bijection on world points
and extends it on demand: the image of a new point is a fresh realization of
the transported type over the current range (so the partial map is always a
partial isomorphism of the full language), steered by a choice hook (order
windows, arrow directions, chart targets, region maps).  Derived forms
(inverse, product, conjugate, commutator) evaluate through their components
and own no table.

Charts: an unboundedly increasing automorphism is normalized by a ShiftChart,
a lazily built order isomorphism onto the rationals under which the
automorphism acts as x -> x + 1.  Chart values are exact rationals; walking
the automorphism's orbit through its pair tables keeps chart(g(x)) =
chart(x) + 1 on the nose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .classes import OnePointConstraint, transported_facts
from .core import Point, compute_type
from .errors import (
    FixedPoint,
    ModeMismatch,
    NoCompletion,
    NoWitnessFound,
    NotIncreasing,
    NotMetricWorld,
    NotUnboundedlyIncreasing,
    PolicyUnsatisfiable,
    Unsupported,
)
from .fusion import World
from .independence import canonical_relation, indep_corner


# -- base interface -------------------------------------------------------------


class GenericAutomorphism:
    """Common surface: total-on-demand evaluation in both directions."""

    world: World

    def eval(self, x: Point) -> Point:
        raise NotImplementedError

    def eval_inverse(self, y: Point) -> Point:
        raise NotImplementedError

    def lookup(self, x: Point) -> Optional[Point]:
        """Table-only image; None when evaluation would grow state."""
        raise NotImplementedError

    def lookup_inverse(self, y: Point) -> Optional[Point]:
        raise NotImplementedError

    def eval_tuple(self, xs: Sequence[Point]) -> tuple[Point, ...]:
        return tuple(self.eval(x) for x in xs)

    def eval_set(self, xs: Iterable[Point]) -> set[Point]:
        return {self.eval(x) for x in xs}

    def inverse(self) -> "GenericAutomorphism":
        return InverseAutomorphism(self)

    def conjugate_by(self, a: "GenericAutomorphism") -> "GenericAutomorphism":
        return ConjugateAutomorphism(self, a)

    def describe(self) -> dict:
        raise NotImplementedError


class TableAutomorphism(GenericAutomorphism):
    """Back-and-forth generator with pinned pairs, a fix set, and a hook."""

    def __init__(
        self,
        world: World,
        hook: Optional["ChoiceHook"] = None,
        pins: Optional[dict[Point, Point]] = None,
        fix: Optional[Iterable[Point]] = None,
        name: str = "",
    ):
        self.world = world
        self.hook = hook or ChoiceHook()
        self.name = name
        self.fwd: dict[Point, Point] = {}
        self.bwd: dict[Point, Point] = {}
        self.trace: list[dict] = []
        self._step = 0
        fix = set(fix or ())
        pins = dict(pins or {})
        for t in sorted(fix):
            pins.setdefault(t, t)
        if pins:
            dom = sorted(pins)
            img = [pins[t] for t in dom]
            s = world.structure
            if compute_type(s, dom, ()) != compute_type(s, img, ()):
                raise PolicyUnsatisfiable("pinned pairs are not a partial isomorphism")
            for t in dom:
                self.fwd[t] = pins[t]
                self.bwd[pins[t]] = t
        self.fix = fix

    # -- evaluation ---------------------------------------------------------

    def lookup(self, x: Point) -> Optional[Point]:
        return self.fwd.get(x)

    def lookup_inverse(self, y: Point) -> Optional[Point]:
        return self.bwd.get(y)

    def eval(self, x: Point, extra: Optional[OnePointConstraint] = None) -> Point:
        if x in self.fwd:
            return self.fwd[x]
        return self._extend("fwd", x, extra)

    def eval_inverse(self, y: Point, extra: Optional[OnePointConstraint] = None) -> Point:
        if y in self.bwd:
            return self.bwd[y]
        return self._extend("bwd", y, extra)

    def _extend(self, direction: str, x: Point, extra) -> Point:
        s = self.world.structure
        if direction == "fwd":
            src = sorted(self.fwd)
            dst = [self.fwd[t] for t in src]
        else:
            src = sorted(self.bwd)
            dst = [self.bwd[t] for t in src]
        constraint = transported_facts(s, x, src, dst)
        if extra is not None:
            constraint = constraint.merged(extra)
        constraint, indep_from = self.hook.adjust(self, direction, x, constraint)
        y = self.world.realize_independent(constraint, indep_from)
        self.hook.after(self, direction, x, y)
        if direction == "fwd":
            self.fwd[x], self.bwd[y] = y, x
        else:
            self.fwd[y], self.bwd[x] = x, y
        self._step += 1
        self.trace.append({"dir": direction, "x": x, "y": y, "step": self._step})
        return y

    def defined_pairs(self) -> list[tuple[Point, Point]]:
        return sorted(self.fwd.items())

    def describe(self) -> dict:
        return {"kind": "table", "hook": self.hook.describe(), "fix": sorted(self.fix)}


class ChoiceHook:
    """Free extension: fresh realization of the transported type."""

    def adjust(self, auto, direction, x, constraint):
        return constraint, ()

    def after(self, auto, direction, x, y) -> None:
        pass

    def describe(self) -> dict:
        return {"policy": "free"}


def identity_automorphism(world: World) -> "IdentityAutomorphism":
    return IdentityAutomorphism(world)


class IdentityAutomorphism(GenericAutomorphism):
    def __init__(self, world: World):
        self.world = world

    def eval(self, x: Point) -> Point:
        return x

    def eval_inverse(self, y: Point) -> Point:
        return y

    def lookup(self, x: Point) -> Optional[Point]:
        return x

    def lookup_inverse(self, y: Point) -> Optional[Point]:
        return y

    def describe(self) -> dict:
        return {"kind": "identity"}


class InverseAutomorphism(GenericAutomorphism):
    def __init__(self, g: GenericAutomorphism):
        self.g = g
        self.world = g.world

    def eval(self, x: Point) -> Point:
        return self.g.eval_inverse(x)

    def eval_inverse(self, y: Point) -> Point:
        return self.g.eval(y)

    def lookup(self, x):
        return self.g.lookup_inverse(x)

    def lookup_inverse(self, y):
        return self.g.lookup(y)

    def inverse(self) -> GenericAutomorphism:
        return self.g

    def describe(self) -> dict:
        return {"kind": "inverse", "g": self.g.describe()}


class ProductAutomorphism(GenericAutomorphism):
    """Composition; the rightmost factor applies first."""

    def __init__(self, factors: Sequence[GenericAutomorphism]):
        if not factors:
            raise ValueError("empty product")
        self.factors = list(factors)
        self.world = factors[0].world

    def eval(self, x: Point) -> Point:
        for g in reversed(self.factors):
            x = g.eval(x)
        return x

    def eval_inverse(self, y: Point) -> Point:
        for g in self.factors:
            y = g.eval_inverse(y)
        return y

    def lookup(self, x):
        for g in reversed(self.factors):
            x = g.lookup(x)
            if x is None:
                return None
        return x

    def lookup_inverse(self, y):
        for g in self.factors:
            y = g.lookup_inverse(y)
            if y is None:
                return None
        return y

    def describe(self) -> dict:
        return {"kind": "product", "factors": [g.describe() for g in self.factors]}


class ConjugateAutomorphism(GenericAutomorphism):
    """g^a = a^-1 g a."""

    def __init__(self, g: GenericAutomorphism, a: GenericAutomorphism):
        self.g, self.a = g, a
        self.world = g.world

    def eval(self, x: Point) -> Point:
        return self.a.eval_inverse(self.g.eval(self.a.eval(x)))

    def eval_inverse(self, y: Point) -> Point:
        return self.a.eval_inverse(self.g.eval_inverse(self.a.eval(y)))

    def lookup(self, x):
        ax = self.a.lookup(x)
        gx = self.g.lookup(ax) if ax is not None else None
        return self.a.lookup_inverse(gx) if gx is not None else None

    def lookup_inverse(self, y):
        ay = self.a.lookup(y)
        gy = self.g.lookup_inverse(ay) if ay is not None else None
        return self.a.lookup_inverse(gy) if gy is not None else None

    def describe(self) -> dict:
        return {"kind": "conjugate", "g": self.g.describe(), "a": self.a.describe()}


# -- L2-homogeneous builders ------------------------------------------------------


class L2HomogeneousHook(ChoiceHook):
    """Image strictly above/below the argument, or with a fixed arrow direction."""

    def __init__(self, mode: str):
        if mode not in ("increasing", "decreasing", "forward-arrow", "backward-arrow"):
            raise ModeMismatch(f"unknown mode {mode!r}")
        self.mode = mode

    def adjust(self, auto, direction, x, constraint):
        s = auto.world.structure
        if self.mode in ("increasing", "decreasing"):
            up = (self.mode == "increasing") == (direction == "fwd")
            cx = s.order_coords[x]
            lo, hi = constraint.order_gap if constraint.order_gap else (None, None)
            if up:
                lo = cx if lo is None else max(lo, cx)
            else:
                hi = cx if hi is None else min(hi, cx)
            if lo is not None and hi is not None and lo >= hi:
                raise PolicyUnsatisfiable(
                    f"{self.mode} image interval empty at point {x}"
                )
            constraint = replace(constraint, order_gap=(lo, hi))
        else:
            fwd_arrow = (self.mode == "forward-arrow") == (direction == "fwd")
            extra = (
                OnePointConstraint(in_arrows=frozenset({x}))
                if fwd_arrow
                else OnePointConstraint(out_arrows=frozenset({x}))
            )
            constraint = constraint.merged(extra)
        return constraint, ()

    def describe(self) -> dict:
        return {"policy": "l2hom", "mode": self.mode}


def build_L2_homogeneous(world: World, mode: str) -> TableAutomorphism:
    """A fixed-point-free automorphism homogeneous for the expansion part."""
    sig = world.fused.signature
    if mode in ("increasing", "decreasing") and not sig.has_order:
        raise ModeMismatch("order modes need an order expansion")
    if mode in ("forward-arrow", "backward-arrow") and not sig.has_tournament:
        raise ModeMismatch("arrow modes need a tournament expansion")
    return TableAutomorphism(world, hook=L2HomogeneousHook(mode), name=f"l2hom-{mode}")


def l2_pair_pattern(world: World, g: GenericAutomorphism, x: Point) -> tuple:
    """tp_{L2}(x g(x)): the expansion-language pattern of the pair."""
    s = world.structure
    y = g.eval(x)
    out = []
    if s.signature.has_order:
        if x == y:
            out.append("fix")
        else:
            out.append("lt" if s.order_coords[x] < s.order_coords[y] else "gt")
    if s.signature.has_tournament:
        if x == y:
            out.append("fix")
        else:
            out.append("fwd" if s.has_arrow(x, y) else "bwd")
    return tuple(out)


# -- shift charts -----------------------------------------------------------------


class ShiftChart:
    """Lazy order isomorphism onto Q under which g is the unit shift.

    chart(g(x)) = chart(x) + 1 holds exactly on every charted point: values
    are first sought by walking g's orbit through its pair tables, and only
    freshly assigned (gap midpoints inside the right integer window) when the
    orbit carries no value yet.
    """

    def __init__(self, g: GenericAutomorphism, x0: Point, step_bound: int = 64):
        self.g = g
        self.world = g.world
        self.x0 = x0
        self.step_bound = step_bound
        self.table: dict[Point, Fraction] = {}
        self.by_value: dict[Fraction, Point] = {}
        self._fracs: set[Fraction] = set()
        self._register(x0, Fraction(0))

    # -- bookkeeping --------------------------------------------------------

    def _register(self, x: Point, q: Fraction) -> None:
        if x in self.table:
            if self.table[x] != q:
                raise NotUnboundedlyIncreasing(
                    f"chart conflict at point {x}: {self.table[x]} vs {q}"
                )
            return
        if q in self.by_value:
            raise NotUnboundedlyIncreasing(f"chart value {q} already taken")
        coords = self.world.structure.order_coords
        for z, v in self.table.items():
            if (v < q) != (coords[z] < coords[x]):
                raise NotUnboundedlyIncreasing(
                    f"chart would break monotonicity between {z} and {x}"
                )
        self.table[x] = q
        self.by_value[q] = x
        self._fracs.add(q - math.floor(q))

    def charted(self, x: Point) -> bool:
        return x in self.table

    def _walk(self, x: Point) -> Optional[Fraction]:
        """Search x's g-orbit (through tables only) for a charted mate."""
        seen = {x}
        z, k = x, 0
        while True:
            nz = self.g.lookup(z)
            if nz is None or nz in seen:
                break
            z, k = nz, k + 1
            seen.add(z)
            if z in self.table:
                return self._chart_orbit(x, self.table[z] - k)
        z, k = x, 0
        while True:
            nz = self.g.lookup_inverse(z)
            if nz is None or nz in seen:
                break
            z, k = nz, k + 1
            seen.add(z)
            if z in self.table:
                return self._chart_orbit(x, self.table[z] + k)
        return None

    def _chart_orbit(self, x: Point, q: Fraction) -> Fraction:
        self._register(x, q)
        z, v = x, q
        while True:
            nz = self.g.lookup(z)
            if nz is None or nz in self.table:
                break
            z, v = nz, v + 1
            self._register(z, v)
        z, v = x, q
        while True:
            nz = self.g.lookup_inverse(z)
            if nz is None or nz in self.table:
                break
            z, v = nz, v - 1
            self._register(z, v)
        return q

    # -- the chart map ------------------------------------------------------

    def value_if_known(self, x: Point) -> Optional[Fraction]:
        """Table or orbit-walk value; never grows the world."""
        if x in self.table:
            return self.table[x]
        return self._walk(x)

    def value(self, x: Point) -> Fraction:
        if x in self.table:
            return self.table[x]
        v = self._walk(x)
        if v is not None:
            return v
        self._overtake(x)
        if x in self.table:  # the orbit walk may have charted x on the way
            return self.table[x]
        coords = self.world.structure.order_coords
        cx = coords[x]
        below = [(v, z) for z, v in self.table.items() if coords[z] < cx]
        above = [(v, z) for z, v in self.table.items() if coords[z] > cx]
        if not below or not above:  # pragma: no cover - overtaking guarantees brackets
            raise NotUnboundedlyIncreasing(f"no chart bracket around point {x}")
        lo = max(below)[0]
        hi = min(above)[0]
        q = self._fresh_soft_value(lo, hi)
        self._register(x, q)
        return q

    def _frac_fresh(self, v: Fraction) -> bool:
        return (v - math.floor(v)) not in self._fracs

    def _fresh_soft_value(self, lo: Fraction, hi: Fraction) -> Fraction:
        """A value in (lo, hi) whose fractional part no charted value shares.

        Chart values spread along orbits by integer shifts, so fresh
        fractional parts keep independently chosen values collision-free
        forever.  Terminates: halvings yield distinct values and only
        finitely many fractional parts are taken.
        """
        v = (lo + hi) / 2
        while not self._frac_fresh(v) or v in self.by_value:
            v = (v + hi) / 2
        return v

    def coord_bracket_of_value(
        self, q: Fraction
    ) -> tuple[Optional[Fraction], Optional[Fraction]]:
        """Order coordinates a fresh point of chart value q must sit between.

        Placing every chart-pinned point inside the coordinate bracket of its
        value keeps the chart order-consistent by induction.
        """
        coords = self.world.structure.order_coords
        lo = max(((v, z) for z, v in self.table.items() if v < q), default=None)
        hi = min(((v, z) for z, v in self.table.items() if v > q), default=None)
        return (
            coords[lo[1]] if lo is not None else None,
            coords[hi[1]] if hi is not None else None,
        )

    def _overtake(self, x: Point) -> None:
        """Materialize orbit points of x0 bracketing x; certifies unboundedness."""
        coords = self.world.structure.order_coords
        cx = coords[x]
        top = self.x0
        for _ in range(self.step_bound):
            if coords[top] > cx:
                break
            top = self.g.eval(top)
            self._walk(top)
        else:
            raise NotUnboundedlyIncreasing(
                f"orbit of {self.x0} did not overtake point {x} within "
                f"{self.step_bound} steps"
            )
        bot = self.x0
        for _ in range(self.step_bound):
            if coords[bot] < cx:
                break
            bot = self.g.eval_inverse(bot)
            self._walk(bot)
        else:
            raise NotUnboundedlyIncreasing(
                f"inverse orbit of {self.x0} did not drop below point {x} within "
                f"{self.step_bound} steps"
            )

    def unchart(self, q: Fraction) -> Optional[Point]:
        return self.by_value.get(q)

    def bracket_coords(
        self, q: Fraction
    ) -> tuple[Optional[Fraction], Optional[Fraction]]:
        """Order coordinates of the charted neighbors of value q."""
        coords = self.world.structure.order_coords
        lo = max((v for v in self.by_value if v < q), default=None)
        hi = min((v for v in self.by_value if v > q), default=None)
        return (
            coords[self.by_value[lo]] if lo is not None else None,
            coords[self.by_value[hi]] if hi is not None else None,
        )

    def materialize_window(self, q: Fraction) -> None:
        """Ensure orbit points at the integers around q exist and are charted."""
        m = math.floor(q)
        for target in (m, m + 1):
            if Fraction(target) in self.by_value:
                continue
            steps = abs(target)
            z = self.x0
            if steps > self.step_bound:
                raise NotUnboundedlyIncreasing(
                    f"window {target} beyond the step bound {self.step_bound}"
                )
            for _ in range(steps):
                z = self.g.eval(z) if target > 0 else self.g.eval_inverse(z)
            self._walk(z)

    def point_at(
        self,
        q: Fraction,
        l1: Optional[OnePointConstraint] = None,
        indep_from: Iterable[Point] = (),
    ) -> Point:
        """The charted point of value q, realized fresh if absent."""
        if q in self.by_value:
            return self.by_value[q]
        self.materialize_window(q)
        lo, hi = self.bracket_coords(q)
        gap = OnePointConstraint(order_gap=(lo, hi))
        c = l1.merged(gap) if l1 is not None else gap
        y = self.world.realize_independent(c, indep_from)
        self._register(y, q)
        return y

    def pick_value(
        self,
        lo: Fraction,
        hi: Fraction,
        lo_closed: bool,
        hi_closed: bool,
        anchor: Fraction,
    ) -> Fraction:
        """Deterministic fresh chart value in a window, preferring the anchor."""
        if lo > hi or (lo == hi and not (lo_closed and hi_closed)):
            raise PolicyUnsatisfiable(f"empty chart window ({lo},{hi})")
        taken = sorted(v for v in self.by_value if lo <= v <= hi)

        def admissible(v: Fraction) -> bool:
            if not self._frac_fresh(v):
                return False
            if v < lo or v > hi:
                return False
            if v == lo and not lo_closed:
                return False
            if v == hi and not hi_closed:
                return False
            return True

        if admissible(anchor):
            return anchor
        # a fresh value in the free sub-gap nearest the anchor
        edges = [lo] + taken + [hi]
        best = None
        for i in range(len(edges) - 1):
            a, b = edges[i], edges[i + 1]
            if a == b:
                continue
            mid = (a + b) / 2
            tries = 0
            while not admissible(mid) and tries < 64:
                mid = (mid + b) / 2
                tries += 1
            if not admissible(mid):
                continue
            d = abs(mid - anchor)
            if best is None or d < best[0]:
                best = (d, mid)
        if best is None:
            raise PolicyUnsatisfiable(f"no free chart value in ({lo},{hi})")
        return best[1]


class _ChartBracketedHook(ChoiceHook):
    """Wraps a table automorphism's hook so its own extensions land inside
    the coordinate bracket of their pinned chart value (source value ± 1)."""

    def __init__(self, inner: ChoiceHook, chart: "ShiftChart"):
        self.inner = inner
        self.chart = chart
        self._pin: Optional[Fraction] = None

    def adjust(self, auto, direction, x, constraint):
        constraint, indep_from = self.inner.adjust(auto, direction, x, constraint)
        self._pin = None
        v = self.chart.value_if_known(x)
        if v is not None:
            q = v + 1 if direction == "fwd" else v - 1
            blo, bhi = self.chart.coord_bracket_of_value(q)
            glo, ghi = constraint.order_gap if constraint.order_gap else (None, None)
            nlo = blo if glo is None else (max(glo, blo) if blo is not None else glo)
            nhi = bhi if ghi is None else (min(ghi, bhi) if bhi is not None else ghi)
            constraint = replace(constraint, order_gap=(nlo, nhi))
            self._pin = q
        return constraint, indep_from

    def after(self, auto, direction, x, y) -> None:
        self.inner.after(auto, direction, x, y)
        if self._pin is not None:
            self.chart._register(y, self._pin)
            self._pin = None

    def describe(self) -> dict:
        return self.inner.describe()


def normalize_shift(g: GenericAutomorphism, x0: Point, step_bound: int = 64) -> ShiftChart:
    """Chart with chart(x0) = 0 and chart(g(x)) = chart(x) + 1 per query.

    When g is table-backed its hook is wrapped so later extensions stay
    consistent with the chart; normalize before evaluating g elsewhere.
    """
    if not g.world.fused.signature.has_order:
        raise ModeMismatch("shift charts need an order expansion")
    chart = ShiftChart(g, x0, step_bound=step_bound)
    if isinstance(g, TableAutomorphism):
        g.hook = _ChartBracketedHook(g.hook, chart)
    return chart


def certify_unbounded(
    g: GenericAutomorphism, a: Point, b: Point, step_bound: int = 64
) -> int:
    """Steps for the g-orbit of a to overtake b; NotUnboundedlyIncreasing if bounded."""
    coords = g.world.structure.order_coords
    z = a
    for k in range(1, step_bound + 1):
        z = g.eval(z)
        if coords[z] > coords[b]:
            return k
    raise NotUnboundedlyIncreasing(
        f"orbit of {a} did not overtake {b} within {step_bound} steps"
    )


# -- policy commutators ------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintPolicy:
    """Per-point policy for the f of a commutator [h, f].

    fixed-point-free : every evaluated point of [h,f] must move
    strict-increase  : f lands in [x/2, x/2 + eps) in h's chart
    move-max         : f lands in (x/2 - eps, x/2] (order) or threads the
                       forward-arrow condition (tournament)
    """

    kind: str
    epsilon: Fraction = Fraction(1, 4)

    def __post_init__(self):
        if self.kind not in ("fixed-point-free", "strict-increase", "move-max"):
            raise Unsupported(f"unknown policy {self.kind!r}")
        if self.kind != "fixed-point-free" and not (0 < self.epsilon < Fraction(1, 2)):
            raise PolicyUnsatisfiable("order commutator policies need 0 < eps < 1/2")


class ChartWindowHook(ChoiceHook):
    """f(x) constrained to a rational window around x/2 in the chart of h."""

    def __init__(self, chart: ShiftChart, policy: ConstraintPolicy):
        self.chart = chart
        self.policy = policy

    def window(self, t: Fraction, direction: str) -> tuple[Fraction, Fraction, bool, bool, Fraction]:
        eps = self.policy.epsilon
        if self.policy.kind == "strict-increase":
            if direction == "fwd":  # f(x) in [t/2, t/2 + eps)
                return (t / 2, t / 2 + eps, True, False, t / 2)
            return (2 * t - 2 * eps, 2 * t, False, True, 2 * t)
        if direction == "fwd":  # move-max: f(x) in (t/2 - eps, t/2]
            return (t / 2 - eps, t / 2, False, True, t / 2)
        return (2 * t, 2 * t + 2 * eps, True, False, 2 * t)

    def adjust(self, auto, direction, x, constraint):
        t = self.chart.value(x)
        lo, hi, lc, hc, anchor = self.window(t, direction)
        # clamp by the transported gap, read off in chart values
        glo, ghi = constraint.order_gap if constraint.order_gap else (None, None)
        vlo = self._gap_value(glo, is_lo=True)
        vhi = self._gap_value(ghi, is_lo=False)
        if vlo is not None and vlo > lo:
            lo, lc = vlo, False
        if vhi is not None and vhi < hi:
            hi, hc = vhi, False
        v = self.chart.pick_value(lo, hi, lc, hc, anchor)
        blo, bhi = self.chart.coord_bracket_of_value(v)
        nlo = blo if glo is None else (max(glo, blo) if blo is not None else glo)
        nhi = bhi if ghi is None else (min(ghi, bhi) if bhi is not None else ghi)
        self._pending = v
        return replace(constraint, order_gap=(nlo, nhi)), ()

    def _gap_value(self, coord, is_lo: bool) -> Optional[Fraction]:
        if coord is None:
            return None
        coords = self.chart.world.structure.order_coords
        pts = [(v, z) for z, v in self.chart.table.items()]
        if is_lo:
            cands = [v for v, z in pts if coords[z] <= coord]
            return max(cands) if cands else None
        cands = [v for v, z in pts if coords[z] >= coord]
        return min(cands) if cands else None

    def after(self, auto, direction, x, y) -> None:
        self.chart._register(y, self._pending)

    def describe(self) -> dict:
        return {
            "policy": self.policy.kind,
            "epsilon": str(self.policy.epsilon),
        }


class CommutatorAutomorphism(GenericAutomorphism):
    """[h, f] = h^-1 f^-1 h f with a policy governing f's extensions."""

    def __init__(
        self,
        h: GenericAutomorphism,
        f: TableAutomorphism,
        policy: ConstraintPolicy,
        chart: Optional[ShiftChart] = None,
    ):
        self.h, self.f, self.policy, self.chart = h, f, policy, chart
        self.world = h.world

    def eval(self, x: Point) -> Point:
        h, f = self.h, self.f
        tournament_movemax = (
            self.policy.kind == "move-max"
            and self.world.fused.signature.has_tournament
        )
        if tournament_movemax:
            z = h.eval(x)  # forces the pair (x, h(x)) into h's table
        u = f.eval(x)
        s = h.eval(u)
        if tournament_movemax and f.lookup_inverse(s) is None:
            # thread h(x) -> t so the final preimage inherits x -> g(x)
            t = f.eval_inverse(s, extra=OnePointConstraint(in_arrows=frozenset({z})))
        else:
            t = f.eval_inverse(s)
        y = h.eval_inverse(t)
        if self.policy.kind == "fixed-point-free" and y == x:
            raise PolicyUnsatisfiable(
                f"commutator fixes point {x}: h(f(x)) = f(h(x)) was forced"
            )
        return y

    def eval_inverse(self, y: Point) -> Point:
        h, f = self.h, self.f
        return f.eval_inverse(h.eval_inverse(f.eval(h.eval(y))))

    def lookup(self, x):
        u = self.f.lookup(x)
        s = self.h.lookup(u) if u is not None else None
        t = self.f.lookup_inverse(s) if s is not None else None
        return self.h.lookup_inverse(t) if t is not None else None

    def lookup_inverse(self, y):
        u = self.h.lookup(y)
        s = self.f.lookup(u) if u is not None else None
        t = self.h.lookup_inverse(s) if s is not None else None
        return self.f.lookup(t) if t is not None else None

    def describe(self) -> dict:
        return {
            "kind": "commutator",
            "h": self.h.describe(),
            "policy": self.policy.kind,
            "epsilon": str(self.policy.epsilon),
        }


def build_commutator(
    h: GenericAutomorphism,
    policy: ConstraintPolicy,
    chart: Optional[ShiftChart] = None,
) -> CommutatorAutomorphism:
    """[h, f] with f built by back-and-forth under the policy.

    Order policies normalize h through a ShiftChart (h must be unboundedly
    increasing; the chart certifies that per query).  The tournament move-max
    policy requires h forward-arrow homogeneous.
    """
    world = h.world
    sig = world.fused.signature
    if policy.kind == "fixed-point-free":
        f = TableAutomorphism(world, name="f-fpf")
        return CommutatorAutomorphism(h, f, policy)
    if sig.has_order and policy.kind in ("strict-increase", "move-max"):
        if chart is None:
            x0 = min(world.structure.points, default=None)
            if x0 is None:
                x0 = world.new_point(OnePointConstraint())
            chart = normalize_shift(h, x0)
        f = TableAutomorphism(world, hook=ChartWindowHook(chart, policy), name="f-chart")
        return CommutatorAutomorphism(h, f, policy, chart=chart)
    if sig.has_tournament and policy.kind == "move-max":
        f = TableAutomorphism(world, name="f-arrow")
        return CommutatorAutomorphism(h, f, policy)
    raise PolicyUnsatisfiable(
        f"policy {policy.kind!r} does not match the world's expansion component"
    )


# -- piecewise layouts and unbounded increase ---------------------------------------


class PiecewiseLayout:
    """Order-convex copies indexed 0..k-1, tracked by explicit membership.

    Within each copy a strictly increasing automorphism can be unbounded (its
    coordinates approach the copy boundary while the copy chart runs to
    infinity), which models a union of copies of Q.
    """

    def __init__(self, world: World, k: int, first: bool = True, last: bool = True):
        if k < 1:
            raise ValueError("need at least one copy")
        self.world = world
        self.k = k
        self.first, self.last = first, last
        self.copy_of: dict[Point, int] = {}
        self.seeds: list[Point] = []
        for i in range(k):
            seed = world.new_point(OnePointConstraint())
            self.copy_of[seed] = i
            self.seeds.append(seed)
        self.charts: dict[int, ShiftChart] = {}

    def assign(self, x: Point, i: int) -> None:
        coords = self.world.structure.order_coords
        for z, j in self.copy_of.items():
            if j < i and coords[z] >= coords[x] or j > i and coords[z] <= coords[x]:
                raise PolicyUnsatisfiable(
                    f"point {x} cannot join copy {i}: breaks copy convexity"
                )
        self.copy_of[x] = i

    def bounds(self, i: int) -> tuple[Optional[Fraction], Optional[Fraction]]:
        coords = self.world.structure.order_coords
        lo = max(
            (coords[z] for z, j in self.copy_of.items() if j < i), default=None
        )
        hi = min(
            (coords[z] for z, j in self.copy_of.items() if j > i), default=None
        )
        return lo, hi

    def chart(self, i: int) -> ShiftChart:
        if i not in self.charts:
            raise Unsupported("chart requested before the copy's shift exists")
        return self.charts[i]

    def region(self, x: Point) -> tuple[int, int]:
        """(copy index, half): half 1 below the copy seed, half 2 at or above."""
        i = self.copy_of[x]
        half = 1 if self.chart(i).value(x) < 0 else 2
        return (i, half)

    def half_bounds(self, i: int, half: int) -> tuple[Optional[Fraction], Optional[Fraction]]:
        lo, hi = self.bounds(i)
        seed_coord = self.world.structure.order_coords[self.seeds[i]]
        return (lo, seed_coord) if half == 1 else (seed_coord, hi)


class CopyShiftHook(ChoiceHook):
    """h stays within each copy, unboundedly increasing inside it."""

    def __init__(self, layout: PiecewiseLayout):
        self.layout = layout

    def adjust(self, auto, direction, x, constraint):
        lay = self.layout
        i = lay.copy_of[x]
        cx = lay.world.structure.order_coords[x]
        lo, hi = lay.bounds(i)
        # strictly increasing within the copy; the high/low gap preference
        # makes orbits march toward the copy boundary (unbounded in the
        # copy's own chart) without fighting the transported order type
        if direction == "fwd":
            lo, pref = (cx if lo is None else max(lo, cx)), "high"
        else:
            hi, pref = (cx if hi is None else min(hi, cx)), "low"
        glo, ghi = constraint.order_gap if constraint.order_gap else (None, None)
        nlo = lo if glo is None else (max(glo, lo) if lo is not None else glo)
        nhi = hi if ghi is None else (min(ghi, hi) if hi is not None else ghi)
        if nlo is not None and nhi is not None and nlo >= nhi:
            raise PolicyUnsatisfiable(f"copy-shift window empty at point {x}")
        self._copy = i
        return replace(constraint, order_gap=(nlo, nhi), order_pref=pref), ()

    def after(self, auto, direction, x, y) -> None:
        self.layout.assign(y, self._copy)

    def describe(self) -> dict:
        return {"policy": "copy-shift", "copies": self.layout.k}


def build_piecewise_increasing(world: World, copies: int) -> TableAutomorphism:
    """Strictly increasing h acting as a unit shift inside each of k copies."""
    layout = PiecewiseLayout(world, copies)
    h = TableAutomorphism(world, hook=CopyShiftHook(layout), name="piecewise-shift")
    h.layout = layout
    for i, seed in enumerate(layout.seeds):
        layout.charts[i] = ShiftChart(h, seed)
    return h


class HalfCopyHook(ChoiceHook):
    """The half-copy scheme: f(Q1_i) = Q2_i and f(Q2_i) = Q1_{i+1}.

    A first copy maps Q1_0 onto the whole copy; a last copy maps onto its
    Q2.  Region membership is the hard constraint; rational chart anchors
    only steer the canonical choice.
    """

    def __init__(self, layout: PiecewiseLayout):
        self.layout = layout

    def region_map(self, region: tuple[int, int]) -> tuple[int, Optional[int]]:
        i, half = region
        lay = self.layout
        if lay.last and i == lay.k - 1:
            return (i, 2)
        if half == 1:
            if lay.first and i == 0:
                return (0, None)  # the whole first copy
            return (i, 2)
        return (i + 1, 1)

    def region_preimage(self, region: tuple[int, int]) -> tuple[int, int]:
        i, half = region
        lay = self.layout
        if half == 1:
            if i == 0 and lay.first:
                return (0, 1)
            return (i - 1, 2)
        if lay.last and i == lay.k - 1:
            return (i, 1)  # canonical pick between the two last-copy halves
        if lay.first and i == 0:
            return (0, 1)
        return (i, 1)

    def adjust(self, auto, direction, x, constraint):
        lay = self.layout
        region = lay.region(x)
        c = lay.chart(region[0]).value(x)
        if direction == "fwd":
            target = self.region_map(region)
        else:
            target = self.region_preimage(region)
        ti = target[0]
        if target[1] is None:
            blo, bhi = lay.bounds(ti)
        else:
            blo, bhi = lay.half_bounds(ti, target[1])
        glo, ghi = constraint.order_gap if constraint.order_gap else (None, None)
        nlo = blo if glo is None else max(glo, blo) if blo is not None else glo
        nhi = bhi if ghi is None else min(ghi, bhi) if bhi is not None else ghi
        if nlo is not None and nhi is not None and nlo >= nhi:
            raise PolicyUnsatisfiable(f"half-copy region window empty at point {x}")
        self._target_copy = ti
        return replace(constraint, order_gap=(nlo, nhi)), ()

    def after(self, auto, direction, x, y) -> None:
        self.layout.assign(y, self._target_copy)

    def describe(self) -> dict:
        return {"policy": "half-copy", "copies": self.layout.k}


def make_unboundedly_increasing(h: GenericAutomorphism) -> GenericAutomorphism:
    """g = h · h^f with f per the half-copy scheme over h's copy layout."""
    layout = getattr(h, "layout", None)
    if layout is None:
        # single copy spanning the world: h is already unboundedly increasing
        # and the first/last-copy rules are contradictory for a lone copy
        for x, y in getattr(h, "fwd", {}).items():
            s = h.world.structure
            if s.order_coords[y] <= s.order_coords[x]:
                raise NotIncreasing(f"h moves point {x} down")
        f = identity_automorphism(h.world)
        g = ProductAutomorphism([h, ConjugateAutomorphism(h, f)])
        g.layout = None
        return g
    for x, y in h.fwd.items():
        s = h.world.structure
        if s.order_coords[y] <= s.order_coords[x]:
            raise NotIncreasing(f"h moves point {x} down")
    f = TableAutomorphism(h.world, hook=HalfCopyHook(layout), name="f-halfcopy")
    g = ProductAutomorphism([h, ConjugateAutomorphism(h, f)])
    g.layout = layout
    g.half_copy_f = f
    return g


# -- move-max witnesses, type separation, epsilon chains -----------------------------


def support_points(*autos: GenericAutomorphism) -> set[Point]:
    out: set[Point] = set()
    for g in autos:
        if isinstance(g, TableAutomorphism):
            out.update(g.fwd)
            out.update(g.bwd)
        elif isinstance(g, CommutatorAutomorphism):
            out |= support_points(g.h, g.f)
        elif isinstance(g, (InverseAutomorphism, ConjugateAutomorphism)):
            out |= support_points(g.g)
            if isinstance(g, ConjugateAutomorphism):
                out |= support_points(g.a)
        elif isinstance(g, ProductAutomorphism):
            out |= support_points(*g.factors)
    return out


def check_moves_maximally(
    g: GenericAutomorphism,
    p: OnePointConstraint,
    base: Iterable[Point],
    extra_l2: Optional[OnePointConstraint] = None,
    attempts: int = 4,
) -> tuple[Point, Point]:
    """A witness x realizing p with x ind_{X; g(X)} g(x), or NoWitnessFound.

    Witnesses are fresh realizations independent from the automorphism's
    whole current support over the base; the policy machinery inside g's
    evaluation supplies the paper's b/c extension choices.  The corner is
    re-verified by the independence checker; failure after the bounded
    attempts is reported as inconclusive, never as a refutation.
    """
    world = g.world
    X = sorted(set(base))
    r = canonical_relation(world.fused)
    gX = [g.eval(t) for t in X]
    failures = []
    for attempt in range(attempts):
        avoid = support_points(g) | set(X) | set(gX)
        try:
            x = world.realize_independent(p, avoid, extra_l2)
            gx = g.eval(x)
        except PolicyUnsatisfiable as e:
            failures.append(str(e))
            continue
        if indep_corner(r, world.structure, {x}, set(X), set(gX), {gx}):
            return x, gx
        failures.append(f"corner check failed for witness {x}")
    raise NoWitnessFound(
        f"no maximal-move witness within {attempts} attempts: {failures[-1] if failures else 'none tried'}"
    )


def separate_by_type(
    w: World,
    a: Point,
    a2: Point,
    constraint: Optional[OnePointConstraint] = None,
) -> Point:
    """A new point x with tp(a/x) != tp(a2/x), inside the given L2 constraint.

    Class-specific recipes: graphs join x to a only; metric worlds pin
    d(x,a) = 1 and d(x,a2) = 1/2 (or the derived admissible pair); posets put
    x below a but not below a2, falling back to the dual recipes.
    """
    if a == a2:
        raise ValueError("cannot separate a point from itself")
    s = w.structure
    c1 = w.fused.class1
    extra = constraint or OnePointConstraint()
    candidates: list[OnePointConstraint] = []
    if c1.kind == "forbidden" and c1.signature.relations:
        name = c1.signature.rel_names()[0]
        candidates.append(OnePointConstraint(pos=((name, (None, a)),), neg=((name, (None, a2)),)))
        candidates.append(OnePointConstraint(pos=((name, (None, a2)),), neg=((name, (None, a)),)))
    elif c1.kind == "metric":
        d0 = s.dist(a, a2)
        second = Fraction(1, 2) if d0 >= Fraction(1, 2) else 1 - d0 / 2
        candidates.append(OnePointConstraint(dist={a: Fraction(1), a2: second}))
        candidates.append(OnePointConstraint(dist={a2: Fraction(1), a: second}))
    elif c1.kind == "poset":
        candidates.extend(
            [
                OnePointConstraint(pos=(("po", (None, a)),), neg=(("po", (None, a2)),)),
                OnePointConstraint(pos=(("po", (None, a2)),), neg=(("po", (None, a)),)),
                OnePointConstraint(pos=(("po", (a, None)),), neg=(("po", (a2, None)),)),
                OnePointConstraint(pos=(("po", (a2, None)),), neg=(("po", (a, None)),)),
            ]
        )
    else:
        # trivial L1: separate through the expansion part
        sig = w.fused.signature
        if sig.has_order:
            lo, hi = sorted((s.order_coords[a], s.order_coords[a2]))
            candidates.append(OnePointConstraint(order_gap=(lo, hi)))
        if sig.has_tournament:
            candidates.append(
                OnePointConstraint(in_arrows=frozenset({a}), out_arrows=frozenset({a2}))
            )
    last_error: Optional[Exception] = None
    for cand in candidates:
        try:
            x = w.new_point(cand.merged(extra))
        except Exception as e:  # NoCompletion or conflicting merge
            last_error = e
            continue
        if compute_type(s, (a,), {x}) != compute_type(s, (a2,), {x}):
            return x
    raise NoCompletion(f"no separating recipe applies: {last_error}")


def urysohn_epsilon_chain(
    h: GenericAutomorphism, a: Point
) -> tuple[GenericAutomorphism, dict]:
    """The metric chain construction: h1 moving a by distance exactly 1.

    Builds the chain a_0 = a, ..., a_k with d(a_{i-1}, a_i) = eps and
    d(a_i, a_j) = min(|i-j| eps, 1), k minimal with k*eps >= 1, and the pair
    maps f_i = {a_{i-1} -> a, a_i -> h(a)}, so h^{f_i}(a_{i-1}) = a_i exactly
    and h1 = h^{f_k} ... h^{f_1} maps a to the endpoint at distance 1.
    """
    w = h.world
    s = w.structure
    if not w.fused.signature.has_metric:
        raise NotMetricWorld("epsilon chains need a metric component")
    z = h.eval(a)
    if z == a:
        raise FixedPoint(f"h fixes point {a}")
    eps = s.dist(a, z)
    if eps >= 1:
        k = 1
    else:
        k = math.ceil(Fraction(1) / eps)
    upward = s.order_coords[a] < s.order_coords[z] if w.fused.signature.has_order else True
    chain = [a]
    for i in range(1, k + 1):
        dist = {chain[j]: min(Fraction(1), (i - j) * eps) for j in range(i)}
        gap = (
            (s.order_coords[chain[-1]], None)
            if upward
            else (None, s.order_coords[chain[-1]])
        )
        pt = w.new_point(OnePointConstraint(dist=dist, order_gap=gap if w.fused.signature.has_order else None))
        chain.append(pt)
    factors = []
    for i in range(1, k + 1):
        f_i = TableAutomorphism(w, pins={chain[i - 1]: a, chain[i]: z}, name=f"chain-f{i}")
        factors.append(ConjugateAutomorphism(h, f_i))
    h1 = ProductAutomorphism(list(reversed(factors)))  # f_1-conjugate applies first
    image = h1.eval(a)
    cert = {
        "epsilon": str(eps),
        "k": k,
        "chain": chain,
        "b": a,
        "image": image,
        "displacement": str(s.dist(a, image)),
    }
    return h1, cert
