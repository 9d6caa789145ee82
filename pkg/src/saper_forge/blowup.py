"""Point blow-ups of plane charts and the embedded resolution driver.

Every chart carries its map to the parent chart, the cached composite map to
the base, the local equations of the exceptional divisors visible in it, and
a list of "ownership" equations. The owned locus of a chart is where all of
them vanish; owned loci of the leaf charts partition the blown-up surface,
so each point is examined in exactly one chart by the driver.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import IrrationalCenter, StepCapExceeded
from .poly import MultiPoly, Substitution

STEP_CAP = 32

Point = tuple[Fraction, Fraction]


@dataclass(frozen=True)
class BlowupChart:
    id: str
    parent: str | None
    names: tuple[str, str]
    map_to_parent: Substitution
    map_to_base: Substitution
    divisors: Mapping[str, MultiPoly] = field(default_factory=dict)
    owned: tuple[MultiPoly, ...] = ()

    @classmethod
    def base(cls, names: Sequence[str] = ("x", "y")) -> "BlowupChart":
        ident = Substitution.identity(2)
        return cls("base", None, tuple(names), ident, ident, {}, ())

    def owns(self, p: Point) -> bool:
        return all(g.eval_exact(p) == 0 for g in self.owned)

    def exceptional_coordinates(self) -> dict[int, str]:
        """Coordinate index -> divisor id, for divisors that are a coordinate line."""
        out = {}
        for did, eq in self.divisors.items():
            v = coordinate_index(eq)
            if v is not None:
                out[v] = did
        return out


def coordinate_index(eq: MultiPoly) -> int | None:
    """Index v when ``eq`` is a nonzero constant times the variable x_v."""
    if not eq.is_monomial():
        return None
    (exp,) = eq.terms
    if sum(exp) == 1:
        return exp.index(1)
    return None


@dataclass(frozen=True)
class CurveState:
    chart: str
    strict_transform: MultiPoly
    multiplicities: Mapping[str, int] = field(default_factory=dict)


def blow_up_point(
    chart: BlowupChart, p: Sequence, step: int
) -> tuple[BlowupChart, BlowupChart]:
    """Blow up the exact point ``p`` of ``chart``; returns the (x-chart, y-chart) pair."""
    p1, p2 = (Fraction(c) for c in p)
    X, Y = MultiPoly.gens(2)
    new_div = f"E{step}"
    maps = {
        "x": Substitution([X + p1, X * Y + p2]),
        "y": Substitution([X * Y + p1, Y + p2]),
    }
    exc_var = {"x": 0, "y": 1}
    children = []
    for kind in ("x", "y"):
        m = maps[kind]
        divisors: dict[str, MultiPoly] = {}
        for did, eq in chart.divisors.items():
            _, strict = eq.substitute(m).divide_out(exc_var[kind])
            if not strict.is_constant():
                divisors[did] = strict
        divisors[new_div] = MultiPoly.var(exc_var[kind], 2)
        owned = [g.substitute(m) for g in chart.owned]
        if kind == "y":
            # the y-chart only owns the strict transform of {x = p1} (and its point on E)
            owned.append(X)
        owned = tuple(g for g in owned if not g.is_zero())
        children.append(
            BlowupChart(
                id=f"{step}{kind}",
                parent=chart.id,
                names=(f"x{step}", f"y{step}"),
                map_to_parent=m,
                map_to_base=chart.map_to_base.followed_by(m),
                divisors=divisors,
                owned=owned,
            )
        )
    return children[0], children[1]


def strict_transform(state: CurveState, chart: BlowupChart) -> CurveState:
    """Pull the parent's strict transform into ``chart`` and remove exceptional factors."""
    if state.strict_transform.is_zero():
        raise ValueError("curve is identically zero")
    total = state.strict_transform.substitute(chart.map_to_parent)
    mult = dict(state.multiplicities)
    q = total
    for v, did in sorted(chart.exceptional_coordinates().items()):
        m, q = q.divide_out(v)
        if m:
            mult[did] = mult.get(did, 0) + m
    return CurveState(chart.id, q, mult)


def _value_and_gradient(g: MultiPoly, p: Point) -> tuple[Fraction, tuple[Fraction, Fraction]]:
    return g.eval_exact(p), (g.partial(0).eval_exact(p), g.partial(1).eval_exact(p))


def normal_crossings_at(components: Iterable[MultiPoly], p: Sequence) -> bool:
    """At most two components through p, each smooth there, meeting transversally."""
    p = tuple(Fraction(c) for c in p)
    through = []
    for g in components:
        if g.is_constant():
            continue
        val, grad = _value_and_gradient(g, p)
        if val == 0:
            if grad == (0, 0):
                return False
            through.append(grad)
    if len(through) > 2:
        return False
    if len(through) == 2:
        (a, b), (c, d) = through
        return a * d - b * c != 0
    return True


def chart_components(state: CurveState, chart: BlowupChart) -> list[MultiPoly]:
    return [state.strict_transform, *chart.divisors.values()]


# exact rational roots


def _divisors(n: int) -> list[int]:
    n = abs(n)
    small = [d for d in range(1, math.isqrt(n) + 1) if n % d == 0]
    return sorted(set(small + [n // d for d in small]))


def _univariate(p: MultiPoly, v: int) -> list[Fraction]:
    """Coefficient list (index = power) of p in variable v; p must involve only v."""
    coeffs: dict[int, Fraction] = {}
    for e, c in p.terms.items():
        if any(k for i, k in enumerate(e) if i != v):
            raise ValueError("polynomial is not univariate")
        coeffs[e[v]] = c
    deg = max(coeffs, default=0)
    return [coeffs.get(i, Fraction(0)) for i in range(deg + 1)]


def _poly_eval(coeffs: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _deflate(coeffs: list[Fraction], r: Fraction) -> list[Fraction]:
    out = [Fraction(0)] * (len(coeffs) - 1)
    acc = Fraction(0)
    for i in range(len(coeffs) - 1, 0, -1):
        acc = acc * r + coeffs[i]
        out[i - 1] = acc
    return out


def _poly_gcd_degree(a: list[Fraction], b: list[Fraction]) -> int:
    def trim(p):
        while p and p[-1] == 0:
            p = p[:-1]
        return p

    a, b = trim(list(a)), trim(list(b))
    while b:
        while len(a) >= len(b) and a:
            f = a[-1] / b[-1]
            shift = len(a) - len(b)
            a = trim([c - f * (b[i - shift] if i >= shift else 0) for i, c in enumerate(a)])
        a, b = b, a
    return len(a) - 1


def rational_roots(coeffs: Sequence[Fraction]) -> tuple[dict[Fraction, int], list[Fraction]]:
    """Rational roots with multiplicity, and the leftover cofactor coefficients."""
    coeffs = [Fraction(c) for c in coeffs]
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    if not coeffs:
        raise ValueError("zero polynomial has no finite root set")
    roots: dict[Fraction, int] = {}
    while len(coeffs) > 1 and coeffs[0] == 0:
        coeffs = coeffs[1:]
        roots[Fraction(0)] = roots.get(Fraction(0), 0) + 1
    changed = True
    while changed and len(coeffs) > 1:
        changed = False
        lcm = 1
        for c in coeffs:
            lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
        ints = [int(c * lcm) for c in coeffs]
        for num in _divisors(ints[0]):
            for den in _divisors(ints[-1]):
                for sign in (1, -1):
                    r = Fraction(sign * num, den)
                    if _poly_eval(coeffs, r) == 0:
                        roots[r] = roots.get(r, 0) + 1
                        coeffs = _deflate(coeffs, r)
                        changed = True
                        break
                if changed:
                    break
            if changed:
                break
    return roots, coeffs


def divisor_line_points(strict: MultiPoly, v: int) -> list[Point]:
    """Rational points of {strict = 0} on the coordinate line {x_v = 0}.

    Raises IrrationalCenter when the restriction has a repeated irrational
    factor, i.e. a possible tangency at a point that is not exactly representable.
    """
    restricted = strict.restrict(v, 0)
    if restricted.is_zero():
        raise ValueError("strict transform contains an exceptional line")
    w = 1 - v
    coeffs = _univariate(restricted, w)
    roots, rest = rational_roots(coeffs) if len(coeffs) > 1 else ({}, coeffs)
    if len(rest) > 2:
        deriv = [i * c for i, c in enumerate(rest)][1:]
        if _poly_gcd_degree(rest, deriv) > 0:
            raise IrrationalCenter(
                f"restriction {restricted} has a repeated non-rational factor", restricted
            )
    pts = []
    for r in sorted(roots):
        pt = [Fraction(0), Fraction(0)]
        pt[w] = r
        pts.append(tuple(pt))
    return pts


# resolution tree


@dataclass(frozen=True)
class BlowupStep:
    index: int
    chart: str
    center: Point
    children: tuple[str, str]


@dataclass
class ResolutionTree:
    base_names: tuple[str, str]
    curve: MultiPoly
    charts: dict[str, BlowupChart]
    states: dict[str, CurveState]
    steps: list[BlowupStep]
    final: list[str]
    hints: tuple[Point, ...] = ()
    candidates: dict[str, tuple[Point, ...]] = field(default_factory=dict)

    @property
    def nsteps(self) -> int:
        return len(self.steps)

    def final_charts(self) -> list[BlowupChart]:
        return [self.charts[c] for c in self.final]

    def leaves_after(self, j: int) -> list[BlowupChart]:
        """Charts covering the surface after the first ``j`` blow-ups."""
        leaves = ["base"]
        for step in self.steps[:j]:
            i = leaves.index(step.chart)
            leaves[i : i + 1] = list(step.children)
        return [self.charts[c] for c in leaves]

    def divisor_ids(self) -> list[str]:
        return [f"E{s.index}" for s in self.steps]

    def map_is_composite(self, chart_id: str) -> bool:
        """Exact check that the cached base map is the fold of parent maps."""
        chart = self.charts[chart_id]
        chain = []
        c = chart
        while c.parent is not None:
            chain.append(c.map_to_parent)
            c = self.charts[c.parent]
        s = Substitution.identity(2)
        for m in reversed(chain):
            s = s.followed_by(m)
        return s == chart.map_to_base

    def summary(self) -> str:
        lines = [f"curve: {self.curve.to_text(self.base_names)}", f"blow-ups: {self.nsteps}"]
        for s in self.steps:
            c = ", ".join(str(v) for v in s.center)
            lines.append(f"  step {s.index}: chart {s.chart} at ({c}) -> {', '.join(s.children)}")
        lines.append("final charts:")
        for cid in self.final:
            ch = self.charts[cid]
            st = self.states[cid].strict_transform.to_text(ch.names)
            divs = ", ".join(f"{d}: {eq.to_text(ch.names)}" for d, eq in ch.divisors.items())
            lines.append(f"  {cid}: strict {st}; divisors {{{divs}}}")
        return "\n".join(lines)

    # serialization

    def to_json(self) -> dict:
        def chart_json(ch: BlowupChart) -> dict:
            parent_names = self.charts[ch.parent].names if ch.parent else ch.names
            return {
                "id": ch.id,
                "parent": ch.parent,
                "names": list(ch.names),
                "map_to_parent": ch.map_to_parent.to_text(ch.names),
                "map_to_base": ch.map_to_base.to_text(ch.names),
                "parent_names": list(parent_names),
                "divisors": {d: eq.to_text(ch.names) for d, eq in ch.divisors.items()},
                "owned": [g.to_text(ch.names) for g in ch.owned],
                "strict_transform": self.states[ch.id].strict_transform.to_text(ch.names),
                "multiplicities": dict(self.states[ch.id].multiplicities),
            }

        return {
            "base_names": list(self.base_names),
            "curve": self.curve.to_text(self.base_names),
            "hints": [[str(c) for c in h] for h in self.hints],
            "steps": [
                {
                    "index": s.index,
                    "chart": s.chart,
                    "center": [str(c) for c in s.center],
                    "children": list(s.children),
                }
                for s in self.steps
            ],
            "charts": [chart_json(self.charts[c]) for c in self.charts],
            "final": list(self.final),
            "candidates": {
                c: [[str(v) for v in p] for p in pts] for c, pts in self.candidates.items()
            },
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ResolutionTree":
        base_names = tuple(data["base_names"])
        charts: dict[str, BlowupChart] = {}
        states: dict[str, CurveState] = {}
        for cj in data["charts"]:
            names = tuple(cj["names"])

            def parse(t, names=names):
                return MultiPoly.parse(t, names)

            ch = BlowupChart(
                id=cj["id"],
                parent=cj["parent"],
                names=names,
                map_to_parent=Substitution(parse(t) for t in cj["map_to_parent"]),
                map_to_base=Substitution(parse(t) for t in cj["map_to_base"]),
                divisors={d: parse(t) for d, t in cj["divisors"].items()},
                owned=tuple(parse(t) for t in cj["owned"]),
            )
            charts[ch.id] = ch
            states[ch.id] = CurveState(ch.id, parse(cj["strict_transform"]), dict(cj["multiplicities"]))
        steps = [
            BlowupStep(
                s["index"],
                s["chart"],
                tuple(Fraction(c) for c in s["center"]),
                tuple(s["children"]),
            )
            for s in data["steps"]
        ]
        return cls(
            base_names=base_names,
            curve=MultiPoly.parse(data["curve"], base_names),
            charts=charts,
            states=states,
            steps=steps,
            final=list(data["final"]),
            hints=tuple(tuple(Fraction(c) for c in h) for h in data.get("hints", [])),
            candidates={
                c: tuple(tuple(Fraction(v) for v in p) for p in pts)
                for c, pts in data.get("candidates", {}).items()
            },
        )


def candidate_points(
    chart: BlowupChart, state: CurveState, extra: Iterable[Point] = ()
) -> list[Point]:
    pts: list[Point] = [(Fraction(0), Fraction(0))]
    pts.extend(tuple(Fraction(c) for c in p) for p in extra)
    exc = chart.exceptional_coordinates()
    for v in sorted(exc):
        pts.extend(divisor_line_points(state.strict_transform, v))
    # pairwise intersections of coordinate divisors are the origin, already present
    seen = []
    for p in pts:
        if p not in seen and chart.owns(p):
            seen.append(p)
    return seen


def _point_in_child(child: BlowupChart, center: Point, q: Point) -> Point | None:
    """Coordinates of parent point q (distinct from the center) in ``child``, if owned there."""
    dx, dy = q[0] - center[0], q[1] - center[1]
    if child.id.endswith("x"):
        if dx == 0:
            return None
        return (dx, dy / dx)
    if dx != 0:
        return None
    return (Fraction(0), dy)


def resolve(
    curve: MultiPoly,
    hints: Sequence[Sequence] = (),
    names: Sequence[str] = ("x", "y"),
    step_cap: int = STEP_CAP,
    start: ResolutionTree | None = None,
) -> ResolutionTree:
    """Blow up points until the curve and all exceptional divisors cross normally.

    With ``start`` the driver continues from an existing tree; applied to a
    finished tree it must add no steps.
    """
    if curve.nvars != 2:
        raise ValueError("plane curves only")
    if curve.is_zero():
        raise ValueError("curve is identically zero")
    hints = tuple(tuple(Fraction(c) for c in h) for h in hints)
    if start is None:
        base = BlowupChart.base(names)
        tree = ResolutionTree(
            base_names=tuple(names),
            curve=curve,
            charts={"base": base},
            states={"base": CurveState("base", curve, {})},
            steps=[],
            final=[],
            hints=hints,
        )
        queue: list[tuple[str, list[Point]]] = [("base", list(hints))]
    else:
        tree = ResolutionTree(
            base_names=start.base_names,
            curve=start.curve,
            charts=dict(start.charts),
            states=dict(start.states),
            steps=list(start.steps),
            final=[],
            hints=start.hints,
        )
        inherited = start.candidates
        queue = [(c, list(inherited.get(c, ()))) for c in start.final]
        if not start.final:
            queue = [("base", list(start.hints))]

    while queue:
        cid, extra = queue.pop(0)
        chart = tree.charts[cid]
        state = tree.states[cid]
        pts = candidate_points(chart, state, extra)
        comps = chart_components(state, chart)
        bad = [p for p in pts if not normal_crossings_at(comps, p)]
        if not bad:
            tree.final.append(cid)
            tree.candidates[cid] = tuple(p for p in pts if p != (0, 0))
            continue
        if len(tree.steps) >= step_cap:
            raise StepCapExceeded(f"more than {step_cap} blow-ups needed")
        center = bad[0]
        step = len(tree.steps) + 1
        xc, yc = blow_up_point(chart, center, step)
        tree.steps.append(BlowupStep(step, cid, center, (xc.id, yc.id)))
        for child in (xc, yc):
            tree.charts[child.id] = child
            tree.states[child.id] = strict_transform(state, child)
            moved = [
                q2
                for q in itertools.chain(bad[1:], (p for p in extra if p != center))
                if (q2 := _point_in_child(child, center, q)) is not None
            ]
            queue.append((child.id, list(dict.fromkeys(moved))))
    return tree
