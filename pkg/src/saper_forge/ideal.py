"""Monomial ideals: staircases, products, pullbacks and direct images.

A :class:`MonomialIdeal` is stored by its minimal generating exponents in
graded-lex descending order. Pullbacks along monomial chart maps and direct
images over a family of charts are computed exactly; the direct image is the
largest monomial ideal downstairs whose pullback to every chart lies inside
the given chart ideals.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import BoundExceeded, NonMonomialTower
from .poly import Exp, MultiPoly, Substitution, default_names, grlex_key

MAX_SCAN_BOUND = 64


def divides(a: Exp, b: Exp) -> bool:
    return all(x <= y for x, y in zip(a, b))


def minimalize(exps: Iterable[Exp]) -> tuple[Exp, ...]:
    """Drop every exponent divisible by another; result sorted grlex descending."""
    uniq = sorted(set(tuple(e) for e in exps), key=lambda e: (sum(e), e))
    kept: list[Exp] = []
    for e in uniq:
        if not any(divides(k, e) for k in kept):
            kept.append(e)
    return tuple(sorted(kept, key=grlex_key, reverse=True))


class MonomialIdeal:
    __slots__ = ("nvars", "gens")

    def __init__(self, nvars: int, gens: Iterable[Sequence[int]]):
        gens = [tuple(int(v) for v in g) for g in gens]
        if not gens:
            raise ValueError("the zero ideal is not representable")
        for g in gens:
            if len(g) != nvars or any(v < 0 for v in g):
                raise ValueError(f"bad exponent vector {g} for {nvars} variables")
        self.nvars = nvars
        self.gens = minimalize(gens)

    @classmethod
    def unit(cls, nvars: int) -> "MonomialIdeal":
        return cls(nvars, [(0,) * nvars])

    @classmethod
    def maximal(cls, nvars: int) -> "MonomialIdeal":
        return cls(nvars, [tuple(int(i == j) for j in range(nvars)) for i in range(nvars)])

    @classmethod
    def principal(cls, exp: Sequence[int]) -> "MonomialIdeal":
        return cls(len(exp), [tuple(exp)])

    @classmethod
    def from_polys(cls, polys: Iterable[MultiPoly]) -> "MonomialIdeal":
        polys = list(polys)
        if any(not p.is_monomial() for p in polys):
            raise ValueError("generators must be monomials")
        return cls(polys[0].nvars, [next(iter(p.terms)) for p in polys])

    @classmethod
    def parse(cls, text: str, names: Sequence[str] | None = None) -> "MonomialIdeal":
        """Parse "(x^3, x^2*y, y^2)"."""
        names = tuple(names) if names else ("x", "y")
        body = text.strip()
        if not (body.startswith("(") and body.endswith(")")):
            raise ValueError(f"ideal text must be parenthesized: {text!r}")
        parts = [s for s in body[1:-1].split(",") if s.strip()]
        return cls.from_polys(MultiPoly.parse(s, names) for s in parts)

    def _check(self, other: "MonomialIdeal") -> None:
        if other.nvars != self.nvars:
            raise ValueError(f"nvars mismatch: {self.nvars} vs {other.nvars}")

    # predicates

    def is_unit(self) -> bool:
        return self.gens == ((0,) * self.nvars,)

    def is_principal(self) -> bool:
        return len(self.gens) == 1

    def member(self, m: Sequence[int]) -> bool:
        m = tuple(m)
        if len(m) != self.nvars:
            raise ValueError("monomial has wrong number of variables")
        return any(divides(g, m) for g in self.gens)

    __contains__ = member

    def contains(self, other: "MonomialIdeal") -> bool:
        self._check(other)
        return all(self.member(g) for g in other.gens)

    def __eq__(self, other):
        if not isinstance(other, MonomialIdeal):
            return NotImplemented
        return self.nvars == other.nvars and self.gens == other.gens

    def __hash__(self):
        return hash((self.nvars, self.gens))

    # arithmetic

    def __mul__(self, other: "MonomialIdeal") -> "MonomialIdeal":
        return self.product(other)

    def product(self, other: "MonomialIdeal") -> "MonomialIdeal":
        self._check(other)
        return MonomialIdeal(
            self.nvars,
            (tuple(a + b for a, b in zip(g, h)) for g in self.gens for h in other.gens),
        )

    def __pow__(self, k: int) -> "MonomialIdeal":
        result = MonomialIdeal.unit(self.nvars)
        for _ in range(k):
            result = result * self
        return result

    def times_monomial(self, exp: Sequence[int]) -> "MonomialIdeal":
        return MonomialIdeal(self.nvars, (tuple(a + b for a, b in zip(g, exp)) for g in self.gens))

    def monomial_gcd(self) -> Exp:
        return tuple(min(g[i] for g in self.gens) for i in range(self.nvars))

    def max_degree(self) -> int:
        return max(sum(g) for g in self.gens)

    def pullback(self, s: Substitution | Sequence[Sequence[int]]) -> "MonomialIdeal":
        """Inverse image ideal under a monomial map (units in the images are dropped)."""
        rows = exponent_rows(s)
        if len(rows) != self.nvars:
            raise ValueError("map arity does not match ideal")
        target = len(rows[0])
        return MonomialIdeal(
            target,
            (
                tuple(sum(g[i] * rows[i][k] for i in range(self.nvars)) for k in range(target))
                for g in self.gens
            ),
        )

    def vanishing_coordinates(self) -> list[frozenset[int]]:
        """Irreducible components of V(I) as sets of coordinates set to zero."""
        # V(I) is a union of coordinate subspaces {x_S = 0}; S belongs to it
        # iff every generator involves some variable of S.
        comps = []
        for size in range(1, self.nvars + 1):
            for S in itertools.combinations(range(self.nvars), size):
                if all(any(g[i] for i in S) for g in self.gens):
                    if not any(c <= set(S) for c in comps):
                        comps.append(frozenset(S))
        return comps

    def support_is_origin(self) -> bool:
        return self.vanishing_coordinates() == [frozenset(range(self.nvars))]

    # serialization

    def to_polys(self) -> list[MultiPoly]:
        return [MultiPoly.monomial(g) for g in self.gens]

    def to_text(self, names: Sequence[str] | None = None) -> str:
        names = names or default_names(self.nvars)
        return "(" + ", ".join(p.to_text(names) for p in self.to_polys()) + ")"

    def __repr__(self):
        return f"MonomialIdeal{self.to_text()}"

    __str__ = to_text

    def to_json(self) -> dict:
        return {"nvars": self.nvars, "gens": [list(g) for g in self.gens]}

    @classmethod
    def from_json(cls, data: Mapping) -> "MonomialIdeal":
        return cls(int(data["nvars"]), [tuple(g) for g in data["gens"]])


def exponent_rows(s: Substitution | Sequence[Sequence[int]]) -> tuple[Exp, ...]:
    if isinstance(s, Substitution):
        if not s.is_monomial():
            raise NonMonomialTower(f"map {s.to_text()} is not monomial")
        return s.exponent_matrix()
    return tuple(tuple(r) for r in s)


@dataclass(frozen=True)
class ChartIdeal:
    """An ideal on one chart together with the chart's map to the base."""

    map_to_base: Substitution
    ideal: MonomialIdeal

    def rows(self) -> tuple[Exp, ...]:
        return exponent_rows(self.map_to_base)


def _pulled(exp: Exp, rows: Sequence[Exp]) -> Exp:
    target = len(rows[0])
    return tuple(sum(exp[i] * rows[i][k] for i in range(len(exp))) for k in range(target))


def direct_image(charts: Sequence[ChartIdeal], bound: int | None = None) -> MonomialIdeal:
    """Largest base monomial ideal whose pullback lies in every chart ideal.

    Exponents are scanned in the box [0, B]^n; B defaults to 2 plus the largest
    generator degree over all chart ideals and is doubled (up to 64) whenever a
    minimal generator touches the edge of the box.
    """
    if not charts:
        raise ValueError("need at least one chart")
    prepared = [(c.rows(), c.ideal) for c in charts]
    nbase = len(prepared[0][0])
    if any(len(r) != nbase for r, _ in prepared):
        raise ValueError("charts do not share a common base")
    B = bound if bound is not None else 2 + max(c.ideal.max_degree() for c in charts)

    def member(exp: Exp) -> bool:
        return all(J.member(_pulled(exp, rows)) for rows, J in prepared)

    while True:
        found = _staircase_2d(member, B) if nbase == 2 else _box_scan(member, nbase, B)
        if found:
            K = MonomialIdeal(nbase, found)
            if all(max(g) < B for g in K.gens):
                return K
        if B >= MAX_SCAN_BOUND:
            raise BoundExceeded(f"direct image generator reaches scan bound {B}")
        B = min(2 * B, MAX_SCAN_BOUND)


def _box_scan(member, nbase: int, B: int) -> list[Exp]:
    found: list[Exp] = []
    # lexicographic order visits every divisor of exp before exp itself
    for exp in itertools.product(range(B + 1), repeat=nbase):
        if not any(divides(f, exp) for f in found) and member(exp):
            found.append(exp)
    return found


def _staircase_2d(member, B: int) -> list[Exp]:
    """Minimal b for each a by bisection; membership is monotone in b."""
    found: list[Exp] = []
    top = B  # smallest member b found so far (for smaller a), or B if none
    top_is_member = False
    for a in range(B + 1):
        hi = top if top_is_member else B
        if not top_is_member and not member((a, B)):
            continue
        lo = 0
        while lo < hi:
            mid = (lo + hi) // 2
            if member((a, mid)):
                hi = mid
            else:
                lo = mid + 1
        if not top_is_member or lo < top:
            found.append((a, lo))
        top, top_is_member = lo, True
        if lo == 0:
            break
    return found


def direct_image_fixed(charts: Sequence[ChartIdeal]) -> tuple[MonomialIdeal, bool]:
    """Direct image together with whether its pullback reproduces every chart ideal."""
    K = direct_image(charts)
    return K, all(K.pullback(c.rows()) == c.ideal for c in charts)


# homogeneous (Remark-style) representation


@dataclass(frozen=True)
class HomogeneousIdealRep:
    """Ideal upstairs given by polynomials in (z, xi), each homogeneous in xi."""

    base_nvars: int
    fiber_nvars: int
    gens: tuple[MultiPoly, ...]
    degrees: tuple[int, ...]

    @classmethod
    def build(cls, base_nvars: int, fiber_nvars: int, gens: Sequence[MultiPoly]) -> "HomogeneousIdealRep":
        gens = tuple(gens)
        degrees = tuple(xi_degree(g, base_nvars, fiber_nvars) for g in gens)
        return cls(base_nvars, fiber_nvars, gens, degrees)

    def __post_init__(self):
        if len(self.gens) != len(self.degrees):
            raise ValueError("one degree per generator")
        for g, d in zip(self.gens, self.degrees):
            if xi_degree(g, self.base_nvars, self.fiber_nvars) != d:
                raise ValueError(f"generator {g} is not xi-homogeneous of degree {d}")

    def padded(self, degree: int) -> list[MultiPoly]:
        """Generators multiplied by all xi-monomials raising them to ``degree``."""
        n = self.base_nvars + self.fiber_nvars
        out = []
        for g, d in zip(self.gens, self.degrees):
            if degree < d:
                raise ValueError(f"cannot present a degree-{d} generator in degree {degree}")
            for alpha in _monomials_of_degree(self.fiber_nvars, degree - d):
                out.append(g * MultiPoly.monomial((0,) * self.base_nvars + alpha))
                assert out[-1].nvars == n
        return out


def xi_degree(p: MultiPoly, base_nvars: int, fiber_nvars: int) -> int:
    if p.nvars != base_nvars + fiber_nvars:
        raise ValueError("generator has wrong number of variables")
    degs = {sum(e[base_nvars:]) for e in p.terms}
    if len(degs) != 1:
        raise ValueError(f"{p} is not homogeneous in the fiber variables")
    return degs.pop()


def _monomials_of_degree(n: int, d: int) -> list[Exp]:
    out = []
    for combo in itertools.combinations_with_replacement(range(n), d):
        e = [0] * n
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return sorted(out, key=grlex_key, reverse=True)


def direct_image_homogeneous(
    J: HomogeneousIdealRep, f: Sequence[MultiPoly], degree: int | None = None
) -> list[MultiPoly]:
    """Generators F(z, f) of the direct image, after padding J to ``degree``.

    ``f`` are the base generators of the blown-up ideal. With ``degree`` None
    the generators are used at their own degrees.
    """
    f = list(f)
    if len(f) != J.fiber_nvars:
        raise ValueError("need one base function per fiber coordinate")
    if any(p.nvars != J.base_nvars for p in f):
        raise ValueError("base functions live in the wrong ring")
    z = MultiPoly.gens(J.base_nvars)
    images = Substitution(list(z) + f)
    if degree is None:
        polys = list(J.gens)
    else:
        polys = J.padded(degree)
    return [g.substitute(images) for g in polys]
