"""The single blow-up ideal replacing a resolution tower.

For the j-th center C_j the factor I_j is the direct image, through the
first j-1 blow-ups, of I_{C_j} twisted by powers of the exceptional
divisors. The twist is chosen so that pulling the direct image back
reproduces the twisted ideal exactly on every chart; the product of all
factors is the ideal whose single blow-up replaces the whole tower.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .blowup import BlowupChart, ResolutionTree, coordinate_index, normal_crossings_at
from .errors import EmptyTree, NoFixedPoint, NonMonomialTower, VerificationFailed
from .ideal import (
    ChartIdeal,
    HomogeneousIdealRep,
    MonomialIdeal,
    direct_image,
    direct_image_homogeneous,
)
from .poly import MultiPoly, Substitution

TWIST_CAP = 16

Twist = dict[str, int]


def _require_monomial(chart: BlowupChart) -> None:
    if not chart.map_to_base.is_monomial():
        raise NonMonomialTower(
            f"chart {chart.id} maps to the base by {chart.map_to_base.to_text(chart.names)}"
        )


def divisor_exponents(chart: BlowupChart) -> dict[str, int]:
    """Divisor id -> coordinate index for the divisors visible in a monomial chart."""
    out = {}
    for did, eq in chart.divisors.items():
        v = coordinate_index(eq)
        if v is None:
            raise NonMonomialTower(f"divisor {did} in chart {chart.id} is not a coordinate line")
        out[did] = v
    return out


def twist_monomial(chart: BlowupChart, twist: Mapping[str, int]) -> tuple[int, int]:
    exp = [0, 0]
    for did, v in divisor_exponents(chart).items():
        exp[v] += twist.get(did, 0)
    return tuple(exp)


def center_chart_ideals(
    tree: ResolutionTree, j: int, twist: Mapping[str, int]
) -> list[ChartIdeal]:
    """I_{C_j} times the exceptional twist, on every chart after j-1 blow-ups."""
    step = tree.steps[j - 1]
    if step.center != (0, 0):
        raise NonMonomialTower(f"center {step.center} of step {j} is not a chart origin")
    out = []
    for chart in tree.leaves_after(j - 1):
        _require_monomial(chart)
        base = MonomialIdeal.maximal(2) if chart.id == step.chart else MonomialIdeal.unit(2)
        out.append(ChartIdeal(chart.map_to_base, base.times_monomial(twist_monomial(chart, twist))))
    return out


@dataclass(frozen=True)
class FixedPointCertificate:
    chart_ids: tuple[str, ...]
    twisted: tuple[MonomialIdeal, ...]
    pulled_back: tuple[MonomialIdeal, ...]

    def holds(self) -> bool:
        return self.twisted == self.pulled_back


def certify(charts: Sequence[ChartIdeal], ids: Sequence[str]) -> tuple[MonomialIdeal, FixedPointCertificate]:
    K = direct_image(charts)
    pulled = tuple(K.pullback(c.map_to_base) for c in charts)
    return K, FixedPointCertificate(tuple(ids), tuple(c.ideal for c in charts), pulled)


def is_fixed(tree: ResolutionTree, j: int, twist: Mapping[str, int]) -> bool:
    charts = center_chart_ideals(tree, j, twist)
    _, cert = certify(charts, [c.id for c in tree.leaves_after(j - 1)])
    return cert.holds()


def exceptional_profile(tree: ResolutionTree, j: int, factors: Sequence[MonomialIdeal]) -> Twist:
    """Divisor exponents of the exceptional divisor of the blow-up along the given factors.

    The pullback of I_1...I_{j-1} is principal on each chart after j-1 steps;
    its generator is a monomial in the exceptional coordinates.
    """
    product = MonomialIdeal.unit(2)
    for f in factors:
        product = product * f
    profile: Twist = {}
    for chart in tree.leaves_after(j - 1):
        pulled = product.pullback(chart.map_to_base)
        if not pulled.is_principal():
            raise NoFixedPoint(f"pullback of earlier factors is not principal on {chart.id}")
        (g,) = pulled.gens
        for did, v in divisor_exponents(chart).items():
            if profile.setdefault(did, g[v]) != g[v]:
                raise NoFixedPoint(f"divisor {did} has inconsistent exponents")
    return {d: profile.get(d, 0) for d in tree.divisor_ids()[: j - 1]}


def find_fixed_d(
    tree: ResolutionTree, j: int, profile: Mapping[str, int] | None = None
) -> tuple[Twist, MonomialIdeal, FixedPointCertificate, list[Twist]]:
    """Smallest certified twist for the j-th center, composite-map variant.

    The twist is first raised along ``profile`` (exponents of the exceptional
    divisor of the blow-up along the earlier factors) until the fixed point
    holds; every twist below that one is then examined in order of total
    degree, skipping those above an already certified twist, which yields all
    componentwise-minimal certified twists. Returns the first of them (they
    have always been unique on the test corpus), its direct image, the
    certificate and the full list of minima.
    """
    divs = tree.divisor_ids()[: j - 1]
    profile = {d: max(1, (profile or {}).get(d, 1)) for d in divs}
    ceiling = None
    for k in range(TWIST_CAP + 1):
        trial = {d: k * profile[d] for d in divs}
        if is_fixed(tree, j, trial):
            ceiling = [trial[d] for d in divs]
            break
    if ceiling is None:
        raise NoFixedPoint(f"no fixed twist for center {j} within multiplier {TWIST_CAP}")
    boxes = sorted(
        itertools.product(*(range(c + 1) for c in ceiling)), key=lambda v: (sum(v), v)
    )
    minima: list[tuple[int, ...]] = []
    for v in boxes:
        if any(all(a <= b for a, b in zip(m, v)) for m in minima):
            continue
        if is_fixed(tree, j, dict(zip(divs, v))):
            minima.append(v)
    twist = dict(zip(divs, minima[0]))
    charts = center_chart_ideals(tree, j, twist)
    K, cert = certify(charts, [c.id for c in tree.leaves_after(j - 1)])
    return twist, K, cert, [dict(zip(divs, m)) for m in minima]


def twist_from_pullback(tree: ResolutionTree, j: int, K: MonomialIdeal) -> Twist | None:
    """Read the exceptional twist off the pullback of K, or None if K is not of that form."""
    step = tree.steps[j - 1]
    twist: Twist = {}
    for chart in tree.leaves_after(j - 1):
        pulled = K.pullback(chart.map_to_base)
        m = pulled.monomial_gcd()
        rest = MonomialIdeal(2, [tuple(a - b for a, b in zip(g, m)) for g in pulled.gens])
        want = MonomialIdeal.maximal(2) if chart.id == step.chart else MonomialIdeal.unit(2)
        if rest != want:
            return None
        coords = divisor_exponents(chart)
        if any(m[v] for v in range(2) if v not in coords.values()):
            return None
        for did, v in coords.items():
            if twist.setdefault(did, m[v]) != m[v]:
                return None
    return {d: twist.get(d, 0) for d in tree.divisor_ids()[: j - 1]}


def stepwise_factor(tree: ResolutionTree, j: int) -> tuple[MonomialIdeal, Twist, list[int]]:
    """Factor for center j built one blow-up at a time (smallest scalar twist per level).

    Returns the base ideal, the total twist it induces upstairs, and the
    per-level scalar twists from level j-1 down to level 1.
    """
    step = tree.steps[j - 1]
    if step.center != (0, 0):
        raise NonMonomialTower(f"center {step.center} of step {j} is not a chart origin")
    ideals: dict[str, MonomialIdeal] = {
        c.id: MonomialIdeal.maximal(2) if c.id == step.chart else MonomialIdeal.unit(2)
        for c in tree.leaves_after(j - 1)
    }
    levels = []
    for k in range(j - 1, 0, -1):
        s = tree.steps[k - 1]
        children = [tree.charts[c] for c in s.children]
        div = f"E{k}"
        for d in range(TWIST_CAP + 1):
            charts = []
            for ch in children:
                if not ch.map_to_parent.is_monomial():
                    raise NonMonomialTower(f"chart {ch.id} is translated")
                v = divisor_exponents(ch)[div]
                exp = [0, 0]
                exp[v] = d
                charts.append(ChartIdeal(ch.map_to_parent, ideals[ch.id].times_monomial(exp)))
            K = direct_image(charts)
            if all(K.pullback(c.map_to_base) == c.ideal for c in charts):
                break
        else:
            raise NoFixedPoint(f"no scalar twist for level {k} of center {j}")
        levels.append(d)
        for ch in children:
            del ideals[ch.id]
        ideals[s.chart] = K
    base = ideals["base"]
    twist = twist_from_pullback(tree, j, base)
    if twist is None:
        raise NoFixedPoint(f"stepwise factor {j} does not pull back to a twisted center ideal")
    return base, twist, levels


@dataclass(frozen=True)
class SingleStepFactor:
    index: int
    chart: str
    twist: Twist
    base_ideal: MonomialIdeal
    certificate: FixedPointCertificate | None = None
    minimal_twists: tuple[Twist, ...] = ()

    @property
    def d(self) -> int:
        """Scalar twist (largest per-divisor exponent)."""
        return max(self.twist.values(), default=0)


@dataclass(frozen=True)
class SingleStepIdeal:
    factors: tuple[SingleStepFactor, ...]
    product: MonomialIdeal
    names: tuple[str, str] = ("x", "y")

    @classmethod
    def from_factors(cls, factors: Sequence[SingleStepFactor], names=("x", "y")) -> "SingleStepIdeal":
        product = MonomialIdeal.unit(2)
        for f in factors:
            product = product * f.base_ideal
        return cls(tuple(factors), product, tuple(names))

    def with_factor(self, index: int, ideal: MonomialIdeal) -> "SingleStepIdeal":
        """Copy with factor ``index`` (1-based) replaced by ``ideal``; twist and certificate kept."""
        factors = [
            SingleStepFactor(f.index, f.chart, f.twist, ideal, f.certificate, f.minimal_twists)
            if f.index == index
            else f
            for f in self.factors
        ]
        return SingleStepIdeal.from_factors(factors, self.names)

    def without_factor(self, index: int) -> "SingleStepIdeal":
        return SingleStepIdeal.from_factors([f for f in self.factors if f.index != index], self.names)

    def factored_text(self) -> str:
        return " ".join(f.base_ideal.to_text(self.names) for f in self.factors)

    def to_json(self) -> dict:
        return {
            "names": list(self.names),
            "factors": [
                {
                    "center": f.index,
                    "chart": f.chart,
                    "twist": dict(f.twist),
                    "d": f.d,
                    "gens": [p.to_text(self.names) for p in f.base_ideal.to_polys()],
                    "ideal": f.base_ideal.to_text(self.names),
                    "minimal_twists": [dict(t) for t in f.minimal_twists],
                }
                for f in self.factors
            ],
            "factored": self.factored_text(),
            "product": {
                "text": self.product.to_text(self.names),
                **self.product.to_json(),
            },
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "SingleStepIdeal":
        names = tuple(data.get("names", ("x", "y")))
        factors = [
            SingleStepFactor(
                index=int(f["center"]),
                chart=f["chart"],
                twist={k: int(v) for k, v in f["twist"].items()},
                base_ideal=MonomialIdeal.from_polys(MultiPoly.parse(g, names) for g in f["gens"]),
                minimal_twists=tuple(
                    {k: int(v) for k, v in t.items()} for t in f.get("minimal_twists", [])
                ),
            )
            for f in data["factors"]
        ]
        return cls.from_factors(factors, names)


def build_single_step(tree: ResolutionTree, variant: str = "composite") -> SingleStepIdeal:
    """Factor the tower into I_1 ... I_m; ``variant`` is "composite" or "stepwise"."""
    if not tree.steps:
        raise EmptyTree("the tree has no blow-ups; there is no ideal to build")
    factors: list[SingleStepFactor] = []
    for j in range(1, tree.nsteps + 1):
        chart = tree.steps[j - 1].chart
        if variant == "composite":
            profile = exceptional_profile(tree, j, [f.base_ideal for f in factors])
            twist, K, cert, minima = find_fixed_d(tree, j, profile)
            factors.append(SingleStepFactor(j, chart, twist, K, cert, tuple(minima)))
        elif variant == "stepwise":
            K, twist, _ = stepwise_factor(tree, j)
            charts = center_chart_ideals(tree, j, twist)
            _, cert = certify(charts, [c.id for c in tree.leaves_after(j - 1)])
            factors.append(SingleStepFactor(j, chart, twist, K, cert))
        else:
            raise ValueError(f"unknown variant {variant!r}")
    return SingleStepIdeal.from_factors(factors, tree.base_names)


@dataclass
class VerificationReport:
    clauses: dict[str, tuple[bool, str]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(ok for ok, _ in self.clauses.values())

    def first_failure(self) -> str | None:
        for name, (ok, _) in self.clauses.items():
            if not ok:
                return name
        return None

    def lines(self) -> list[str]:
        return [f"({k}) {'PASS' if ok else 'FAIL'}: {msg}" for k, (ok, msg) in self.clauses.items()]


def _singular_base_points(tree: ResolutionTree) -> list[tuple[Fraction, Fraction]]:
    return [s.center for s in tree.steps if s.chart == "base"]


def verify_single_step(
    ssi: SingleStepIdeal, tree: ResolutionTree, raise_on_failure: bool = False
) -> VerificationReport:
    """Check the four clauses (a)-(d) of the single-step construction."""
    report = VerificationReport()

    bad = []
    for chart in tree.final_charts():
        pulled = ssi.product.pullback(chart.map_to_base)
        if not pulled.is_principal():
            bad.append(f"{chart.id}: {pulled.to_text(chart.names)}")
    report.clauses["a"] = (not bad, "pullback principal on every final chart" if not bad else "; ".join(bad))

    bad = []
    for chart in tree.final_charts():
        pulled = ssi.product.pullback(chart.map_to_base)
        exc = set(divisor_exponents(chart).values())
        for g in pulled.gens:
            stray = [chart.names[v] for v in range(2) if g[v] and v not in exc]
            if stray:
                bad.append(f"{chart.id}: generator involves non-exceptional {stray}")
    report.clauses["b"] = (not bad, "pullbacks supported on exceptional divisors" if not bad else "; ".join(bad))

    points = _singular_base_points(tree)
    problems = []
    if points != [(0, 0)]:
        problems.append(f"blown-up base points {points} differ from the origin")
    if not ssi.product.support_is_origin():
        problems.append(f"support of the product is {ssi.product.vanishing_coordinates()}")
    for p in points:
        f = tree.curve
        if f.eval_exact(p) != 0 or any(f.partial(v).eval_exact(p) != 0 for v in range(2)):
            problems.append(f"curve is not singular at {p}")
    report.clauses["c"] = (not problems, "support equals the singular point {(0,0)}" if not problems else "; ".join(problems))

    problems = []
    if len(ssi.factors) != tree.nsteps:
        problems.append(f"{len(ssi.factors)} factors for {tree.nsteps} blow-ups")
    for j, f in enumerate(ssi.factors, start=1):
        if f.index != j:
            problems.append(f"factor {f.index} found in position {j}")
            continue
        for ci, chart in zip(center_chart_ideals(tree, j, f.twist), tree.leaves_after(j - 1)):
            pulled = f.base_ideal.pullback(chart.map_to_base)
            if pulled != ci.ideal:
                problems.append(
                    f"factor {j} on {chart.id}: {pulled.to_text(chart.names)} "
                    f"!= {ci.ideal.to_text(chart.names)}"
                )
    report.clauses["d"] = (not problems, "every factor pulls back to its twisted center" if not problems else "; ".join(problems))

    if raise_on_failure and not report.ok:
        clause = report.first_failure()
        raise VerificationFailed(clause, report.clauses[clause][1])
    return report


# Example V.6: cone over a conic in the blow-up of the origin of C^3


def c3_blowup_charts() -> list[Substitution]:
    """Chart k of the blow-up of 0 in C^3: Z_k = u_k, Z_i = u_k * u_i."""
    u = MultiPoly.gens(3)
    return [
        Substitution([u[k] if i == k else u[k] * u[i] for i in range(3)]) for k in range(3)
    ]


def conic_rep() -> HomogeneousIdealRep:
    # variables (Z1, Z2, Z3, xi1, xi2, xi3)
    g = MultiPoly.gens(6)
    return HomogeneousIdealRep.build(3, 3, [g[3] * g[4] - g[5] ** 2])


def _dehomogenize(F: MultiPoly, k: int) -> MultiPoly:
    """Local equation of the fiber-homogeneous F (in xi only) on chart k."""
    u = MultiPoly.gens(3)
    images = [MultiPoly.const(0, 3)] * 3 + [MultiPoly.const(1, 3) if i == k else u[i] for i in range(3)]
    return F.substitute(images)


@dataclass(frozen=True)
class LadderRow:
    d: int
    degree: int
    generators: tuple[MultiPoly, ...]
    expected_power: int
    per_chart: tuple[bool, ...]

    @property
    def equal(self) -> bool:
        return all(self.per_chart)


def principal_equal(gens: Sequence[MultiPoly], h: MultiPoly) -> bool:
    """(gens) == (h): h divides every generator and some quotient is a unit."""
    quotients = [g.exact_div(h) for g in gens]
    if any(q is None for q in quotients):
        return False
    return any(q.is_constant() and not q.is_zero() for q in quotients)


def chart_twisted_conic(k: int, power: int) -> MultiPoly:
    """Generator of J * I_E^power on chart k."""
    u = MultiPoly.gens(3)
    return _dehomogenize(conic_rep().gens[0], k) * u[k] ** power


def example_v6_ladder(d: int) -> LadderRow:
    """Compare pi^{-1} pi_*(J I_E^d) with J I_E^max(d,2) on the three charts."""
    if not 0 <= d <= 8:
        raise ValueError("d must lie in 0..8")
    J = conic_rep()
    Z = MultiPoly.gens(3)
    # J has no sections of fiber degree below 2, so pi_*(J I_E^d) is
    # presented by generators padded to degree max(d, 2).
    degree = max(d, max(J.degrees))
    down = direct_image_homogeneous(J, Z, degree=degree)
    expected = max(d, 2)
    per_chart = []
    for k, chart in enumerate(c3_blowup_charts()):
        up = [g.substitute(chart) for g in down]
        per_chart.append(principal_equal(up, chart_twisted_conic(k, expected)))
    return LadderRow(d, degree, tuple(down), expected, tuple(per_chart))


@dataclass(frozen=True)
class ProductWitness:
    pullback_of_direct_image: tuple[int, ...]
    product_of_pullbacks: tuple[int, ...]
    direct_image_of_E: MonomialIdeal

    @property
    def distinct(self) -> bool:
        return self.pullback_of_direct_image != self.product_of_pullbacks


def remark_v9_witness() -> ProductWitness:
    """Exponents of E in pi^{-1}pi_*(J I_E) versus (pi^{-1}pi_* J)(pi^{-1}pi_* I_E)."""
    charts = c3_blowup_charts()
    E = direct_image(
        [ChartIdeal(c, MonomialIdeal.principal(tuple(int(i == k) for i in range(3)))) for k, c in enumerate(charts)]
    )
    one = example_v6_ladder(1)
    zero = example_v6_ladder(0)
    lhs, rhs = [], []
    for k, chart in enumerate(charts):
        lhs_pow = _principal_power(one.generators, chart, k)
        base_pow = _principal_power(zero.generators, chart, k)
        e_pulled = E.pullback(chart)
        if not e_pulled.is_principal():
            raise AssertionError("pullback of pi_* I_E is not principal")
        lhs.append(lhs_pow)
        rhs.append(base_pow + e_pulled.gens[0][k])
    return ProductWitness(tuple(lhs), tuple(rhs), E)


def _principal_power(down: Sequence[MultiPoly], chart: Substitution, k: int) -> int:
    """Largest p with (pullback of down) == J I_E^p on chart k."""
    up = [g.substitute(chart) for g in down]
    for p in range(12, -1, -1):
        if principal_equal(up, chart_twisted_conic(k, p)):
            return p
    raise AssertionError("pullback is not of the form J I_E^p")
