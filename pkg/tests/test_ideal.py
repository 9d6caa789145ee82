import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saper_forge.errors import NonMonomialTower
from saper_forge.ideal import (
    ChartIdeal,
    HomogeneousIdealRep,
    MonomialIdeal,
    _box_scan,
    _pulled,
    _staircase_2d,
    direct_image,
    direct_image_fixed,
    direct_image_homogeneous,
    minimalize,
)
from saper_forge.poly import MultiPoly, Substitution

x, y = MultiPoly.gens(2)
X_CHART = Substitution([x, x * y])
Y_CHART = Substitution([x * y, y])


def test_minimal_generators_and_text():
    I = MonomialIdeal.parse("(x^3, x^2*y, y^2, x^3*y, y^5)")
    assert I.gens == ((3, 0), (2, 1), (0, 2))
    assert I.to_text() == "(x^3, x^2*y, y^2)"
    assert MonomialIdeal.parse(I.to_text()) == I
    assert MonomialIdeal.from_json(I.to_json()) == I


def test_minimalize_drops_multiples():
    assert set(minimalize([(1, 1), (2, 1), (0, 3), (1, 3)])) == {(1, 1), (0, 3)}


def test_membership_and_containment():
    I = MonomialIdeal.parse("(x^2, y)")
    assert I.member((3, 0)) and (0, 1) in I and not I.member((1, 0))
    assert MonomialIdeal.maximal(2).contains(I)
    assert not I.contains(MonomialIdeal.maximal(2))


def test_product_and_power():
    m = MonomialIdeal.maximal(2)
    assert m * MonomialIdeal.parse("(x^2, y)") == MonomialIdeal.parse("(x^3, x*y, y^2)")
    assert m**2 == MonomialIdeal.parse("(x^2, x*y, y^2)")
    assert (m**0).is_unit()


def test_support():
    assert MonomialIdeal.parse("(x^3, x^2*y, y^2)").support_is_origin()
    assert not MonomialIdeal.parse("(x*y)").support_is_origin()


def test_pullback_of_maximal_ideal_is_exceptional():
    assert MonomialIdeal.maximal(2).pullback(X_CHART) == MonomialIdeal.principal((1, 0))
    assert MonomialIdeal.maximal(2).pullback(Y_CHART) == MonomialIdeal.principal((0, 1))


def test_pullback_rejects_non_monomial_map():
    with pytest.raises(NonMonomialTower):
        MonomialIdeal.maximal(2).pullback(Substitution([x + 1, x * y]))


def test_direct_image_of_exceptional_divisor():
    charts = [ChartIdeal(X_CHART, MonomialIdeal.principal((1, 0))), ChartIdeal(Y_CHART, MonomialIdeal.principal((0, 1)))]
    K, fixed = direct_image_fixed(charts)
    assert K == MonomialIdeal.maximal(2) and fixed


def test_direct_image_is_not_fixed_without_twist():
    # (x1) on the x-chart with the unit ideal on the y-chart has direct image (x, y)
    charts = [ChartIdeal(X_CHART, MonomialIdeal.principal((1, 0))), ChartIdeal(Y_CHART, MonomialIdeal.unit(2))]
    K, fixed = direct_image_fixed(charts)
    assert K == MonomialIdeal.maximal(2)
    assert not fixed


# random monomial ideals and 2-step towers

exps2 = st.tuples(st.integers(0, 4), st.integers(0, 4))
ideals2 = st.lists(exps2, min_size=1, max_size=4).map(lambda g: MonomialIdeal(2, g))


def tower(first: int) -> list[Substitution]:
    """Leaf maps after blowing up the origin, then the origin of chart ``first``."""
    one = [X_CHART, Y_CHART]
    return [one[1 - first], one[first].followed_by(X_CHART), one[first].followed_by(Y_CHART)]


towers = st.integers(0, 1).map(tower)


@given(ideals2, ideals2, towers)
@settings(max_examples=200, deadline=None)
def test_pullback_is_multiplicative(I, J, leaves):
    for phi in leaves:
        assert (I * J).pullback(phi) == I.pullback(phi) * J.pullback(phi)


@given(st.lists(ideals2, min_size=3, max_size=3), ideals2, towers)
@settings(max_examples=200, deadline=None)
def test_galois_inclusions(upstairs, I, leaves):
    charts = [ChartIdeal(phi, J) for phi, J in zip(leaves, upstairs)]
    K = direct_image(charts)
    for c in charts:
        assert c.ideal.contains(K.pullback(c.map_to_base))
    assert direct_image([ChartIdeal(phi, I.pullback(phi)) for phi in leaves]).contains(I)
    # round trips stabilise after one step
    assert direct_image([ChartIdeal(c.map_to_base, K.pullback(c.map_to_base)) for c in charts]) == K
    pulled = [ChartIdeal(phi, I.pullback(phi)) for phi in leaves]
    K2 = direct_image(pulled)
    assert all(K2.pullback(c.map_to_base) == c.ideal for c in pulled)


def brute_direct_image(charts, box: int) -> MonomialIdeal:
    """Monomials x^i y^j whose substituted pullback is in every chart ideal."""
    images = [(c.ideal, x.substitute(c.map_to_base), y.substitute(c.map_to_base)) for c in charts]
    members = []
    for i, j in itertools.product(range(box + 1), repeat=2):
        ok = True
        for J, px, py in images:
            (exp, _), = (px**i * py**j).terms.items()
            ok &= J.member(exp)
        if ok:
            members.append((i, j))
    return MonomialIdeal(2, members)


@given(st.lists(ideals2, min_size=3, max_size=3), towers)
@settings(max_examples=40, deadline=None)
def test_direct_image_matches_brute_force(upstairs, leaves):
    charts = [ChartIdeal(phi, J) for phi, J in zip(leaves, upstairs)]
    # a box twice the scan bound leaves room for any missed generator
    box = 2 * (2 + max(J.max_degree() for J in upstairs))
    assert direct_image(charts) == brute_direct_image(charts, box)


@given(st.lists(ideals2, min_size=3, max_size=3), towers, st.integers(4, 12))
@settings(max_examples=60, deadline=None)
def test_staircase_agrees_with_box_scan(upstairs, leaves, B):
    prepared = [(ChartIdeal(phi, J).rows(), J) for phi, J in zip(leaves, upstairs)]

    def member(e):
        return all(J.member(_pulled(e, rows)) for rows, J in prepared)

    assert set(_staircase_2d(member, B)) == set(_box_scan(member, 2, B))


def test_box_scan_in_three_variables():
    u = MultiPoly.gens(3)
    chart = Substitution([u[0], u[0] * u[1], u[0] * u[2]])
    other = [Substitution([u[k] if i == k else u[k] * u[i] for i in range(3)]) for k in (1, 2)]
    charts = [ChartIdeal(chart, MonomialIdeal.principal((2, 0, 0)))]
    charts += [ChartIdeal(c, MonomialIdeal.principal(tuple(2 * (i == k) for i in range(3)))) for k, c in zip((1, 2), other)]
    assert direct_image(charts) == MonomialIdeal.maximal(3) ** 2


def test_homogeneous_direct_image():
    z1, z2, xi1, xi2 = MultiPoly.gens(4)
    J = HomogeneousIdealRep.build(2, 2, [xi1])
    assert J.degrees == (1,)
    assert J.padded(2) == [xi1 * xi1, xi1 * xi2]
    base = MultiPoly.gens(2)
    assert direct_image_homogeneous(J, base, degree=2) == [x * x, x * y]
    with pytest.raises(ValueError):
        HomogeneousIdealRep.build(2, 2, [xi1 + xi1 * xi2])
