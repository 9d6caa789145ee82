"""Acceptance suite: one test per criterion, summarized at the end of the run."""

import json
import math
import random
import time

import numpy as np
from oracles import cusp_ideal_gens, fd_levi, fs_pullback_levi, log_sum_sq, rel_err

from saper_forge.blowup import resolve
from saper_forge.cli import main
from saper_forge.ideal import ChartIdeal, MonomialIdeal, direct_image
from saper_forge.metric import (
    F_local,
    MetricParams,
    PatchedPotential,
    BumpChart,
    BumpPartition,
    default_scale,
    min_l_scan,
    omega_saper,
    path_length,
    sample_points,
    saper_decomposition,
)
from saper_forge.poly import MultiPoly, Substitution, levi_log_sum_sq
from saper_forge.singlestep import (
    build_single_step,
    center_chart_ideals,
    example_v6_ladder,
    remark_v9_witness,
    verify_single_step,
)

x, y = MultiPoly.gens(2)
CUSP = cusp_ideal_gens()
SCALE = default_scale(CUSP)
PARAMS = MetricParams(1, "euclidean", SCALE)
CORPUS = ["y^2 - x^3", "y^2 - x^4", "y^3 - x^4", "y^2 - x^5", "x*y*(x - y)", "y^3 - x^5"]


def test_criterion_1_cusp_golden(tmp_path):
    start = time.perf_counter()
    tree_path, ideal_path = tmp_path / "tree.json", tmp_path / "ideal.json"
    assert main(["resolve", "--curve", "y^2 - x^3", "--out", str(tree_path)]) == 0
    assert main(["single-ideal", "--tree", str(tree_path), "--out", str(ideal_path)]) == 0
    elapsed = time.perf_counter() - start

    tree = json.loads(tree_path.read_text())["tree"]
    assert len(tree["steps"]) == 3
    factors = json.loads(ideal_path.read_text())["ideal"]["factors"]
    assert [f["ideal"] for f in factors] == ["(x, y)", "(x^2, y)", "(x^3, x^2*y, y^2)"]
    assert [f["twist"] for f in factors] == [{}, {"E1": 1}, {"E1": 2, "E2": 3}]
    assert elapsed < 1.0


def test_criterion_2_cusp_clauses(cusp_tree):
    start = time.perf_counter()
    ssi = build_single_step(cusp_tree)
    report = verify_single_step(ssi, cusp_tree)
    elapsed = time.perf_counter() - start
    assert report.ok
    assert list(report.clauses) == ["a", "b", "c", "d"]
    assert all(ok for ok, _ in report.clauses.values())
    assert ssi.product.support_is_origin()
    assert elapsed < 1.0


def test_criterion_3_cone_ladder():
    start = time.perf_counter()
    rows = [example_v6_ladder(d) for d in range(5)]
    elapsed = time.perf_counter() - start
    for d, row in enumerate(rows):
        assert row.expected_power == (2 if d < 2 else d)
        assert row.equal and all(row.per_chart)
    assert elapsed < 1.0


def test_criterion_4_no_distribution_without_twist():
    w = remark_v9_witness()
    assert w.direct_image_of_E == MonomialIdeal.maximal(3)
    # pi^-1 pi_*(J I_E) carries E^2 while J I_E^3 would carry E^3
    assert w.pullback_of_direct_image == (2, 2, 2)
    assert w.product_of_pullbacks == (3, 3, 3)
    assert w.distinct


def _random_ideal(rng: random.Random) -> MonomialIdeal:
    gens = [(rng.randint(0, 4), rng.randint(0, 4)) for _ in range(rng.randint(1, 4))]
    return MonomialIdeal(2, gens)


def _random_tower(rng: random.Random) -> list[Substitution]:
    xc, yc = Substitution([x, x * y]), Substitution([x * y, y])
    one = [xc, yc]
    first = rng.randint(0, 1)
    return [one[1 - first], one[first].followed_by(xc), one[first].followed_by(yc)]


def test_criterion_5_property_suite():
    start = time.perf_counter()
    rng = random.Random(0x5A9E12)
    for _ in range(200):
        I, J = _random_ideal(rng), _random_ideal(rng)
        leaves = _random_tower(rng)
        upstairs = [ChartIdeal(phi, _random_ideal(rng)) for phi in leaves]
        for phi in leaves:
            assert (I * J).pullback(phi) == I.pullback(phi) * J.pullback(phi)
        K = direct_image(upstairs)
        for c in upstairs:
            assert c.ideal.contains(K.pullback(c.map_to_base))
        pulled = [ChartIdeal(phi, I.pullback(phi)) for phi in leaves]
        K2 = direct_image(pulled)
        assert K2.contains(I)
        assert all(K2.pullback(c.map_to_base) == c.ideal for c in pulled)
        assert direct_image([ChartIdeal(c.map_to_base, K.pullback(c.map_to_base)) for c in upstairs]) == K

    # direct images of products split once the twist is certified
    for text in CORPUS:
        tree = resolve(MultiPoly.parse(text))
        ssi = build_single_step(tree)
        for k in range(1, tree.nsteps + 1):
            leaves = tree.leaves_after(k - 1)
            B = center_chart_ideals(tree, k, ssi.factors[k - 1].twist)
            for j in range(1, k + 1):
                base = ssi.factors[j - 1].base_ideal
                A = [ChartIdeal(c.map_to_base, base.pullback(c.map_to_base)) for c in leaves]
                AB = [ChartIdeal(a.map_to_base, a.ideal * b.ideal) for a, b in zip(A, B)]
                assert direct_image(AB) == direct_image(A) * direct_image(B)
    assert time.perf_counter() - start < 30.0


def test_criterion_6_numeric_forms():
    start = time.perf_counter()
    fd_checked = residual_checked = 0
    for z in sample_points(1000):
        h = levi_log_sum_sq(CUSP, z)
        assert h.hermitian_defect() <= 1e-12 * max(1.0, float(np.max(np.abs(h.matrix))))
        assert h.min_eig >= -1e-9
        assert rel_err(h.matrix, fs_pullback_levi(CUSP, z)) < 1e-8
        if F_local(CUSP, SCALE, z) > 1e-6:
            assert rel_err(h.matrix, fd_levi(log_sum_sq(CUSP, float(SCALE)), z)) < 1e-5
            fd_checked += 1
        dec = saper_decomposition(CUSP, PARAMS, z)
        if 1e-8 < dec.F < 0.9:
            assert dec.residual <= 1e-6
            residual_checked += 1
    assert fd_checked > 0 and residual_checked > 0
    assert time.perf_counter() - start < 30.0


def test_criterion_7_completeness_signatures():
    start = time.perf_counter()
    stops = (1e-2, 1e-4, 1e-8, 1e-16)
    saper = path_length("saper", CUSP, PARAMS, (1, 1), stops)
    tilde = path_length("tilde", CUSP, PARAMS, (1, 1), stops)
    assert all(b > a for a, b in zip(saper.cumulative, saper.cumulative[1:]))
    assert saper.increments[2] >= 0.5 * saper.increments[1]
    assert saper.diverging()
    assert tilde.increments[-1] < 1e-3 * tilde.total
    assert max(saper.refinement_gaps + tilde.refinement_gaps) <= 0.05
    assert time.perf_counter() - start < 30.0


def test_criterion_8_min_l_scan():
    # a single chart needs no correction; the patched potential is the regression constant
    assert min_l_scan(CUSP, params=PARAMS) == 1
    part = BumpPartition([BumpChart((0, 0), 0.5, 1.0), BumpChart((0, 0), 0.5, 1.0, exterior=True)])
    pot = PatchedPotential([CUSP, [MultiPoly.const(1, 2)]], part, SCALE)
    l = min_l_scan(pot, params=PARAMS)
    assert math.isfinite(l) and l == 40
    pts = sample_points(1000)
    assert min(omega_saper(pot, PARAMS.with_l(l + 1), z).min_eig for z in pts) > 0


def test_criterion_9_corpus_generalization():
    start = time.perf_counter()
    for text in ("y^2 - x^4", "y^3 - x^4"):
        tree = resolve(MultiPoly.parse(text))
        report = verify_single_step(build_single_step(tree), tree)
        assert report.ok and all(ok for ok, _ in report.clauses.values())
    assert time.perf_counter() - start < 5.0
