import numpy as np
import pytest

from spectorus.axioms import (
    check_a0,
    check_a1,
    check_a2,
    check_a3,
    gamma_one,
    markov_heuristic,
    pair_disjointness,
    run_checks,
)
from spectorus.maps import make_map
from spectorus.orbit import PropagateOptions, propagate


@pytest.fixture(scope="module")
def fc():
    gmap = make_map("slit_c")
    return gmap, propagate(gmap, K=12)


@pytest.fixture(scope="module")
def fb():
    gmap = make_map("cocycle_b", beta=np.e)
    return gmap, propagate(gmap, K=12)


@pytest.fixture(scope="module")
def fa():
    gmap = make_map("affine_a", beta=np.e)
    return gmap, propagate(gmap, K=8, options=PropagateOptions(curve_depth=8))


def test_a0_values(fa, fc, fb):
    frac_beta = np.e - 2.0
    assert abs(check_a0(fa[0]).margin - min(frac_beta, 1 - frac_beta)) < 1e-9
    eps = fc[0].eps
    assert abs(check_a0(fc[0]).margin - 2 * eps) < 1e-12
    assert check_a0(fb[0]).margin > 0.28


def test_a0_fails_for_smooth_control_map():
    res = check_a0(make_map("doubling"))
    assert not res.passed and res.margin < 1e-12


def test_a1_constant_alpha_maps(fc, fb):
    assert check_a1(fc[1]).passed and check_a1(fc[1]).margin == 0.0
    assert check_a1(fb[1]).passed and check_a1(fb[1]).margin == 0.0


def test_a1_vacuous_for_injective_family(fa):
    res = check_a1(fa[1])
    assert res.passed and res.detail["events"] == 0


def test_a2_slit_margins_match_orbit_gaps(fc):
    gmap, orbit = fc
    res, rows = check_a2(gmap, orbit, K=10)
    assert res.passed
    a = gmap.slit_orbit(12)
    for row in rows:
        k = row["k"]
        expect = min(abs(a[k] - a[1]), 1 - abs(a[k] - a[1]), a[k], 1 - a[k])
        assert row["margin"] <= expect + 1e-6
        assert row["margin"] > 1e-4


def test_a2_fails_on_coincident_curves(fc):
    gmap, orbit = fc
    res = pair_disjointness(orbit.curve(3), orbit.curve(3).copy())
    assert not res["pass"]
    assert res["max_window"] > 0.1


def test_a3_slit_identity_structure(fc):
    gmap, orbit = fc
    res, rows = check_a3(gmap, orbit, K=8)
    assert res.passed
    for row in rows:
        assert row["kept"] > 0
        assert row["max_dist"] < 1e-10


def test_a3_cocycle(fb):
    gmap, orbit = fb
    res, rows = check_a3(gmap, orbit, K=8)
    assert res.passed
    assert all(r["kept"] > 0 for r in rows)


def test_a3_affine_small_depth(fa):
    gmap, orbit = fa
    res, rows = check_a3(gmap, orbit, K=6, J=12)
    assert res.passed
    assert all(r["max_dist"] < 1e-10 for r in rows)


def test_markov_verdicts(fa, fc):
    assert markov_heuristic(fa[0], fa[1], K=8) == "consistent-with-non-markov"
    assert markov_heuristic(fc[0], fc[1], K=12) == "consistent-with-non-markov"
    doub = make_map("doubling")
    orbit = propagate(doub, K=4)
    assert markov_heuristic(doub, orbit, K=4) == "inconclusive"


def test_family_pairwise_disjointness(fa, fc):
    # consequence of the axioms: distinct levels intersect in at most points
    for gmap, orbit in (fa, fc):
        depth = min(orbit.curve_depth, 6)
        for j in range(1, depth + 1):
            for k in range(j + 1, depth + 1):
                assert pair_disjointness(orbit.curve(j), orbit.curve(k))["pass"]


def test_gamma_one_structure(fc):
    g1 = gamma_one(fc[0])
    xs = np.unique(np.round(g1.all_points()[:, 0], 9))
    a1 = fc[0].slit_orbit(1)[1]
    # vertical pieces at the two one-sided images of the slit edge
    assert any(abs(x - a1) < 1e-9 for x in xs)
    assert any(abs(x - 0.0) < 1e-9 for x in xs)


def test_report_determinism(fc):
    gmap, orbit = fc
    r1 = run_checks(gmap, K=6, orbit=orbit)
    r2 = run_checks(gmap, K=6, orbit=orbit)
    assert r1.to_text() == r2.to_text()
    assert "overall = pass" in r1.to_text()


def test_report_smooth_map_shape():
    rep = run_checks(make_map("doubling"), K=4)
    assert not rep.passed
    text = rep.to_text()
    assert "[a0] pass = false" in text
    assert "verdict = inconclusive" in text
