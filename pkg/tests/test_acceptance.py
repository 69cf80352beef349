"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one pass/fail line so the whole gate reads off a plain
pytest -s run.  Shared orbits are module-scoped; everything is seeded.
"""

import numpy as np
import pytest

from spectorus.axioms import run_checks
from spectorus.bounds import bound_report, cylinder_complexity, lambda_bv, lambda_upper
from spectorus.functionals import (
    Observable,
    TrigPoly,
    build_h0,
    ell,
    functional_sequence,
    get_family,
    shift_identity_residuals,
    verify_duality,
)
from spectorus.maps import make_map
from spectorus.orbit import PropagateOptions, propagate
from spectorus.ulam import (
    apply_to_observable,
    build_ulam,
    cell_average_transfer,
    leading_spectrum,
)


def _report(name, passed, detail):
    print(f"\n[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    assert passed, f"{name}: {detail}"


@pytest.fixture(scope="module")
def fa_unit_orbit():
    gmap = make_map("affine_a", beta=np.e, weight="unit")
    return propagate(gmap, K=30, options=PropagateOptions(curve_depth=0))


@pytest.fixture(scope="module")
def fa_srb_orbit():
    gmap = make_map("affine_a", beta=np.e)
    return propagate(gmap, K=30, options=PropagateOptions(curve_depth=0))


@pytest.fixture(scope="module")
def fc_map():
    return make_map("slit_c")


@pytest.fixture(scope="module")
def fc_orbit(fc_map):
    return propagate(fc_map, K=30)


@pytest.fixture(scope="module")
def fc_peak(fc_map, fc_orbit):
    return build_h0(fc_map, fc_orbit, k_check=6)


def test_criterion_01_growth_rate_unit_weight(fa_unit_orbit):
    est = lambda_bv(fa_unit_orbit).estimate
    rel = abs(est - np.e) / np.e
    _report(
        "criterion 1 (affine growth rate, unit weight, K=30)",
        rel < 0.02,
        f"estimate {est:.6f} vs {np.e:.6f}, rel err {100 * rel:.3f}% (< 2%)",
    )


def test_criterion_02_growth_rate_srb_weight(fa_srb_orbit):
    est = lambda_bv(fa_srb_orbit).estimate
    rel_e = abs(est - 0.5) / 0.5
    gmap15 = make_map("affine_a", beta=1.5)
    orbit15 = propagate(gmap15, K=60, options=PropagateOptions(curve_depth=0))
    est15 = lambda_bv(orbit15).estimate
    rel15 = abs(est15 - 2.0 / 3.0) / (2.0 / 3.0)
    _report(
        "criterion 2 (affine growth rate, reciprocal-determinant weight)",
        rel_e < 0.02 and rel15 < 0.02,
        f"beta=e: {est:.6f} (err {100 * rel_e:.3f}%), beta=1.5: {est15:.6f} "
        f"(err {100 * rel15:.3f}%), both < 2%",
    )


def test_criterion_03_upper_matches_lower(fa_unit_orbit, fa_srb_orbit):
    gaps = []
    for orbit in (fa_unit_orbit, fa_srb_orbit):
        low = lambda_bv(orbit).estimate
        _, _, up, _ = lambda_upper(orbit.gmap, n_max=20)
        gaps.append(abs(low - up) / up)
    _report(
        "criterion 3 (affine upper/lower agreement, both weights)",
        max(gaps) < 0.03,
        f"relative gaps {100 * gaps[0]:.2f}% / {100 * gaps[1]:.2f}% (< 3%)",
    )


def test_criterion_04_slit_exact_half(fc_orbit):
    rep = bound_report(fc_orbit)
    err_bv = abs(rep.bv.estimate - 0.5)
    err_l2 = abs(rep.linf2.estimate - 0.5)
    _report(
        "criterion 4 (slit map bounds exactly one half)",
        err_bv < 1e-9 and err_l2 < 1e-9,
        f"|bv-0.5| = {err_bv:.2e}, |linf2-0.5| = {err_l2:.2e} (< 1e-9)",
    )


def test_criterion_05_cocycle_affine_base():
    gmap = make_map("cocycle_b", beta=2.5, q=2, p=0, amp=0.25)
    orbit = propagate(gmap, K=30)
    rep = bound_report(orbit)
    err_bv = abs(rep.bv.estimate - 0.4)
    err_l2 = abs(rep.linf2.estimate - 0.4)
    _report(
        "criterion 5 (cocycle over affine base, rate 0.4)",
        err_bv < 1e-6 and err_l2 < 1e-6,
        f"|bv-0.4| = {err_bv:.2e}, |linf2-0.4| = {err_l2:.2e} (< 1e-6)",
    )


def test_criterion_06_proper_discontinuity_suite(fc_map):
    rep_a = run_checks(make_map("affine_a", beta=np.e), K=12, J=25)
    rep_b = run_checks(make_map("cocycle_b", beta=np.e), K=12)
    rep_c = run_checks(fc_map, K=12)
    rep_d = run_checks(make_map("doubling"), K=4)
    ok = rep_a.passed and rep_b.passed and rep_c.passed and not rep_d.passed
    _report(
        "criterion 6 (axiom suite: three families pass, smooth control fails)",
        ok,
        f"affine {rep_a.passed}, cocycle {rep_b.passed}, slit {rep_c.passed}, "
        f"smooth-control a0 margin {rep_d.a0.margin:.1e} (fails: {not rep_d.passed})",
    )


def test_criterion_07_duality_recursion(fc_map, fc_orbit):
    rng = np.random.default_rng(2026)
    worst = {}
    fb = make_map("cocycle_b", beta=np.e)
    fb_orbit = propagate(fb, K=8)
    fa = make_map("affine_a", beta=np.e, weight="unit")
    fa_orbit = propagate(fa, K=7, options=PropagateOptions(curve_depth=7))
    for name, gmap, orbit in (
        ("slit", fc_map, fc_orbit),
        ("cocycle", fb, fb_orbit),
        ("affine", fa, fa_orbit),
    ):
        w = 0.0
        for _ in range(10):
            g = TrigPoly.random(rng, 3, 2)
            h = Observable.iterated(gmap, g, 1)
            wi, _ = verify_duality(gmap, orbit, h, k_max=5)
            w = max(w, wi)
        worst[name] = w
    ok = worst["slit"] < 1e-6 and worst["cocycle"] < 1e-6 and worst["affine"] < 1e-5
    _report(
        "criterion 7 (dual recursion, 10 random observables each)",
        ok,
        f"max residuals: slit {worst['slit']:.2e} (<1e-6), "
        f"cocycle {worst['cocycle']:.2e} (<1e-6), affine {worst['affine']:.2e} (<1e-5)",
    )


def test_criterion_08_normalized_element(fc_map, fc_orbit, fc_peak):
    r1c = ell(fc_map, fc_orbit, 1, fc_peak.h0, family=get_family(fc_map, 1))
    tail_c = max(v for _, v in fc_peak.checks)
    fa = make_map("affine_a", beta=np.e, weight="unit")
    fa_orbit = propagate(fa, K=7, options=PropagateOptions(curve_depth=7))
    peak_a = build_h0(fa, fa_orbit, k_check=6)
    r1a = ell(fa, fa_orbit, 1, peak_a.h0, family=get_family(fa, 1))
    tail_a = max(v for _, v in peak_a.checks)
    ok = r1c.value == 1.0 and r1a.value == 1.0 and tail_c < 1e-6 and tail_a < 1e-6
    _report(
        "criterion 8 (normalized element on slit and affine maps)",
        ok,
        f"first functional exactly 1: {r1c.value == 1.0}/{r1a.value == 1.0}; "
        f"tails {tail_c:.1e}, {tail_a:.1e} (< 1e-6 for k=2..6)",
    )


def test_criterion_09_resolvent_eigenrelation(fc_map, fc_orbit, fc_peak):
    rng = np.random.default_rng(99)
    lam_hat = lambda_bv(fc_orbit).estimate
    K_tr = 12
    ells_h0 = functional_sequence(fc_map, fc_orbit, fc_peak.h0, K_tr)
    worst = 0.0
    for i in range(10):
        g = TrigPoly.random(rng, 3, 2)
        h = Observable.iterated(fc_map, g, 1)
        e_h = functional_sequence(fc_map, fc_orbit, h, K_tr)
        e_Lh = functional_sequence(fc_map, fc_orbit, h.apply_L(), K_tr)
        lam = (0.5 * lam_hat) * np.cos(0.7 * i) * (1 if i % 2 else -1)
        ks = np.arange(1, K_tr + 1)
        xi = lambda seq: np.sum((lam**ks) * seq)
        resid = abs((xi(e_Lh) - e_Lh[0] * xi(ells_h0)) - lam * xi(e_h))
        worst = max(worst, resid)
    _report(
        "criterion 9 (rank-one corrected eigen-relation on the slit map)",
        worst < 1e-4,
        f"max residual {worst:.2e} over 10 observables, |lambda| <= {0.5 * lam_hat} (< 1e-4)",
    )


def test_criterion_10_shift_identity(fc_map, fc_orbit):
    rng = np.random.default_rng(5)
    worst = 0.0
    used_min = 10**9
    for k in (1, 2, 3, 4):
        g = TrigPoly.random(rng, 3, 2)
        h = Observable.iterated(fc_map, g, 1)
        res, used = shift_identity_residuals(fc_map, fc_orbit, k, h, n_probe=50)
        worst = max(worst, float(np.max(res)) if res.size else 0.0)
        used_min = min(used_min, used)
    _report(
        "criterion 10 (jump pushforward identity, 50 probes per level)",
        worst < 1e-5 and used_min >= 30,
        f"max residual {worst:.2e} (< 1e-5), min usable probes {used_min}",
    )


def test_criterion_11_cylinder_complexity():
    gmap = make_map("affine_a", beta=np.e)
    ns, mult, seq, _ = cylinder_complexity(gmap, n_max=8)
    non_inc = all(seq[i + 1] <= seq[i] + 1e-12 for i in range(1, 7))
    ok = non_inc and seq[7] < 0.15
    _report(
        "criterion 11 (affine cylinder complexity trend)",
        ok,
        f"multiplicities {mult.astype(int).tolist()}, (1/8)log at n=8: {seq[7]:.4f} "
        f"(< 0.15), non-increasing {non_inc}",
    )


def test_criterion_12_ulam_cross_check(fc_map):
    lead = {}
    for name, gmap in (
        ("affine", make_map("affine_a", beta=np.e)),
        ("cocycle", make_map("cocycle_b", beta=np.e)),
        ("slit", fc_map),
    ):
        ulam = build_ulam(gmap, N=64, samples_per_cell=16, seed=0)
        w, _ = leading_spectrum(ulam, count=3)
        lead[name] = abs(w[0])
    ulam = build_ulam(fc_map, N=128, samples_per_cell=64, seed=3)
    rng = np.random.default_rng(4)
    rels = []
    for _ in range(5):
        h = TrigPoly.random(rng, 2, 2, offset=2.0)
        mh = apply_to_observable(ulam, h)
        lh = cell_average_transfer(fc_map, h, 128)
        rels.append(float(np.linalg.norm(mh - lh) / np.linalg.norm(lh)))
    ok = all(abs(v - 1.0) < 1e-2 for v in lead.values()) and max(rels) < 0.05
    _report(
        "criterion 12 (Ulam cross-check)",
        ok,
        f"leading moduli {({k: round(v, 5) for k, v in lead.items()})}, "
        f"max consistency error {100 * max(rels):.2f}% (< 5%)",
    )


def test_criterion_13_infrastructure_property_suites():
    import subprocess
    import sys

    result = subprocess.run(
        [
            sys.executable, "-m", "pytest", "-q", "--no-header", "-p", "no:cacheprovider",
            "tests/test_torus.py::test_wrap_idempotent",
            "tests/test_torus.py::test_distance_metric_properties",
            "tests/test_torus.py::test_min_distance_below_all_sample_pairs",
            "tests/test_orbit.py::test_length_equals_jacobian_integral",
            "tests/test_maps.py::test_preimages_round_trip_and_bound",
            "tests/test_maps.py::test_preimage_completeness_against_grid_oracle",
        ],
        capture_output=True,
        text=True,
    )
    ok = result.returncode == 0
    tail = result.stdout.strip().splitlines()[-1] if result.stdout else ""
    _report(
        "criterion 13 (geometry/infrastructure property suites)",
        ok,
        tail,
    )
