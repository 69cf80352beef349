import numpy as np
import pytest

from spectorus.bounds import (
    BoundSequence,
    _sequence,
    bound_report,
    cylinder_complexity,
    cylinder_multiplicity,
    lambda_bv,
    lambda_linf,
    lambda_upper,
)
from spectorus.errors import SpectorusError
from spectorus.maps import make_map
from spectorus.orbit import PropagateOptions, propagate


def beta_tilde(beta, k):
    return 0.5 * sum((beta / 2.0) ** l for l in range(k))


def anorm(beta, k):
    return 2.0**k * np.hypot(beta_tilde(beta, k), 1.0)


@pytest.fixture(scope="module")
def fa_unit():
    gmap = make_map("affine_a", beta=np.e, weight="unit")
    return propagate(gmap, K=30, options=PropagateOptions(curve_depth=0))


@pytest.fixture(scope="module")
def fa_srb():
    gmap = make_map("affine_a", beta=np.e)
    return propagate(gmap, K=30, options=PropagateOptions(curve_depth=0))


def test_windowed_min_on_synthetic_sequence():
    ks = np.arange(1, 21)
    raw = 2.0**ks * (1.0 + 1.0 / ks)
    seq = _sequence("t", ks, raw, (10, 20))
    assert abs(seq.estimate - np.min((raw[9:] ** (1.0 / ks[9:])))) < 1e-14
    assert abs(seq.trend - np.polyfit(ks[9:], np.log(raw[9:]), 1)[0]) < 1e-12


def test_roots_match_closed_form(fa_unit):
    seq = lambda_bv(fa_unit)
    for i, k in enumerate(seq.k.astype(int)):
        expect = anorm(np.e, k) ** (1.0 / k)
        assert abs(seq.root[i] - expect) / expect < 1e-12


def test_shallow_orbit_rejected():
    gmap = make_map("slit_c")
    orbit = propagate(gmap, K=5, options=PropagateOptions(curve_depth=0))
    with pytest.raises(SpectorusError):
        lambda_bv(orbit)


def test_linf_max_is_exact_max(fa_srb):
    s1, s2, linf, _ = lambda_linf(fa_srb)
    assert linf == max(s1.estimate, s2.estimate)


def test_window_robustness():
    # moving the liminf window inward changes the estimates by under 1%
    for fam, kw in [("affine_a", dict(beta=np.e, weight="unit")), ("slit_c", {})]:
        gmap = make_map(fam, **kw)
        orbit = propagate(gmap, K=30, options=PropagateOptions(curve_depth=0 if fam == "affine_a" else None))
        a = lambda_bv(orbit, window_frac=0.5).estimate
        b = lambda_bv(orbit, window_frac=2.0 / 3.0).estimate
        assert abs(a - b) / a < 0.01


def test_sandwich_against_upper(fa_unit, fa_srb):
    for orbit in (fa_unit, fa_srb):
        low = lambda_bv(orbit).estimate
        _, _, up, _ = lambda_upper(orbit.gmap, n_max=20)
        assert low <= up * 1.02


def test_upper_bound_plugin_doubling():
    gmap = make_map("doubling", weight="unit")
    _, seq, up, h_m = lambda_upper(gmap, n_max=10)
    assert abs(up - 2.0) < 1e-9
    assert h_m == 0.0
    assert np.allclose(seq, 2.0)


def test_upper_bound_srb_doubling():
    gmap = make_map("doubling")
    _, _, up, _ = lambda_upper(gmap, n_max=10)
    assert abs(up - 0.5) < 1e-9


def test_multiplicity_trivial_maps():
    ident = make_map("identity")
    _, mult, _, h_m = cylinder_complexity(ident, n_max=4)
    assert np.all(mult == 1.0) and h_m == 0.0
    doub = make_map("doubling")
    _, mult, _, h_m = cylinder_complexity(doub, n_max=6)
    assert np.all(mult == 1.0) and h_m == 0.0


def test_multiplicity_two_along_the_jump():
    gmap = make_map("affine_a", beta=np.e)
    comp = gmap.discontinuity()[0]
    t = ((np.arange(200) + 0.382) / 200)[:, None]
    probes = np.asarray(comp.p0) * (1 - t) + np.asarray(comp.p1) * t
    m1 = cylinder_multiplicity(gmap, probes, 1)
    assert np.max(m1) <= 4 and np.median(m1) == 2


def test_cocycle_bound_matches_base_derivative():
    gmap = make_map("cocycle_b", beta=2.5, q=2, p=0, amp=0.25)
    orbit = propagate(gmap, K=20, options=PropagateOptions(curve_depth=None))
    rep = bound_report(orbit)
    assert abs(rep.bv.estimate - 0.4) < 1e-9
    assert abs(rep.linf2.estimate - 0.4) < 1e-9


def test_neutral_fibre_skew_product_bound():
    # neutral second coordinate: estimates sit at the reciprocal of the
    # base expansion rate
    gmap = make_map("cocycle_b", beta=2.5, q=1, p=0, amp=0.25)
    orbit = propagate(gmap, K=20)
    rep = bound_report(orbit)
    lam_inv = 1.0 / 2.5
    assert rep.bv.estimate >= lam_inv - 1e-9
    assert abs(rep.bv.estimate - lam_inv) < 1e-6
    assert abs(rep.linf.estimate if isinstance(rep.linf, BoundSequence) else rep.linf - lam_inv) < 1e-6


def test_report_csv_and_summary(fa_unit):
    rep = bound_report(fa_unit)
    csv = rep.to_csv()
    assert csv.splitlines()[0].startswith("k,raw_bv,root_bv")
    assert "np.float64" not in csv
    assert "lambda_bv = " in rep.summary()
