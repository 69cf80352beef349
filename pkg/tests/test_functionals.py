import numpy as np
import pytest

from spectorus.errors import LambdaTooLarge, RecursionDepthExceeded
from spectorus.functionals import (
    Bump,
    JumpProbe,
    Observable,
    TrigPoly,
    build_h0,
    ell,
    functional_sequence,
    get_family,
    jump,
    rank_one_image,
    shift_identity_residuals,
    transfer_apply,
    verify_duality,
    xi_lambda,
)
from spectorus.maps import make_map
from spectorus.orbit import propagate


@pytest.fixture(scope="module")
def fc():
    gmap = make_map("slit_c")
    return gmap, propagate(gmap, K=14)


@pytest.fixture(scope="module")
def fb():
    gmap = make_map("cocycle_b", beta=np.e)
    return gmap, propagate(gmap, K=12)


def test_transfer_l1_is_one_for_full_branch_srb():
    gmap = make_map("doubling")
    rng = np.random.default_rng(0)
    y = np.column_stack([rng.random(40), rng.random(40)])
    vals = transfer_apply(gmap, lambda P: np.ones(np.atleast_2d(P).shape[0]), y)
    assert np.allclose(vals, 1.0, atol=1e-14)


def test_transfer_linearity(fc):
    gmap, _ = fc
    rng = np.random.default_rng(1)
    g1 = TrigPoly.random(rng, 3, 2)
    g2 = TrigPoly.random(rng, 3, 2)
    y = np.column_stack([rng.random(20), rng.random(20)])
    a, b = 1.7, -0.4
    combo = lambda P: a * g1(P) + b * g2(P)
    lhs = transfer_apply(gmap, combo, y)
    rhs = a * transfer_apply(gmap, g1, y) + b * transfer_apply(gmap, g2, y)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_transfer_preserves_lebesgue_integral(fc):
    gmap, _ = fc
    rng = np.random.default_rng(2)
    g = TrigPoly.random(rng, 2, 2, offset=1.0)
    n = 256
    grid = (np.arange(n) + 0.5) / n
    gx, gy = np.meshgrid(grid, grid)
    P = np.column_stack([gx.ravel(), gy.ravel()])
    int_h = float(np.mean(g(P)))
    int_lh = float(np.mean(transfer_apply(gmap, g, P)))
    assert abs(int_h - int_lh) < 1e-4


def test_depth_cap():
    gmap = make_map("doubling")
    with pytest.raises(RecursionDepthExceeded):
        Observable.iterated(gmap, lambda P: np.ones(len(np.atleast_2d(P))), 9)


def test_jump_smooth_and_step(fc):
    gmap, _ = fc
    rng = np.random.default_rng(3)
    h = Observable.smooth(gmap, TrigPoly.random(rng, 3, 2))
    X = np.column_stack([rng.random(25), rng.random(25)])
    V = np.column_stack([np.ones(25), np.ones(25)])
    J, err = jump(gmap, h, X, V)
    assert np.max(np.abs(J)) < 1e-8

    height = 1.625
    step = lambda P: height * (np.atleast_2d(P)[:, 0] > 0.3)
    X = np.column_stack([np.full(7, 0.3), np.linspace(0.1, 0.9, 7)])
    J, _ = jump(gmap, step, X, np.column_stack([np.ones(7), np.zeros(7)]))
    assert np.allclose(J, height, atol=1e-12)


def test_jump_of_pushed_bump_matches_weighted_value(fc):
    # the jump of the once-pushed bump across the first image curve equals
    # the weight times the bump value at the edge point
    gmap, orbit = fc
    g = Bump((gmap.x0, gmap.y0), gmap.eps / 4)
    h = Observable.iterated(gmap, g, 1)
    ys = np.linspace(gmap.y0 - gmap.eps / 8, gmap.y0 + gmap.eps / 8, 5)
    edge_pts = np.column_stack([np.full(5, gmap.x0), ys])
    img = gmap.evaluate(edge_pts, ctx=(0, +1))
    v1 = np.tile([1.0, 0.0], (5, 1))
    probe = JumpProbe(eps0=gmap.eps / 8)
    J, _ = jump(gmap, h, img, v1, probe)
    phi = gmap.weight_eval(edge_pts, ctx=(0, +1))
    assert np.max(np.abs(np.abs(J) - phi * g(edge_pts))) < 1e-7


def test_ell_annihilates_smooth_observables(fc):
    gmap, orbit = fc
    rng = np.random.default_rng(4)
    fam = get_family(gmap, 0)
    for _ in range(20):
        h = Observable.smooth(gmap, TrigPoly.random(rng, 3, 2))
        k = int(rng.integers(1, 7))
        r = ell(gmap, orbit, k, h, family=fam)
        assert abs(r.value) < 1e-8


def test_h0_normalization_and_decay(fc):
    gmap, orbit = fc
    peak = build_h0(gmap, orbit, k_check=6)
    r1 = ell(gmap, orbit, 1, peak.h0, family=get_family(gmap, 1),
             max_step=min(peak.radius / 8, 2e-3))
    assert r1.value == 1.0
    for k, v in peak.checks:
        assert v < 1e-6


def test_h0_scale_linearity(fc):
    gmap, orbit = fc
    peak = build_h0(gmap, orbit)
    g2 = Bump(peak.center, peak.radius)
    doubled = Observable(gmap, [(2.0, g2, 1)])
    fam = get_family(gmap, 1)
    step = min(peak.radius / 8, 2e-3)
    s2 = ell(gmap, orbit, 1, doubled, family=fam, max_step=step).value
    assert abs(s2 - 2.0 * peak.scale) < 1e-12 * max(1.0, abs(s2))


def test_duality_smooth_both_sides_vanish(fc):
    gmap, orbit = fc
    rng = np.random.default_rng(5)
    h = Observable.smooth(gmap, TrigPoly.random(rng, 2, 2))
    worst, rows = verify_duality(gmap, orbit, h, k_max=3)
    for _, lhs, rhs, _, _ in rows:
        assert abs(lhs) < 1e-8 and abs(rhs) < 1e-8


def test_duality_pushed_observables(fc, fb):
    rng = np.random.default_rng(6)
    for gmap, orbit in (fc, fb):
        g = TrigPoly.random(rng, 3, 2)
        worst, _ = verify_duality(gmap, orbit, Observable.iterated(gmap, g, 1), k_max=5)
        assert worst < 1e-6


def test_xi_lambda_values(fc):
    gmap, orbit = fc
    peak = build_h0(gmap, orbit)
    val, tail, _ = xi_lambda(gmap, orbit, 0.0, peak.h0, K_trunc=8)
    assert val == 0.0
    lam = 0.2
    val, tail, _ = xi_lambda(gmap, orbit, lam, peak.h0, K_trunc=8)
    assert abs(val - lam) < 1e-9
    with pytest.raises(LambdaTooLarge):
        xi_lambda(gmap, orbit, 0.49, peak.h0, K_trunc=8)


def test_rank_one_image(fc):
    gmap, orbit = fc
    peak = build_h0(gmap, orbit)
    rng = np.random.default_rng(7)
    # smooth h: the once-pushed image only jumps across the first image
    # curve, so the leading functional of Lh matches ell_1 content
    h = Observable.smooth(gmap, TrigPoly.random(rng, 2, 2))
    img, c = rank_one_image(gmap, orbit, h, peak)
    pts = np.column_stack([rng.random(10), rng.random(10)])
    assert np.allclose(img.eval(pts), c * peak.h0.eval(pts), rtol=0, atol=1e-12 * max(1, abs(c)))
    # element with vanishing leading functional maps to (numerically) zero
    h0_img, c0 = rank_one_image(gmap, orbit, peak.h0, peak)
    seq = functional_sequence(gmap, orbit, peak.h0, 4)
    assert abs(seq[0] - 1.0) < 1e-12


def test_shift_identity(fc):
    gmap, orbit = fc
    rng = np.random.default_rng(8)
    for k in (1, 2, 3):
        g = TrigPoly.random(rng, 3, 2)
        h = Observable.iterated(gmap, g, 1)
        res, used = shift_identity_residuals(gmap, orbit, k, h, n_probe=30)
        assert used >= 20
        assert np.max(res) < 1e-10


def test_functional_growth_rate_bounded(fc):
    # realized growth of the functionals on a fixed unit-sup test family
    # stays within 5% of the reciprocal lower-bound estimate
    gmap, orbit = fc
    from spectorus.bounds import lambda_bv

    lam = lambda_bv(orbit).estimate
    rng = np.random.default_rng(9)
    grid = np.column_stack([rng.random(256), rng.random(256)])
    k_max = 4  # functionals beyond the family's depth annihilate it
    sup_k = np.zeros(k_max)
    fam_members = 0
    for i in range(50):
        depth = int(rng.integers(1, 5))
        g = TrigPoly.random(rng, 2, 2)
        h = Observable.iterated(gmap, g, depth)
        sup = float(np.max(np.abs(h.eval(grid))))
        if sup < 1e-9:
            continue
        fam_members += 1
        vals = functional_sequence(gmap, orbit, h, k_max)
        sup_k = np.maximum(sup_k, np.abs(vals) / sup)
    assert fam_members >= 40
    ks = np.arange(1, k_max + 1)
    rate = np.exp(np.polyfit(ks, np.log(sup_k), 1)[0])
    assert rate <= (1.0 / lam) * 1.05
