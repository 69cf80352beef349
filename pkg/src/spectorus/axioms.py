"""Numerical verification of the proper-discontinuity axioms.

The four conditions checked, for the edge curve gamma and its forward
family gamma_k:

* a0 -- the map genuinely jumps across gamma (one-sided images differ);
* a1 -- the weight recursion for alpha is consistent wherever the map is
  many-to-one along the family (overlap spreads recorded in propagation);
* a2 -- gamma_k stays essentially off the first image of the whole
  discontinuity set: transversal point crossings are permitted (they carry
  no length), tangential contact is not;
* a3 -- preimages of gamma_{k+1} that lie on the truncated forward family
  of the discontinuity set coincide with gamma_k.

Exact measure-zero statements are not decidable from samples; every check
reports margins against tolerances plus how much of the object it could
actually examine (truncation depth, window accounting), so a pass is
always a pass relative to the stated resolution.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .orbit import PropagateOptions, propagate, prepare_base_curve
from .torus import EdgeGrid, PolyCurve, _edges_of, fr, point_curve_distance, torus_distance


@dataclass
class AxiomResult:
    name: str
    passed: bool
    margin: float
    detail: dict = field(default_factory=dict)


@dataclass
class DiscontinuityReport:
    map_name: str
    params: dict
    a0: AxiomResult
    a1: AxiomResult
    a2: AxiomResult
    a3: AxiomResult
    markov: str
    per_k_a2: list = field(default_factory=list)
    per_k_a3: list = field(default_factory=list)

    @property
    def passed(self):
        return self.a0.passed and self.a1.passed and self.a2.passed and self.a3.passed

    def to_text(self):
        buf = io.StringIO()
        buf.write(f"map = {self.map_name}\n")
        for k, v in self.params.items():
            buf.write(f"{k} = {v}\n")
        for r in (self.a0, self.a1, self.a2, self.a3):
            buf.write(f"[{r.name}] pass = {str(r.passed).lower()} margin = {fr(r.margin)}\n")
            for k, v in sorted(r.detail.items()):
                buf.write(f"[{r.name}] {k} = {v}\n")
        for row in self.per_k_a2:
            buf.write(
                "[a2] k = %d margin = %s contact_len = %s windows = %d "
                "max_window = %s pass = %s\n"
                % (
                    row["k"],
                    fr(row["margin"]),
                    fr(row["contact_len"]),
                    row["windows"],
                    fr(row["max_window"]),
                    str(row["pass"]).lower(),
                )
            )
        for row in self.per_k_a3:
            buf.write(
                "[a3] k = %d probes = %d kept = %d max_dist = %s pass = %s\n"
                % (row["k"], row["probes"], row["kept"], fr(row["max_dist"]), str(row["pass"]).lower())
            )
        buf.write(f"[markov] verdict = {self.markov}\n")
        buf.write(f"overall = {'pass' if self.passed else 'fail'}\n")
        return buf.getvalue()


# ---------------------------------------------------------------------------
# a0: genuine jump
# ---------------------------------------------------------------------------


def check_a0(gmap, gamma=None, tol_jump=1e-6, n=257):
    """Min over curve samples of the distance between the two one-sided
    images.  Fails (margin ~0) for maps continuous across the curve."""
    curve = gamma if gamma is not None else gmap.default_curve(n=n)
    margins = []
    for seg in curve.segments:
        comp = seg.comp if seg.comp >= 0 else 0
        plus = gmap.evaluate(seg.pts, ctx=(comp, +1))
        minus = gmap.evaluate(seg.pts, ctx=(comp, -1))
        margins.append(torus_distance(plus, minus))
    margin = float(np.min(np.concatenate(margins))) if margins else 0.0
    return AxiomResult("a0", margin > tol_jump, margin, {"tol": tol_jump})


# ---------------------------------------------------------------------------
# a1: weight recursion consistency
# ---------------------------------------------------------------------------


def check_a1(orbit, tol_alpha=1e-8):
    """Largest relative alpha disagreement across curve-overlap events."""
    spread = orbit.alpha_spread()
    return AxiomResult(
        "a1",
        spread < tol_alpha,
        spread,
        {"events": len(orbit.merge_events), "tol": tol_alpha},
    )


# ---------------------------------------------------------------------------
# a2: images avoid the first image of the discontinuity set
# ---------------------------------------------------------------------------


def gamma_one(gmap, n=257, options=None):
    """Gamma_1 = the image of both sides of every discontinuity component.

    Stored coarsely: the pieces are exact chords of the one-step images
    (straight for the map families here; the chord deviation bound covers
    the general case), so distance queries do not need a fine step.
    """
    from .orbit import _advance_curve, _gamma_edge_list

    opts = options or PropagateOptions(target_step=0.2)
    segs, tol = [], 0.0
    for comp in gmap.discontinuity():
        for side in (+1, -1):
            base = prepare_base_curve(gmap, comp.curve(n=n, side=side))
            img = _advance_curve(gmap, base, 0, opts, _gamma_edge_list(gmap), [])
            segs.extend(img.segments)
            tol = max(tol, img.chord_tol)
    return PolyCurve(segs, chord_tol=tol)


def _pair_contacts(curve, target, tol, chunk=6_000_000):
    """Near-contact accounting between two curves.

    For every edge pair closer than tol, the arc length of the curve edge
    inside the tol-tube of the target edge is ~ 2 tol / sin(angle), capped
    by the edge length (the parallel case); per-edge sums are clipped at
    the edge length so crossings straddling a target-edge joint are not
    double counted.  Consecutive flagged edges aggregate into windows.
    Returns (per_edge_within (Ea,), windows list of lengths,
    margin_parallel, margin_unflagged).
    """
    p0a, dla, seg_a, _ = _edges_of(curve)
    p0b, dlb, _, _ = _edges_of(target)
    Ea, Eb = p0a.shape[0], p0b.shape[0]
    if Ea == 0 or Eb == 0:
        return np.zeros(Ea), [], np.inf, np.inf
    la = np.linalg.norm(dla, axis=1)
    lb = np.linalg.norm(dlb, axis=1)
    ua = dla / np.where(la > 0, la, 1.0)[:, None]
    ub = dlb / np.where(lb > 0, lb, 1.0)[:, None]
    mida = p0a + 0.5 * dla
    midb = p0b + 0.5 * dlb
    per_edge = np.zeros(Ea)
    margin_par = np.inf
    margin_unflagged = np.inf
    rows = max(1, chunk // Eb)
    from .torus import _seg_seg_dist

    for lo in range(0, Ea, rows):
        hi = min(Ea, lo + rows)
        off = np.round(mida[lo:hi, None, :] - midb[None, :, :])
        d = _seg_seg_dist(
            p0a[lo:hi, None, :], dla[lo:hi, None, :], p0b[None, :, :] + off, dlb[None, :, :]
        )
        sin = np.abs(
            ua[lo:hi, None, 0] * ub[None, :, 1] - ua[lo:hi, None, 1] * ub[None, :, 0]
        )
        near = d < tol
        par = sin < 0.1
        if np.any(par & ~near):
            margin_par = min(margin_par, float(np.min(d[par & ~near])))
        if np.any(~near):
            margin_unflagged = min(margin_unflagged, float(np.min(d[~near])))
        if np.any(near):
            i, j = np.nonzero(near)
            s = sin[i, j]
            L = la[lo:hi][i]
            w = np.minimum(L, 2.0 * tol / np.maximum(s, 2.0 * tol / np.maximum(L, 1e-30)))
            np.add.at(per_edge, lo + i, w)
    per_edge = np.minimum(per_edge, la)
    # windows: maximal runs of consecutive flagged edges, reported as
    # (in-tube mass, arc length); tangential contact shows mass ~ arc,
    # transversal crossings (even dense ones) keep mass << arc
    windows = []
    flagged = per_edge > 0
    if np.any(flagged):
        idx = np.nonzero(flagged)[0]
        run_m, run_a = per_edge[idx[0]], la[idx[0]]
        prev = idx[0]
        for i in idx[1:]:
            if i == prev + 1 and seg_a[i] == seg_a[prev]:
                run_m += per_edge[i]
                run_a += la[i]
            else:
                windows.append((run_m, run_a))
                run_m, run_a = per_edge[i], la[i]
            prev = i
        windows.append((run_m, run_a))
    return per_edge, windows, margin_par, margin_unflagged


def _overlap_mass(windows):
    """Largest in-tube mass among runs that look tangential (mass above
    half the run's arc length); 0 when every run is crossing-like."""
    worst = 0.0
    for mass, arc in windows:
        if mass > 0.5 * arc:
            worst = max(worst, mass)
    return worst


def check_a2(gmap, orbit, K=None, tol_disjoint=1e-4, tol_len=1e-3, window_cap=None):
    """Per-k near-contact accounting of gamma_k against Gamma_1.

    Passes when total contact length stays below tol_len (as a fraction of
    the curve length once curves grow past unit length) and no single
    contact window exceeds window_cap (the tangential-overlap detector).
    """
    K = K or orbit.K
    g1 = gamma_one(gmap)
    cap = window_cap if window_cap is not None else max(100.0 * tol_disjoint, 1.5e-2)
    rows = []
    for k in range(2, K + 1):
        if not orbit.has_curve(k):
            rows.append(
                {"k": k, "margin": float("nan"), "contact_len": float("nan"),
                 "windows": 0, "max_window": float("nan"), "pass": True,
                 "untested": True}
            )
            continue
        ck = orbit.curve(k)
        per_edge, windows, margin_par, margin_unflagged = _pair_contacts(ck, g1, tol_disjoint)
        total = float(np.sum(per_edge))
        max_w = _overlap_mass(windows)
        margin = margin_par if np.isfinite(margin_par) else margin_unflagged
        # transversal crossings contribute ~2 tol len_a len_b of in-tube mass;
        # the budget admits twice that plus the flat allowance, while the
        # window cap catches any single tangential stretch
        allowed = tol_len * max(1.0, ck.length) + 4.0 * tol_disjoint * ck.length * g1.length
        ok = (total <= allowed) and (max_w <= cap)
        rows.append(
            {"k": k, "margin": margin, "contact_len": total, "windows": len(windows),
             "max_window": max_w, "pass": bool(ok)}
        )
    all_ok = all(r["pass"] for r in rows)
    worst = min((r["margin"] for r in rows if np.isfinite(r["margin"])), default=np.inf)
    return (
        AxiomResult(
            "a2", all_ok, worst,
            {"K": K, "tol": tol_disjoint, "window_cap": cap,
             "tested_k": sum(1 for r in rows if not r.get("untested"))},
        ),
        rows,
    )


# ---------------------------------------------------------------------------
# a3: preimage rigidity relative to the truncated forward family
# ---------------------------------------------------------------------------


def _side_orbits(gmap, K, J, options=None, main_orbit=None):
    """Materialized forward family of every discontinuity side.

    Returns a list of (level k, curve) pairs: level k holds F^k applied to
    a side of the discontinuity set, i.e. a piece of Gamma_k.  The side
    that seeded main_orbit is reused rather than re-propagated.
    """
    opts = options or PropagateOptions(target_step=2e-3, max_samples_per_curve=80_000)
    out = []
    base_keys = set()
    if main_orbit is not None:
        base_keys = {(seg.comp, seg.side) for seg in main_orbit.base.segments}
        for k in range(1, main_orbit.curve_depth + 1):
            if k <= J:
                out.append((k, main_orbit.curve(k)))
    for comp in gmap.discontinuity():
        for side in (+1, -1):
            if (comp.comp, side) in base_keys:
                continue
            try:
                orb = propagate(gmap, comp.curve(n=1025, side=side), K=min(J, K + 1), options=opts)
            except Exception:
                continue
            for k in range(1, orb.curve_depth + 1):
                if k <= J and orb.has_curve(k):
                    out.append((k, orb.curve(k)))
    return out


def check_a3(
    gmap,
    orbit,
    K=None,
    J=None,
    tol_disjoint=1e-4,
    keep_tol=1e-9,
    n_probe=96,
    probe_delta=5e-3,
    edge_cap=40_000,
    options=None,
):
    """Samples preimages of gamma_{k+1}, keeps those lying tangentially on
    the materialized truncation of the forward discontinuity family, and
    measures how far kept points sit from gamma_k.

    Tangential membership: the point plus two probes offset by +-delta
    along the pulled-back tangent must all sit inside the level's
    tolerance tube; transversal near-hits fail this.  Levels too dense to
    query at the tolerance (edge count above edge_cap) are excluded and
    reported, as is the requested-versus-materialized truncation depth.
    """
    K = K or orbit.K
    J = J or 2 * K
    fam = _side_orbits(gmap, K, J, options, main_orbit=orbit)
    grids = []
    for k_level, curve in fam:
        E = _edges_of(curve)[0].shape[0]
        if E == 0 or E > edge_cap:
            continue
        length = curve.length
        tol_j = min(keep_tol, 1.0 / (16.0 * max(length, 1.0)))
        grids.append((k_level, EdgeGrid(curve, cut=1e-3), tol_j, length))
    tested_levels = sorted({k for k, _, _, _ in grids})
    # kept membership uses a tube far below tol_disjoint: genuine members sit
    # at rounding distance, while a wide tube cannot tell tangentially-near
    # parallel neighbours apart once level families grow dense
    rows = []
    for k in range(1, K):
        if not (orbit.has_curve(k) and orbit.has_curve(k + 1)):
            rows.append({"k": k, "probes": 0, "kept": 0, "max_dist": float("nan"),
                         "pass": True, "untested": True})
            continue
        pts, tan, _, _, _, _, _, _ = orbit.level_arrays(k + 1)
        stride = max(1, pts.shape[0] // n_probe)
        sel = np.arange(0, pts.shape[0], stride)[:n_probe]
        ys, ty = pts[sel], tan[sel]
        X, TX = [], []
        for br in gmap.preimage_branches(ys):
            if not np.any(br.valid):
                continue
            xb = br.pts[br.valid]
            D = gmap.derivative(xb)
            tb = np.linalg.solve(D, ty[br.valid][..., None])[..., 0]
            nr = np.linalg.norm(tb, axis=1)
            tb = tb / np.where(nr > 0, nr, 1.0)[:, None]
            X.append(xb)
            TX.append(tb)
        if not X:
            rows.append({"k": k, "probes": int(sel.size), "kept": 0,
                         "max_dist": 0.0, "pass": True})
            continue
        X = np.concatenate(X)
        TX = np.concatenate(TX)
        trip = np.concatenate([X, X + probe_delta * TX, X - probe_delta * TX])
        trip = trip - np.floor(trip)
        m = X.shape[0]
        kept = np.zeros(m, dtype=bool)
        for _, grid, tol_j, _ in grids:
            d = grid.query(trip)
            inside = (d[:m] < tol_j) & (d[m : 2 * m] < tol_j) & (d[2 * m :] < tol_j)
            kept |= inside
        if np.any(kept):
            gk = orbit.curve(k)
            E_k = _edges_of(gk)[0].shape[0]
            if E_k <= edge_cap:
                dist = point_curve_distance(X[kept], gk)
            else:
                grid_k = EdgeGrid(gk, cut=max(4 * tol_disjoint, 2e-3))
                dist = grid_k.query(X[kept])
                dist = np.where(np.isfinite(dist), dist, grid_k.cut)
            max_d = float(np.max(dist)) if dist.size else 0.0
        else:
            max_d = 0.0
        ok = max_d <= tol_disjoint
        rows.append({"k": k, "probes": int(sel.size), "kept": int(np.count_nonzero(kept)),
                     "max_dist": max_d, "pass": bool(ok)})
    all_ok = all(r["pass"] for r in rows)
    worst = max((r["max_dist"] for r in rows if np.isfinite(r["max_dist"])), default=0.0)
    return (
        AxiomResult(
            "a3", all_ok, worst,
            {"J_requested": J, "levels_tested": ",".join(map(str, tested_levels)),
             "tol": tol_disjoint, "probe_delta": probe_delta},
        ),
        rows,
    )


# ---------------------------------------------------------------------------
# Markov heuristic
# ---------------------------------------------------------------------------


def _median_tangent(curve):
    tans = []
    for seg in curve.segments:
        tans.append(seg.tan)
    t = np.concatenate(tans)
    m = np.median(np.where(t[:, :1] < 0, -t, t), axis=0)
    n = np.linalg.norm(m)
    return m / n if n > 0 else np.array([0.0, 1.0])


def pair_disjointness(cj, ck, tol_disjoint=1e-4, tol_len=1e-3):
    """Measure-zero-intersection surrogate for one curve pair.

    The tolerance adapts to the pair: once the tol-tubes of the denser
    family tile the other curve (tube width above the family spacing along
    the crossing direction) a fixed tolerance says nothing, so it shrinks
    to keep the tube well under the spacing.  Returns a dict with the
    contact total, the largest window, the budget, and the verdict.
    """
    uj, uk = _median_tangent(cj), _median_tangent(ck)
    sin = abs(uj[0] * uk[1] - uj[1] * uk[0])
    tol = min(tol_disjoint, max(sin, 1e-3) / (64.0 * max(ck.length, 1.0)))
    tol = max(tol, 1e-9)
    per_edge, windows, margin_par, margin_unflagged = _pair_contacts(cj, ck, tol)
    total = float(np.sum(per_edge))
    max_w = _overlap_mass(windows)
    cap = max(100.0 * tol, 1.5e-2)
    allowed = tol_len * max(1.0, cj.length) + 4.0 * tol * cj.length * ck.length
    ok = (total <= allowed) and (max_w <= cap)
    return {
        "tol": tol, "total": total, "allowed": allowed, "max_window": max_w,
        "cap": cap, "pass": bool(ok),
        "margin": margin_par if np.isfinite(margin_par) else margin_unflagged,
    }


def markov_heuristic(gmap, orbit, K=None, tol_disjoint=1e-4):
    """Sufficient-condition check for non-Markov behaviour: the family's
    lengths stay bounded below (partial sums diverge) while distinct levels
    stay essentially disjoint.  Verdict is only ever 'consistent' or
    'inconclusive'; no Markov partition is ever constructed."""
    if not gmap.discontinuity():
        return "inconclusive"
    K = K or orbit.K
    lengths = np.array([orbit.set_length(k) for k in range(1, K + 1)])
    growing = bool(lengths[-1] >= 0.5 * lengths[0]) and bool(np.sum(lengths) > 2.0)
    depth = min(orbit.curve_depth, K, 8)
    while depth > 2 and orbit.curve(depth).n_samples > 12_000:
        depth -= 1
    disjoint = True
    for j in range(1, depth + 1):
        for k in range(j + 1, depth + 1):
            if not pair_disjointness(orbit.curve(j), orbit.curve(k), tol_disjoint)["pass"]:
                disjoint = False
    return "consistent-with-non-markov" if (growing and disjoint) else "inconclusive"


# ---------------------------------------------------------------------------
# full report
# ---------------------------------------------------------------------------


def run_checks(
    gmap,
    K=12,
    J=None,
    tol_jump=1e-6,
    tol_alpha=1e-8,
    tol_disjoint=1e-4,
    tol_len=1e-3,
    options=None,
    orbit=None,
):
    """Run a0..a3 plus the Markov heuristic; returns a DiscontinuityReport."""
    J = J or 2 * K
    params = {"K": K, "J": J, "tol_jump": tol_jump, "tol_alpha": tol_alpha,
              "tol_disjoint": tol_disjoint, "tol_len": tol_len}
    a0 = check_a0(gmap, tol_jump=tol_jump)
    if not gmap.discontinuity():
        empty = AxiomResult("a1", False, 0.0, {"reason": "no discontinuity set"})
        a2 = AxiomResult("a2", False, 0.0, {"reason": "no discontinuity set"})
        a3 = AxiomResult("a3", False, 0.0, {"reason": "no discontinuity set"})
        return DiscontinuityReport(
            gmap.name, params, a0, empty, a2, a3, "inconclusive"
        )
    if orbit is None:
        opts = options or PropagateOptions()
        opts.curve_depth = K
        orbit = propagate(gmap, K=K, options=opts)
    a1 = check_a1(orbit, tol_alpha=tol_alpha)
    a2, rows2 = check_a2(gmap, orbit, K=K, tol_disjoint=tol_disjoint, tol_len=tol_len)
    a3, rows3 = check_a3(gmap, orbit, K=K, J=J, tol_disjoint=tol_disjoint)
    verdict = markov_heuristic(gmap, orbit, K=K, tol_disjoint=tol_disjoint)
    return DiscontinuityReport(
        gmap.name, params, a0, a1, a2, a3, verdict, per_k_a2=rows2, per_k_a3=rows3
    )
