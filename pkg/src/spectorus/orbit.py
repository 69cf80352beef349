"""Forward propagation of a discontinuity-edge curve.

Builds the family gamma_1..gamma_K (images of the side-labelled edge curve),
transporting along the way: tangents, the transversal direction used by the
jump functionals, the per-sample weight and curve-stretch products, and the
recursion coefficient alpha.

Two parallel representations are kept:

* the skeleton: pointwise forward orbits of a fixed sample set of the base
  curve, index-matched across levels (provenance preserved), bounded memory
  at any depth K.  All growth-rate infima are taken here.
* materialized curves: chart-clean polylines split at torus wraps and at
  crossings of the discontinuity set, re-sampled under a budget, with the
  transported quantities carried per sample.  Needed by the axiom checks
  and by the quadrature functionals; materialization stops automatically
  when the exponential length growth exhausts the sample budget.

When the map is many-to-one along the curve, overlapping image pieces are
compared (the weight-recursion consistency check) and then merged by
interval union, so stored curve lengths are set lengths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import A1Violation, ParallelTransportError, SampleBudgetExceeded
from .torus import (
    PolyCurve,
    Segment,
    chop_lifted_path,
    flat_arc_length,
    flat_tangents,
    fr,
    torus_delta,
    within_mask,
    wrap,
)

_CARRY = ("v", "phip", "jacp", "alpha")


@dataclass
class PropagateOptions:
    target_step: float = 1.5e-3
    chart_step: float = 0.33
    max_samples_per_curve: int = 900_000
    refine_cap: int = 8_000_000
    n_skeleton: int = 384
    curve_depth: int | None = None  # None: auto;  0: skeleton only
    merge_tol: float = 1e-9
    parallel_tol: float = 1e-12


# ---------------------------------------------------------------------------
# flat curve arrays: (lift, data, seg_of) with cached views on the PolyCurve
# ---------------------------------------------------------------------------


def _flatten(curve):
    flat = getattr(curve, "_flat", None)
    if flat is not None:
        return flat
    lifts, datas, ids = [], {k: [] for k in _CARRY}, []
    for i, seg in enumerate(curve.segments):
        if seg.n == 0:
            continue
        lifts.append(seg.lifted())
        for k in _CARRY:
            ids_arr = seg.data[k]
            datas[k].append(np.asarray(ids_arr))
        ids.append(np.full(seg.n, i, dtype=np.int64))
    if not lifts:
        return np.zeros((0, 2)), {k: np.zeros(0) for k in _CARRY}, np.zeros(0, np.int64)
    lift = np.concatenate(lifts)
    data = {k: np.concatenate(v) for k, v in datas.items()}
    seg_of = np.concatenate(ids)
    return lift, data, seg_of


_within = within_mask
_global_s = flat_arc_length
_global_tangents = flat_tangents


def _build_curve(lift, data, seg_of):
    """Assemble a (lazily segmented) PolyCurve from flat arrays."""
    n = lift.shape[0]
    _, starts = _global_s(lift, seg_of)
    bounds = np.concatenate([starts, [n]])
    if n > 1:
        x = lift[:, 0] - np.floor(lift[:, 0])
        d = np.linalg.norm(np.diff(lift, axis=0), axis=1)
        w = _within(seg_of)
        adx = np.abs(np.diff(lift[:, 0]))
        adx[~w] = 0.0
        adx = np.concatenate([adx, [0.0]])
        dlen = np.concatenate([np.where(w, d, 0.0), [0.0]])
        seg_maxdx = np.maximum.reduceat(adx, bounds[:-1])
        seg_len = np.add.reduceat(dlen, bounds[:-1])
        seg_xspan = np.maximum.reduceat(x, bounds[:-1]) - np.minimum.reduceat(x, bounds[:-1])
        vertical = (seg_maxdx < 1e-11) & (seg_xspan < 1e-9) & (seg_len > 1e-9)
        any_vertical = bool(np.any(vertical))
    else:
        vertical = np.zeros(max(len(bounds) - 1, 0), dtype=bool)
        any_vertical = False
    curve = PolyCurve.from_flat(
        lift, data, seg_of, chord_tol=_chord_tol_flat(lift, seg_of), vertical=vertical
    )
    curve.any_vertical = any_vertical
    return curve


def _chord_tol_flat(lift, seg_of):
    if lift.shape[0] < 3:
        return 0.0
    ok = _within(seg_of)[1:] & _within(seg_of)[:-1]
    if not np.any(ok):
        return 0.0
    mid = 0.5 * (lift[:-2] + lift[2:])
    dev = np.linalg.norm(lift[1:-1] - mid, axis=1)
    worst = float(np.max(np.where(ok, dev, 0.0)))
    return worst if worst > 1e-13 else 0.0


# ---------------------------------------------------------------------------
# vectorized ragged expansion / reduction
# ---------------------------------------------------------------------------


def _merge_inserts(n, arrays, ins_edge, ins_t, ins_arrays, seg_break=None):
    """Interleave inserted samples (at parameter ins_t on edge ins_edge)
    with the original n samples, ordered by (edge, t).  Returns the merged
    arrays plus a boolean mask marking segment starts among merged samples.

    seg_break: per-insert array; 1 where the insert opens a new segment
    (the sample is duplicated by the caller supplying two inserts).
    """
    m = ins_edge.shape[0]
    key_i = np.concatenate([np.arange(n, dtype=np.int64), ins_edge])
    key_t = np.concatenate([np.zeros(n), ins_t])
    key_b = np.concatenate([np.zeros(n, np.int64), seg_break if seg_break is not None else np.zeros(m, np.int64)])
    order = np.lexsort((key_b, key_t, key_i))
    out = [np.concatenate([a, b])[order] for a, b in zip(arrays, ins_arrays)]
    break_mask = key_b[order] == 1
    return out, break_mask


def _refine_flat(lift, data, seg_of, step):
    """Insert chord samples so within-segment edges are <= step."""
    n = lift.shape[0]
    if n < 2:
        return lift, data, seg_of
    d = np.diff(lift, axis=0)
    elen = np.linalg.norm(d, axis=1)
    w = _within(seg_of)
    counts = np.where(w, np.maximum(1, np.ceil(elen / step).astype(np.int64)), 1)
    extra = counts - 1
    total = int(extra.sum())
    if total == 0:
        return lift, data, seg_of
    edge_of = np.repeat(np.arange(n - 1), extra)
    offs = np.concatenate([[0], np.cumsum(extra)])[:-1]
    t = (np.arange(total) - np.repeat(offs, extra) + 1.0) / counts[edge_of]
    ins_lift = lift[edge_of] + t[:, None] * d[edge_of]
    arrays = [lift, seg_of.astype(np.int64)]
    ins = [ins_lift, seg_of[edge_of].astype(np.int64)]
    keys = list(data.keys())
    for k in keys:
        v = np.asarray(data[k])
        dv = np.diff(v, axis=0)
        ins_v = v[edge_of] + (t[:, None] if v.ndim > 1 else t) * dv[edge_of]
        arrays.append(v)
        ins.append(ins_v)
    merged, _ = _merge_inserts(n, arrays, edge_of, t, ins)
    new_lift, new_seg = merged[0], merged[1]
    new_data = {k: merged[2 + i] for i, k in enumerate(keys)}
    return new_lift, new_data, new_seg


def _wrap_chop_flat(lift, data, seg_of):
    """Split at unit-cell boundary crossings (image steps < 1 assumed).

    Crossing points are inserted twice: once closing the previous piece,
    once opening the next; segment ids are rebuilt from break marks.
    """
    n = lift.shape[0]
    if n < 2:
        return lift, data, seg_of
    d = np.diff(lift, axis=0)
    w = _within(seg_of)
    ins_edge, ins_t = [], []
    for ax in (0, 1):
        a, b = lift[:-1, ax], lift[1:, ax]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        # with per-axis steps < 1 the only candidate boundary is floor(hi)
        k = np.floor(hi)
        valid = w & (k > lo) & (k < hi)
        idx = np.nonzero(valid)[0]
        t = (k[idx] - a[idx]) / (b[idx] - a[idx])
        keep = (t > 1e-14) & (t < 1.0 - 1e-14)
        ins_edge.append(idx[keep])
        ins_t.append(t[keep])
    if not any(e.size for e in ins_edge):
        return lift, data, seg_of
    ins_edge = np.concatenate(ins_edge)
    ins_t = np.concatenate(ins_t)
    # duplicate each crossing: closer (break=0) then opener (break=1)
    e2 = np.repeat(ins_edge, 2)
    t2 = np.repeat(ins_t, 2)
    br = np.tile(np.array([0, 1], np.int64), ins_edge.shape[0])
    ins_lift = lift[e2] + t2[:, None] * d[e2]
    keys = list(data.keys())
    arrays = [lift]
    ins = [ins_lift]
    for k in keys:
        v = np.asarray(data[k])
        dv = np.diff(v, axis=0)
        ins_v = v[e2] + (t2[:, None] if v.ndim > 1 else t2) * dv[e2]
        arrays.append(v)
        ins.append(ins_v)
    merged, break_mask = _merge_inserts(n, arrays, e2, t2, ins, seg_break=br)
    new_lift = merged[0]
    new_data = {k: merged[1 + i] for i, k in enumerate(keys)}
    # rebuild segment ids: original boundaries plus break marks
    old_first = np.zeros(n, dtype=bool)
    old_first[0] = True
    old_first[1:] = ~w
    first_flags = np.concatenate([old_first, np.zeros(e2.shape[0], dtype=bool)])
    key_i = np.concatenate([np.arange(n, dtype=np.int64), e2])
    key_t = np.concatenate([np.zeros(n), t2])
    key_b = np.concatenate([np.zeros(n, np.int64), br])
    order = np.lexsort((key_b, key_t, key_i))
    starts = first_flags[order] | break_mask
    new_seg = np.cumsum(starts) - 1
    return new_lift, new_data, new_seg.astype(np.int64)


def _dedupe_flat(lift, data, seg_of, tol=1e-7):
    """Drop samples forming degenerate (sub-tol) within-segment edges;
    tangent directions on such edges are dominated by rounding noise
    (~1e-16/len), and removing the sample moves the polyline by < tol."""
    n = lift.shape[0]
    if n < 3:
        return lift, data, seg_of
    d = np.linalg.norm(np.diff(lift, axis=0), axis=1)
    w = _within(seg_of)
    tiny = w & (d < tol)
    if not np.any(tiny):
        return lift, data, seg_of
    first = np.ones(n, dtype=bool)
    first[1:] = ~w
    last = np.ones(n, dtype=bool)
    last[:-1] = ~w
    drop = np.zeros(n, dtype=bool)
    idx = np.nonzero(tiny)[0]
    for i in idx:
        if not first[i]:
            drop[i] = True
        elif not last[i + 1]:
            drop[i + 1] = True
    keep = ~drop
    return lift[keep], {k: np.asarray(v)[keep] for k, v in data.items()}, seg_of[keep]


def _decimate_flat(lift, data, seg_of, step):
    """Per-segment arc-length decimation keeping first/last samples."""
    lift, data, seg_of = _dedupe_flat(lift, data, seg_of)
    n = lift.shape[0]
    if n < 3:
        return lift, data, seg_of
    s, _ = _global_s(lift, seg_of)
    w = _within(seg_of)
    first = np.ones(n, dtype=bool)
    first[1:] = ~w
    last = np.ones(n, dtype=bool)
    last[:-1] = ~w
    bucket = np.floor(s / step).astype(np.int64)
    fresh = np.ones(n, dtype=bool)
    fresh[1:] = (bucket[1:] != bucket[:-1]) | ~w
    keep = first | last | fresh
    return lift[keep], {k: np.asarray(v)[keep] for k, v in data.items()}, seg_of[keep]


# ---------------------------------------------------------------------------
# overlap merging (vertical families)
# ---------------------------------------------------------------------------


def _circle_union(intervals):
    """Union of [lo, lo+len] arcs on the circle as disjoint arcs.

    Returns [(0.0, 1.0)] when the arcs cover the whole circle.
    """
    norm = []
    for lo, hi in intervals:
        L = hi - lo
        if L >= 1.0 - 1e-12:
            return [(0.0, 1.0)]
        lo = lo % 1.0
        if lo + L <= 1.0 + 1e-15:
            norm.append([lo, lo + L])
        else:
            norm.append([lo, 1.0])
            norm.append([0.0, lo + L - 1.0])
    norm.sort()
    merged = [norm[0]]
    for lo, hi in norm[1:]:
        if lo <= merged[-1][1] + 1e-12:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    if len(merged) > 1 and merged[0][0] <= 1e-12 and merged[-1][1] >= 1.0 - 1e-12:
        first = merged.pop(0)
        merged[-1][1] = 1.0 + first[1]
    if merged and merged[0][1] - merged[0][0] >= 1.0 - 1e-12 and len(merged) == 1:
        return [(0.0, 1.0)]
    return [tuple(iv) for iv in merged]


def _vertical_interval(seg):
    lift = seg.lifted()
    y0, y1 = float(lift[0, 1]), float(lift[-1, 1])
    lo, hi = (y0, y1) if y1 >= y0 else (y1, y0)
    return lo, hi


def _alpha_on(seg, ys):
    """Interpolated alpha at circle positions ys (segment assumed vertical)."""
    lift = seg.lifted()[:, 1]
    al = np.asarray(seg.data["alpha"])
    if lift[-1] < lift[0]:
        lift, al = lift[::-1], al[::-1]
    lo = lift[0]
    yy = lo + ((np.asarray(ys, dtype=float) - lo) % 1.0)
    yy = np.where(yy > lift[-1], yy - 1.0, yy)
    return np.interp(np.clip(yy, lift[0], lift[-1]), lift, al)


def _carry_on(seg, key, ys):
    lift = seg.lifted()[:, 1]
    v = np.asarray(seg.data[key])
    if lift[-1] < lift[0]:
        lift, v = lift[::-1], v[::-1]
    lo = lift[0]
    yy = lo + ((np.asarray(ys, dtype=float) - lo) % 1.0)
    yy = np.where(yy > lift[-1], yy - 1.0, yy)
    yy = np.clip(yy, lift[0], lift[-1])
    if v.ndim == 1:
        return np.interp(yy, lift, v)
    return np.column_stack([np.interp(yy, lift, v[:, j]) for j in range(v.shape[1])])


def _covers_arc(lo, hi, y):
    y = lo + ((y - lo) % 1.0)
    return y <= hi + 1e-12


def _merge_vertical_overlaps(segments, level_k, merge_tol, step, events):
    """Returns (segments, changed)."""
    vertical, out = [], []
    changed = False
    for seg in segments:
        flag = getattr(seg, "vertical", None)
        if flag is None:
            flag = (
                seg.n >= 2
                and np.max(np.abs(seg.tan[:, 0])) < 1e-9
                and np.ptp(seg.pts[:, 0]) < merge_tol
            )
        if flag:
            vertical.append(seg)
        else:
            out.append(seg)
    groups = {}
    for seg in vertical:
        key = round(float(seg.pts[0, 0]) / max(merge_tol, 1e-12))
        groups.setdefault(key, []).append(seg)
    for segs in groups.values():
        ivs = [_vertical_interval(s) for s in segs]
        overlap = False
        for seg, iv in zip(segs, ivs):
            spread = _self_overlap_spread(seg, iv)
            if spread is not None:
                events.append((level_k, spread))
                overlap = True
        for i in range(len(segs)):
            for j in range(i + 1, len(segs)):
                mid = _overlap_mid(ivs[i], ivs[j])
                if mid is None:
                    continue
                overlap = True
                a1 = float(_alpha_on(segs[i], [mid])[0])
                a2 = float(_alpha_on(segs[j], [mid])[0])
                events.append((level_k, abs(a1 - a2) / max(abs(a1), abs(a2), 1.0)))
        if not overlap:
            out.extend(segs)
            continue
        changed = True
        x = segs[0].pts[0, 0]
        for lo, hi in _circle_union(ivs):
            n = max(2, int(np.ceil((hi - lo) / step)) + 1)
            ys = np.linspace(lo, hi, n)
            src = next(
                (s for s, iv in zip(segs, ivs) if _covers_arc(iv[0], iv[1], 0.5 * (lo + hi))),
                segs[0],
            )
            data = {
                "v": _carry_on(src, "v", ys),
                "phip": _carry_on(src, "phip", ys),
                "jacp": _carry_on(src, "jacp", ys),
                "alpha": _alpha_on(src, ys),
            }
            lift = np.column_stack([np.full(n, x), ys])
            out.extend(chop_lifted_path(lift, data=data))
    return out, changed


def _overlap_mid(a, b):
    for sh in (-1.0, 0.0, 1.0):
        lo = max(a[0], b[0] + sh)
        hi = min(a[1], b[1] + sh)
        if hi - lo > 1e-12:
            return 0.5 * (lo + hi)
    return None


def _self_overlap_spread(seg, iv):
    """Alpha disagreement where a single piece wraps past itself."""
    if iv[1] - iv[0] <= 1.0 + 1e-12:
        return None
    lift = seg.lifted()[:, 1]
    al = np.asarray(seg.data["alpha"])
    if lift[-1] < lift[0]:
        lift, al = lift[::-1], al[::-1]
    y = lift[0] + 0.5 * (lift[-1] - lift[0] - 1.0) + 0.25
    a1 = float(np.interp(y, lift, al))
    a2 = float(np.interp(y + 1.0, lift, al))
    return abs(a1 - a2) / max(abs(a1), abs(a2), 1.0)


# ---------------------------------------------------------------------------
# one map step on sample batches
# ---------------------------------------------------------------------------


def _apply_map(gmap, pts, tan, data, ctx, level_k):
    D = gmap.derivative(pts, ctx=ctx)
    phi = gmap.weight_eval(pts, ctx=ctx)
    Dt = np.einsum("nij,nj->ni", D, tan)
    jacfac = np.linalg.norm(Dt, axis=1)
    out = {
        "v": np.einsum("nij,nj->ni", D, data["v"]),
        "phip": data["phip"] * phi,
        "jacp": data["jacp"] * jacfac,
    }
    if level_k == 0:
        out["alpha"] = np.ones(pts.shape[0])
    else:
        out["alpha"] = data["alpha"] / (phi * jacfac)
    img = gmap.evaluate(pts, ctx=ctx)
    return img, Dt, out, (phi, jacfac)


def _branch_points(lift, seg_of):
    """Evaluation coordinates: each sample is placed in the lattice cell of
    its interior neighbour, so chop points that sit exactly on a branch
    boundary are evaluated through the one-sided extension of their own
    piece (e.g. x = 1.0 rather than the wrapped 0.0)."""
    n = lift.shape[0]
    if n == 0:
        return lift
    if n == 1:
        return wrap(lift)
    w = _within(seg_of)
    has_next = np.zeros(n, dtype=bool)
    has_next[:-1] = w
    idx = np.arange(n)
    nbr = np.where(has_next, np.minimum(idx + 1, n - 1), np.maximum(idx - 1, 0))
    mid = 0.5 * (lift + lift[nbr])
    return lift - np.floor(mid)


def _lift_with_resets(img, seg_of):
    d = torus_delta(img[1:], img[:-1])
    d[~_within(seg_of)] = 0.0
    raw = np.empty_like(img)
    raw[0] = 0.0
    np.cumsum(d, axis=0, out=raw[1:])
    starts = np.concatenate([[0], np.nonzero(~_within(seg_of))[0] + 1])
    base = np.zeros_like(img)
    base[starts] = img[starts] - raw[starts]
    mask = np.zeros(img.shape[0], dtype=bool)
    mask[starts] = True
    idx = np.maximum.accumulate(np.where(mask, np.arange(img.shape[0]), -1))
    return raw + base[idx]


# ---------------------------------------------------------------------------
# gamma crossings of the input curve (before mapping)
# ---------------------------------------------------------------------------


def _gamma_edge_list(gmap):
    edges = []
    for comp in gmap.discontinuity():
        c = comp.curve(n=9)
        for seg in c.segments:
            lift = seg.lifted()
            for i in range(seg.n - 1):
                edges.append((lift[i].copy(), (lift[i + 1] - lift[i]).copy()))
    return edges


def _gamma_cut_flat(lift, data, seg_of, gamma_edges):
    """Split the flat curve where it crosses a discontinuity edge."""
    n = lift.shape[0]
    if n < 2 or not gamma_edges:
        return lift, data, seg_of, 0
    d = np.diff(lift, axis=0)
    w = _within(seg_of)
    mid = lift[:-1] + 0.5 * d
    cut_edge, cut_t = [], []
    for p0, dg in gamma_edges:
        off = np.round(mid - (p0 + 0.5 * dg))
        b0 = p0 + off
        r = b0 - lift[:-1]
        den = d[:, 0] * (-dg[1]) + d[:, 1] * dg[0]
        ok = w & (np.abs(den) > 1e-15)
        den_s = np.where(ok, den, 1.0)
        t = (r[:, 0] * (-dg[1]) + r[:, 1] * dg[0]) / den_s
        u = (d[:, 0] * r[:, 1] - d[:, 1] * r[:, 0]) / den_s
        hit = ok & (t > 1e-12) & (t < 1.0 - 1e-12) & (u >= -1e-12) & (u <= 1.0 + 1e-12)
        idx = np.nonzero(hit)[0]
        cut_edge.append(idx)
        cut_t.append(t[idx])
    cut_edge = np.concatenate(cut_edge) if cut_edge else np.zeros(0, np.int64)
    cut_t = np.concatenate(cut_t) if cut_t else np.zeros(0)
    if cut_edge.size == 0:
        return lift, data, seg_of, 0
    e2 = np.repeat(cut_edge, 2)
    t2 = np.repeat(cut_t, 2)
    br = np.tile(np.array([0, 1], np.int64), cut_edge.shape[0])
    ins_lift = lift[e2] + t2[:, None] * d[e2]
    keys = list(data.keys())
    arrays = [lift]
    ins = [ins_lift]
    for k in keys:
        v = np.asarray(data[k])
        dv = np.diff(v, axis=0)
        arrays.append(v)
        ins.append(v[e2] + (t2[:, None] if v.ndim > 1 else t2) * dv[e2])
    merged, break_mask = _merge_inserts(n, arrays, e2, t2, ins, seg_break=br)
    new_lift = merged[0]
    new_data = {k: merged[1 + i] for i, k in enumerate(keys)}
    old_first = np.zeros(n, dtype=bool)
    old_first[0] = True
    old_first[1:] = ~w
    key_i = np.concatenate([np.arange(n, dtype=np.int64), e2])
    key_t = np.concatenate([np.zeros(n), t2])
    key_b = np.concatenate([np.zeros(n, np.int64), br])
    order = np.lexsort((key_b, key_t, key_i))
    first_flags = np.concatenate([old_first, np.zeros(e2.shape[0], dtype=bool)])
    starts = first_flags[order] | break_mask
    new_seg = (np.cumsum(starts) - 1).astype(np.int64)
    # nudge the duplicated cut samples into their own piece so the branch
    # choice at the discontinuity is unambiguous when mapping
    cut_pos = np.nonzero(np.concatenate([np.zeros(n, bool), np.ones(e2.shape[0], bool)])[order])[0]
    N = new_lift.shape[0]
    for p in cut_pos:
        if p + 1 < N and new_seg[p + 1] == new_seg[p]:
            step_v, sign = new_lift[p + 1] - new_lift[p], 1.0  # opener
        elif p > 0 and new_seg[p - 1] == new_seg[p]:
            step_v, sign = new_lift[p] - new_lift[p - 1], -1.0  # closer
        else:
            continue
        nrm = np.linalg.norm(step_v)
        if nrm > 0:
            new_lift[p] = new_lift[p] + sign * 1e-12 * step_v / nrm
    return new_lift, new_data, new_seg, cut_edge.size


# ---------------------------------------------------------------------------
# the propagation driver
# ---------------------------------------------------------------------------


def _advance_curve(gmap, curve, level_k, opts, gamma_edges, events):
    lift, data, seg_of = _flatten(curve)
    if level_k > 0:
        lift, data, seg_of, _ = _gamma_cut_flat(lift, data, seg_of, gamma_edges)
    in_step = opts.chart_step / max(gmap.lip_bound, 1.0)
    lift, data, seg_of = _refine_flat(lift, data, seg_of, in_step)
    if lift.shape[0] > opts.refine_cap:
        raise SampleBudgetExceeded(
            f"level {level_k + 1}: refinement needs {lift.shape[0]} samples"
        )
    pts = _branch_points(lift, seg_of)
    tan = _global_tangents(lift, seg_of)
    if level_k == 0:
        img = np.empty_like(pts)
        out = {
            "v": np.empty((pts.shape[0], 2)),
            "phip": np.empty(pts.shape[0]),
            "jacp": np.empty(pts.shape[0]),
            "alpha": np.empty(pts.shape[0]),
        }
        for seg_idx, seg in enumerate(curve.segments):
            sel = seg_of == seg_idx
            if not np.any(sel):
                continue
            ctx = (seg.comp, seg.side) if (seg.comp >= 0 and seg.side != 0) else None
            im, _, od, _ = _apply_map(
                gmap, pts[sel], tan[sel], {k: data[k][sel] for k in _CARRY}, ctx, level_k
            )
            img[sel] = im
            for k in _CARRY:
                out[k][sel] = od[k]
    else:
        img, _, out, _ = _apply_map(gmap, pts, tan, data, None, level_k)
    img_lift = _lift_with_resets(img, seg_of)
    lift2, data2, seg2 = _wrap_chop_flat(img_lift, out, seg_of)
    if lift2.shape[0] > 1:
        total_len = float(
            np.sum(np.where(_within(seg2), np.linalg.norm(np.diff(lift2, axis=0), axis=1), 0.0))
        )
    else:
        total_len = 0.0
    step_out = max(opts.target_step, total_len / max(opts.max_samples_per_curve, 4))
    step_out = min(step_out, 0.2)
    lift2, data2, seg2 = _decimate_flat(lift2, data2, seg2, step_out)
    curve_out = _build_curve(lift2, data2, seg2)
    if getattr(curve_out, "any_vertical", True):
        merged, changed = _merge_vertical_overlaps(
            curve_out.segments, level_k + 1, opts.merge_tol, step_out, events
        )
        if changed:
            curve_out = PolyCurve(merged, chord_tol=curve_out.chord_tol)
    if curve_out.n_samples > 2 * opts.max_samples_per_curve:
        raise SampleBudgetExceeded(
            f"level {level_k + 1}: {curve_out.n_samples} stored samples exceed the cap"
        )
    return curve_out


@dataclass
class CurveOrbit:
    gmap: object
    K: int
    base: PolyCurve
    skel: dict
    levels: list
    curve_depth: int
    merge_events: list = field(default_factory=list)
    transversality: np.ndarray | None = None
    options: PropagateOptions = field(default_factory=PropagateOptions)

    def curve(self, k):
        """gamma_k as a PolyCurve (k = 0 returns the base edge curve)."""
        c = self.levels[k]
        if c is None:
            raise SampleBudgetExceeded(
                f"gamma_{k} was not materialized (curve depth {self.curve_depth})"
            )
        return c

    def has_curve(self, k):
        return 0 <= k < len(self.levels) and self.levels[k] is not None

    def set_length(self, k):
        """Arc length of gamma_k as a point set.

        Falls back to the cover length (stretch-product quadrature over the
        base curve) when the curve is not materialized; the two agree while
        the map stays injective along the curve family.
        """
        if self.has_curve(k):
            return self.levels[k].length
        return float(np.mean(self.skel["jacp"][k])) * self.base.length

    def alpha_spread(self):
        return max((s for _, s in self.merge_events), default=0.0)

    def level_arrays(self, k):
        """Concatenated per-sample arrays of gamma_k:
        (pts, tan, trapezoid weights, v, phip, jacp, alpha, seg ids)."""
        c = self.curve(k)
        pts, tan, v, phip, jacp, alpha, wts, sid = [], [], [], [], [], [], [], []
        for i, seg in enumerate(c.segments):
            pts.append(seg.pts)
            tan.append(seg.tan)
            v.append(np.asarray(seg.data["v"]))
            phip.append(np.asarray(seg.data["phip"]))
            jacp.append(np.asarray(seg.data["jacp"]))
            alpha.append(np.asarray(seg.data["alpha"]))
            wts.append(_trapezoid_weights(seg.s))
            sid.append(np.full(seg.n, i))
        if not pts:
            z = np.zeros(0)
            return np.zeros((0, 2)), np.zeros((0, 2)), z, np.zeros((0, 2)), z, z, z, z.astype(int)
        return (
            np.concatenate(pts),
            np.concatenate(tan),
            np.concatenate(wts),
            np.concatenate(v),
            np.concatenate(phip),
            np.concatenate(jacp),
            np.concatenate(alpha),
            np.concatenate(sid).astype(int),
        )


def _trapezoid_weights(s):
    n = s.shape[0]
    w = np.zeros(n)
    if n < 2:
        return w
    d = np.diff(s)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def _seed_segment_data(seg, normal):
    n = seg.n
    seg.data.setdefault("v", np.broadcast_to(np.asarray(normal, float), (n, 2)).copy())
    seg.data.setdefault("phip", np.ones(n))
    seg.data.setdefault("jacp", np.ones(n))
    seg.data.setdefault("alpha", np.full(n, np.nan))


def prepare_base_curve(gmap, curve=None, n=None):
    """Attach side normals and unit carry arrays to the edge curve."""
    if curve is None:
        curve = gmap.default_curve(**({"n": n} if n else {}))
    curve = curve.copy()
    comps = {c.comp: c for c in gmap.discontinuity()}
    for seg in curve.segments:
        comp = comps.get(seg.comp)
        if comp is not None and seg.side != 0:
            normal = seg.side * np.asarray(comp.plus_normal, float)
        else:
            t = seg.tan[0] if seg.n else np.array([0.0, 1.0])
            normal = np.array([-t[1], t[0]])
        _seed_segment_data(seg, normal)
    return curve


def _unit(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    n = np.where(n == 0.0, 1.0, n)
    return v / n


def _skeleton_samples(base, n0):
    """Arc-uniform sample set over the base curve with per-segment context."""
    total = base.length
    pts, tan, v, ctxs = [], [], [], []
    count = 0
    for seg in base.segments:
        if seg.n < 2:
            continue
        n_seg = max(2, int(round(n0 * seg.length / max(total, 1e-12))))
        t = (np.arange(n_seg) + 0.5) / n_seg * seg.length
        lift = seg.lifted()
        x = np.interp(t, seg.s, lift[:, 0])
        y = np.interp(t, seg.s, lift[:, 1])
        pts.append(wrap(np.column_stack([x, y])))
        tx = np.interp(t, seg.s, seg.tan[:, 0])
        ty = np.interp(t, seg.s, seg.tan[:, 1])
        tan.append(_unit(np.column_stack([tx, ty])))
        v.append(np.broadcast_to(np.asarray(seg.data["v"])[0], (n_seg, 2)).copy())
        ctx = (seg.comp, seg.side) if (seg.comp >= 0 and seg.side != 0) else None
        ctxs.append((ctx, slice(count, count + n_seg)))
        count += n_seg
    return np.concatenate(pts), np.concatenate(tan), np.concatenate(v), ctxs


def propagate(gmap, gamma=None, K=12, options=None):
    """Propagate the edge curve K times; returns the assembled CurveOrbit.

    gamma defaults to the map's canonical proper-discontinuity candidate.
    Curves are materialized to depth K+1 or until the sample budget stops
    them (skeleton always runs to K+1).
    """
    opts = options or PropagateOptions()
    base = prepare_base_curve(gmap, gamma)
    events = []

    n0 = opts.n_skeleton
    pts0, tan0, v0, ctxs = _skeleton_samples(base, n0)
    K1 = K + 1
    nS = pts0.shape[0]
    skel = {
        "pts": np.empty((K1 + 1, nS, 2)),
        "tan": np.empty((K1 + 1, nS, 2)),
        "v": np.empty((K1 + 1, nS, 2)),
        "phip": np.ones((K1 + 1, nS)),
        "jacp": np.ones((K1 + 1, nS)),
        "alpha": np.full((K1 + 1, nS), np.nan),
        "phi_step": np.ones((K1 + 1, nS)),
        "jac_step": np.ones((K1 + 1, nS)),
    }
    skel["pts"][0] = pts0
    skel["tan"][0] = tan0
    skel["v"][0] = v0
    trans = np.ones(K1 + 1)
    for k in range(K1):
        groups = ctxs if k == 0 else [(None, slice(None))]
        for ctx, idx in groups:
            cur = {c: skel[c][k][idx] for c in ("v", "phip", "jacp", "alpha")}
            img, Dt, out, (phi, jacfac) = _apply_map(
                gmap, skel["pts"][k][idx], skel["tan"][k][idx], cur, ctx, k
            )
            skel["pts"][k + 1][idx] = img
            skel["tan"][k + 1][idx] = _unit(Dt)
            for c in ("v", "phip", "jacp", "alpha"):
                skel[c][k + 1][idx] = out[c]
            skel["phi_step"][k][idx] = phi
            skel["jac_step"][k][idx] = jacfac
        vk = _unit(skel["v"][k + 1])
        tk = skel["tan"][k + 1]
        trans[k + 1] = 1.0 - float(np.max(np.abs(np.sum(vk * tk, axis=1))))

    gamma_edges = _gamma_edge_list(gmap)
    levels = [base] + [None] * K1
    depth_target = K1 if opts.curve_depth is None else min(opts.curve_depth, K1)
    cur = base
    curve_depth = 0
    for k in range(depth_target):
        if opts.curve_depth is None:
            est_refined = cur.length / (opts.chart_step / max(gmap.lip_bound, 1.0))
            est_store = cur.length * gmap.lip_bound / 0.2
            if est_refined > opts.refine_cap or est_store > 2 * opts.max_samples_per_curve:
                break
        try:
            cur = _advance_curve(gmap, cur, k, opts, gamma_edges, events)
        except SampleBudgetExceeded:
            if opts.curve_depth is not None:
                raise
            break
        levels[k + 1] = cur
        curve_depth = k + 1
    if opts.curve_depth is not None and curve_depth < depth_target:
        raise SampleBudgetExceeded(
            f"requested curve depth {opts.curve_depth}, reached {curve_depth}"
        )

    return CurveOrbit(
        gmap=gmap,
        K=K,
        base=base,
        skel=skel,
        levels=levels,
        curve_depth=curve_depth,
        merge_events=events,
        transversality=trans,
        options=opts,
    )


# ---------------------------------------------------------------------------
# operation surface: transported normals, curve jacobian, alpha recursion
# ---------------------------------------------------------------------------


def transport_normal(gmap, orbit, k):
    """Transversal directions on gamma_k (skeleton): D F^k applied to the
    base normals; raises when the direction degenerates onto the tangent."""
    if not (0 <= k < orbit.skel["v"].shape[0]):
        raise ValueError("level out of range")
    vk = orbit.skel["v"][k]
    tk = orbit.skel["tan"][k]
    margin = 1.0 - float(np.max(np.abs(np.sum(_unit(vk) * tk, axis=1))))
    if margin < orbit.options.parallel_tol:
        raise ParallelTransportError(f"margin {margin:.3e} at level {k}")
    return vk


def curve_jacobian(gmap, curve, ctx_from_segments=True):
    """Arc-length stretch |DF t| per sample, concatenated across segments."""
    out = []
    for seg in curve.segments:
        ctx = (
            (seg.comp, seg.side)
            if (ctx_from_segments and seg.comp >= 0 and seg.side != 0)
            else None
        )
        D = gmap.derivative(seg.pts, ctx=ctx)
        Dt = np.einsum("nij,nj->ni", D, seg.tan)
        out.append(np.linalg.norm(Dt, axis=1))
    return np.concatenate(out) if out else np.zeros(0)


def compute_alpha(gmap, orbit, tol_alpha=1e-8):
    """Re-run the weight recursion on the skeleton and audit stored values.

    Returns the (K+2, n0) alpha array (levels k >= 1 meaningful).  Raises
    A1Violation if recomputation disagrees with storage bit-for-bit, or if
    any overlap event recorded during propagation exceeded tol_alpha.
    """
    skel = orbit.skel
    K1 = skel["alpha"].shape[0] - 1
    alpha = np.full_like(skel["alpha"], np.nan)
    alpha[1] = 1.0
    for k in range(1, K1):
        step = skel["phi_step"][k] * skel["jac_step"][k]
        alpha[k + 1] = alpha[k] / step
        stored = skel["alpha"][k + 1]
        if not np.array_equal(alpha[k + 1], stored):
            bad = int(np.argmax(alpha[k + 1] != stored))
            raise A1Violation(k + 1, bad, float(np.max(np.abs(alpha[k + 1] - stored))))
    for k, spread in orbit.merge_events:
        if spread > tol_alpha:
            raise A1Violation(k, -1, spread)
    return alpha


def orbit_to_csv(orbit, k):
    """Per-level export: (s, x, y, tx, ty, vx, vy, jac_prod, phi_prod, alpha)."""
    c = orbit.curve(k)
    lines = ["s,x,y,tx,ty,vx,vy,jac_prod,phi_prod,alpha"]
    s_off = 0.0
    for seg in c.segments:
        v = np.asarray(seg.data["v"])
        jacp = np.asarray(seg.data["jacp"])
        phip = np.asarray(seg.data["phip"])
        alpha = np.asarray(seg.data["alpha"])
        for j in range(seg.n):
            lines.append(
                f"{fr(s_off + seg.s[j])},{fr(seg.pts[j, 0])},{fr(seg.pts[j, 1])},"
                f"{fr(seg.tan[j, 0])},{fr(seg.tan[j, 1])},"
                f"{fr(v[j, 0])},{fr(v[j, 1])},"
                f"{fr(jacp[j])},{fr(phip[j])},{fr(alpha[j])}"
            )
        s_off += seg.length
    return "\n".join(lines) + "\n"
