"""Flat-torus arithmetic and sampled-curve geometry.

Points live on T^2 = R^2/Z^2 with coordinates reduced to [0,1).  Curves are
piecewise-C^1 polylines stored as lists of chart segments: within a segment
consecutive samples are torus-close (< 0.5 per axis), so local geometry is
Euclidean after recentering.  Distance queries work on polyline edges, which
is exact for the straight-line curve families produced by the map iterations
here; a measured chord-deviation bound covers the general case.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteInput, SampleBudgetExceeded, UnrefinedCurve

MAX_CHART_STEP = 0.5


def frac(u):
    """u mod 1 in [0,1), exact for boundary values: rounding in u - floor(u)
    can otherwise yield 1.0 for tiny negative u."""
    out = u - np.floor(u)
    return np.where(out >= 1.0, out - 1.0, out)


def wrap(p):
    """Reduce coordinates modulo 1 into [0,1).  Idempotent.

    Accepts a length-2 vector or an (n,2) array.
    """
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise NonFiniteInput("coordinates must be finite")
    return frac(p)


def torus_delta(p, q):
    """Shortest representative of p - q, componentwise in [-0.5, 0.5]."""
    d = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    return d - np.round(d)


def torus_distance(p, q):
    """Geodesic distance on the flat torus (max value sqrt(2)/2)."""
    d = torus_delta(p, q)
    return np.sqrt(np.sum(d * d, axis=-1))


@dataclass
class Segment:
    """One chart piece of a curve: consecutive samples torus-close.

    pts   : (n,2) wrapped positions
    s     : (n,) cumulative arc length from the segment start
    tan   : (n,2) unit tangents
    side  : branch-side hint (+1/-1) when the segment lies on a map
            discontinuity component, else 0
    comp  : discontinuity component id the segment lies on, else -1
    data  : optional per-sample arrays carried alongside the geometry
    """

    pts: np.ndarray
    s: np.ndarray
    tan: np.ndarray
    side: int = 0
    comp: int = -1
    data: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.pts.shape[0]

    @property
    def length(self):
        return float(self.s[-1]) if self.n else 0.0

    def lifted(self):
        """Continuous lift of the samples, anchored at the first point."""
        d = torus_delta(self.pts[1:], self.pts[:-1])
        out = np.empty_like(self.pts)
        out[0] = self.pts[0]
        np.cumsum(d, axis=0, out=out[1:])
        out[1:] += self.pts[0]
        return out

    def max_step(self):
        if self.n < 2:
            return 0.0
        return float(np.max(torus_distance(self.pts[1:], self.pts[:-1])))


def segment_from_lift(lift, side=0, comp=-1, data=None):
    """Build a Segment from continuous (lifted) sample positions."""
    lift = np.asarray(lift, dtype=float)
    d = np.diff(lift, axis=0)
    step = np.linalg.norm(d, axis=1)
    s = np.concatenate([[0.0], np.cumsum(step)])
    tan = _tangents_from_lift(lift)
    return Segment(pts=wrap(lift), s=s, tan=tan, side=side, comp=comp, data=dict(data or {}))


def _tangents_from_lift(lift):
    n = lift.shape[0]
    tan = np.zeros_like(lift)
    if n == 1:
        return tan
    d = np.diff(lift, axis=0)
    tan[0] = d[0]
    tan[-1] = d[-1]
    if n > 2:
        tan[1:-1] = lift[2:] - lift[:-2]
    norms = np.linalg.norm(tan, axis=1)
    norms[norms == 0.0] = 1.0
    return tan / norms[:, None]


def within_mask(seg_of):
    """Mask over consecutive sample pairs lying inside one segment."""
    return seg_of[1:] == seg_of[:-1]


def flat_arc_length(lift, seg_of):
    """Per-sample arc length from the segment start, plus segment starts."""
    d = np.linalg.norm(np.diff(lift, axis=0), axis=1)
    d = np.where(within_mask(seg_of), d, 0.0)
    s = np.concatenate([[0.0], np.cumsum(d)])
    starts = np.concatenate([[0], np.nonzero(~within_mask(seg_of))[0] + 1]).astype(int)
    base = np.zeros_like(s)
    base[starts] = s[starts]
    np.maximum.accumulate(base, out=base)
    return s - base, starts


def flat_tangents(lift, seg_of):
    """Unit tangents: central differences inside segments, one-sided at ends."""
    n = lift.shape[0]
    tan = np.zeros_like(lift)
    if n < 2:
        return tan
    d = np.diff(lift, axis=0)
    w = within_mask(seg_of)
    first = np.ones(n, dtype=bool)
    first[1:] = ~w
    last = np.ones(n, dtype=bool)
    last[:-1] = ~w
    idx = np.nonzero(~(first | last))[0]
    tan[idx] = lift[idx + 1] - lift[idx - 1]
    fidx = np.nonzero(first & ~last)[0]
    tan[fidx] = d[fidx]
    lidx = np.nonzero(last & ~first)[0]
    tan[lidx] = d[lidx - 1]
    nrm = np.linalg.norm(tan, axis=1)
    nrm[nrm == 0.0] = 1.0
    return tan / nrm[:, None]


class PolyCurve:
    """Oriented piecewise-C^1 curve as a list of chart segments.

    Large propagated curves are backed by flat arrays (lift, data, seg_of);
    Segment views materialize lazily on first access.
    """

    def __init__(self, segments=None, chord_tol=0.0):
        self._segments = list(segments) if segments is not None else []
        self.chord_tol = chord_tol
        self._flat = None  # (lift, data, seg_of) cache for vectorized consumers
        self._lazy = False

    @staticmethod
    def from_flat(lift, data, seg_of, chord_tol=0.0, vertical=None):
        c = PolyCurve([], chord_tol=chord_tol)
        c._flat = (lift, data, seg_of)
        c._lazy = True
        c._vertical_flags = vertical
        return c

    @property
    def segments(self):
        if self._lazy:
            self._segments = _segments_from_flat(*self._flat, getattr(self, "_vertical_flags", None))
            self._lazy = False
        return self._segments

    @property
    def length(self):
        if self._lazy:
            lift, _, seg_of = self._flat
            if lift.shape[0] < 2:
                return 0.0
            d = np.linalg.norm(np.diff(lift, axis=0), axis=1)
            return float(np.sum(np.where(within_mask(seg_of), d, 0.0)))
        return float(sum(seg.length for seg in self._segments))

    @property
    def n_samples(self):
        if self._lazy:
            return int(self._flat[0].shape[0])
        return int(sum(seg.n for seg in self._segments))

    def max_step(self):
        if self._lazy:
            lift, _, seg_of = self._flat
            if lift.shape[0] < 2:
                return 0.0
            d = np.linalg.norm(np.diff(lift, axis=0), axis=1)
            d = np.where(within_mask(seg_of), d, 0.0)
            return float(np.max(d))
        if not self._segments:
            return 0.0
        return max(seg.max_step() for seg in self._segments)

    def all_points(self):
        if self._lazy:
            return wrap(self._flat[0])
        if not self._segments:
            return np.zeros((0, 2))
        return np.concatenate([seg.pts for seg in self._segments], axis=0)

    def copy(self):
        segs = [
            Segment(
                pts=s.pts.copy(),
                s=s.s.copy(),
                tan=s.tan.copy(),
                side=s.side,
                comp=s.comp,
                data={k: np.asarray(v).copy() for k, v in s.data.items()},
            )
            for s in self.segments
        ]
        return PolyCurve(segs, chord_tol=self.chord_tol)


def _segments_from_flat(lift, data, seg_of, vertical=None):
    pts = wrap(lift) if lift.size else lift
    s, starts = flat_arc_length(lift, seg_of)
    tan = flat_tangents(lift, seg_of)
    bounds = np.concatenate([starts, [lift.shape[0]]])
    segs = []
    keys = list(data.keys())
    for i, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        if b - a < 2 or s[b - 1] < 1e-9:
            continue
        seg = Segment(
            pts=pts[a:b],
            s=s[a:b],
            tan=tan[a:b],
            data={k: data[k][a:b] for k in keys},
        )
        if vertical is not None:
            seg.vertical = bool(vertical[i])
        segs.append(seg)
    return segs


def _curve_from_lifted_path(lift, n=None, side=0, comp=-1):
    """Curve from a continuous path in the plane (chopped at unit-cell
    boundaries so each output segment is chart-clean)."""
    lift = np.asarray(lift, dtype=float)
    if n is not None and lift.shape[0] == 2:
        t = np.linspace(0.0, 1.0, n)[:, None]
        lift = lift[0] * (1 - t) + lift[1] * t
    segs = chop_lifted_path(lift, side=side, comp=comp)
    return PolyCurve(segs)


def _vertical_circle(x, n=257):
    y = np.linspace(0.0, 1.0, n)
    lift = np.column_stack([np.full(n, float(x)), y])
    return _curve_from_lifted_path(lift)


def _line_curve(p0, p1, n=129):
    """Straight path from p0 to p1 in lifted coordinates."""
    return _curve_from_lifted_path(np.array([p0, p1], dtype=float), n=n)


PolyCurve.from_lifted_path = staticmethod(_curve_from_lifted_path)
PolyCurve.vertical_circle = staticmethod(_vertical_circle)
PolyCurve.line = staticmethod(_line_curve)


def curve_length(curve):
    """Total arc length (sum of segment lengths)."""
    return curve.length


def chop_lifted_path(lift, data=None, side=0, comp=-1, min_len=0.0):
    """Split a continuous lifted polyline at unit-cell boundary crossings.

    data: dict of per-sample arrays; crossing points get linearly
    interpolated values.  Returns a list of Segments.
    """
    lift = np.asarray(lift, dtype=float)
    m = lift.shape[0]
    if m == 0:
        return []
    if m == 1:
        return [segment_from_lift(lift, side=side, comp=comp, data=data)]
    data = data or {}

    cells = np.floor(lift)
    # account for samples sitting exactly on a cell boundary: they belong
    # to both sides, no crossing needed if neighbours share a cell edge
    breaks = []  # (edge index i, param t in (0,1])
    d = np.diff(lift, axis=0)
    for axis in (0, 1):
        lo = np.minimum(cells[:-1, axis], cells[1:, axis])
        hi = np.maximum(cells[:-1, axis], cells[1:, axis])
        rows = np.nonzero(hi > lo)[0]
        for i in rows:
            a, b = lift[i, axis], lift[i + 1, axis]
            first = np.floor(min(a, b)) + 1.0
            last = np.floor(max(a, b))
            if max(a, b) == last:  # endpoint exactly on boundary
                last -= 1.0
            ks = np.arange(first, last + 0.5)
            if ks.size == 0:
                continue
            t = (ks - a) / (b - a)
            for tv in t:
                if 0.0 < tv <= 1.0:
                    breaks.append((i, float(tv)))
    if not breaks:
        return [segment_from_lift(lift, side=side, comp=comp, data=data)]

    breaks.sort()
    pieces = []
    keys = list(data.keys())
    cur_pts = [lift[0]]
    cur_dat = {k: [np.asarray(data[k])[0]] for k in keys}
    prev = (0, 0.0)
    bi = 0
    for i in range(m - 1):
        while bi < len(breaks) and breaks[bi][0] == i:
            _, t = breaks[bi]
            pt = lift[i] + t * d[i]
            vals = {k: _lerp(np.asarray(data[k]), i, t) for k in keys}
            if not np.allclose(pt, cur_pts[-1], atol=1e-15):
                cur_pts.append(pt)
                for k in keys:
                    cur_dat[k].append(vals[k])
            pieces.append((cur_pts, cur_dat))
            cur_pts = [pt]
            cur_dat = {k: [vals[k]] for k in keys}
            bi += 1
        nxt = lift[i + 1]
        if not np.allclose(nxt, cur_pts[-1], atol=1e-15):
            cur_pts.append(nxt)
            for k in keys:
                cur_dat[k].append(np.asarray(data[k])[i + 1])
    pieces.append((cur_pts, cur_dat))

    segs = []
    for pts, dat in pieces:
        pts = np.asarray(pts)
        if pts.shape[0] < 2:
            continue
        seg_len = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
        if seg_len <= min_len:
            continue
        seg_data = {k: np.asarray(v) for k, v in dat.items()}
        segs.append(segment_from_lift(pts, side=side, comp=comp, data=seg_data))
    return segs


def _lerp(arr, i, t):
    return arr[i] * (1.0 - t) + arr[i + 1] * t


# -- refinement -----------------------------------------------------------


def refine(curve, map_derivative_bound=1.0, target_step=1e-3, max_samples=5_000_000):
    """Insert chord samples so steps are <= target_step / max(1, bound).

    Tangents at interior samples are recomputed by central differences in
    the parameter.  Carried per-sample data is linearly interpolated.
    """
    step = target_step / max(1.0, float(map_derivative_bound))
    if step <= 0:
        raise ValueError("target_step must be positive")
    total = sum(max(seg.n, int(np.ceil(seg.length / step)) + 1) for seg in curve.segments)
    if total > max_samples:
        raise SampleBudgetExceeded(
            f"refinement to step {step:g} needs ~{total} samples (cap {max_samples})"
        )
    out = []
    for seg in curve.segments:
        out.append(refine_segment(seg, step))
    return PolyCurve(out, chord_tol=curve.chord_tol)


def refine_segment(seg, step):
    if seg.n < 2:
        return seg
    lift = seg.lifted()
    d = np.diff(lift, axis=0)
    elen = np.linalg.norm(d, axis=1)
    counts = np.maximum(1, np.ceil(elen / step).astype(int))
    if np.all(counts == 1):
        return seg
    new_lift = [lift[:1]]
    new_data = {k: [np.asarray(v)[:1]] for k, v in seg.data.items()}
    for i in range(seg.n - 1):
        c = counts[i]
        t = np.arange(1, c + 1) / c
        new_lift.append(lift[i] + t[:, None] * d[i])
        for k, v in seg.data.items():
            v = np.asarray(v)
            if v.ndim == 1:
                new_data[k].append(v[i] + t * (v[i + 1] - v[i]))
            else:
                new_data[k].append(v[i] + t[:, None] * (v[i + 1] - v[i]))
    lift2 = np.concatenate(new_lift, axis=0)
    data2 = {k: np.concatenate(v, axis=0) for k, v in new_data.items()}
    return segment_from_lift(lift2, side=seg.side, comp=seg.comp, data=data2)


# -- distances ------------------------------------------------------------


def _edges_of(curve):
    """All polyline edges as (E,2) start points plus (E,2) deltas, with the
    owning segment id and the start arc-length position."""
    flat = getattr(curve, "_flat", None)
    if flat is not None:
        lift, _, seg_of = flat
        if lift.shape[0] < 2:
            z = np.zeros((0, 2))
            return z, z, np.zeros(0, dtype=int), np.zeros(0)
        w = within_mask(seg_of)
        s, _ = flat_arc_length(lift, seg_of)
        return (
            wrap(lift[:-1][w]),
            np.diff(lift, axis=0)[w],
            seg_of[:-1][w].astype(int),
            s[:-1][w],
        )
    p0, dl, seg_id, s0 = [], [], [], []
    for i, seg in enumerate(curve.segments):
        if seg.n < 2:
            continue
        lift = seg.lifted()
        p0.append(seg.pts[:-1])
        dl.append(np.diff(lift, axis=0))
        seg_id.append(np.full(seg.n - 1, i))
        s0.append(seg.s[:-1])
    if not p0:
        z = np.zeros((0, 2))
        return z, z, np.zeros(0, dtype=int), np.zeros(0)
    return (
        np.concatenate(p0),
        np.concatenate(dl),
        np.concatenate(seg_id),
        np.concatenate(s0),
    )


def _seg_seg_dist(p0, d1, q0, d2):
    """Euclidean min distance between segment batches (broadcast shapes)."""
    r = p0 - q0
    a = np.sum(d1 * d1, axis=-1)
    e = np.sum(d2 * d2, axis=-1)
    b = np.sum(d1 * d2, axis=-1)
    c = np.sum(d1 * r, axis=-1)
    f = np.sum(d2 * r, axis=-1)
    den = a * e - b * b
    tiny = 1e-30
    s = np.where(den > tiny, (b * f - c * e) / np.where(den > tiny, den, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)
    t = np.where(e > tiny, (b * s + f) / np.where(e > tiny, e, 1.0), 0.0)
    s2 = np.where(
        t < 0.0,
        np.clip(np.where(a > tiny, -c / np.where(a > tiny, a, 1.0), 0.0), 0.0, 1.0),
        np.where(
            t > 1.0,
            np.clip(np.where(a > tiny, (b - c) / np.where(a > tiny, a, 1.0), 0.0), 0.0, 1.0),
            s,
        ),
    )
    t2 = np.clip(t, 0.0, 1.0)
    diff = r + s2[..., None] * d1 - t2[..., None] * d2
    return np.sqrt(np.sum(diff * diff, axis=-1))


_SHIFT9 = np.array([[i, j] for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)


def _edge_pair_min(p0a, dla, p0b, dlb, full_shifts, chunk=262144):
    """Min distance over all edge pairs on the torus.

    full_shifts=True checks the 3x3 lattice shifts around the recentred
    offset (exact); False uses only the recentred copy, which is exact for
    pairs closer than ~0.5 and never underestimates farther pairs below
    that scale.
    """
    Ea, Eb = p0a.shape[0], p0b.shape[0]
    if Ea == 0 or Eb == 0:
        return np.inf, (-1, -1)
    best = np.inf
    arg = (-1, -1)
    mida = p0a + 0.5 * dla
    midb = p0b + 0.5 * dlb
    rows = max(1, chunk // max(Eb, 1))
    shifts = _SHIFT9 if full_shifts else np.zeros((1, 2))
    for lo in range(0, Ea, rows):
        hi = min(Ea, lo + rows)
        off = np.round(mida[lo:hi, None, :] - midb[None, :, :])
        q0 = p0b[None, :, :] + off
        dmin = None
        for sh in shifts:
            d = _seg_seg_dist(p0a[lo:hi, None, :], dla[lo:hi, None, :], q0 + sh, dlb[None, :, :])
            dmin = d if dmin is None else np.minimum(dmin, d)
        i, j = np.unravel_index(np.argmin(dmin), dmin.shape)
        if dmin[i, j] < best:
            best = float(dmin[i, j])
            arg = (lo + int(i), int(j))
    return best, arg


def min_distance(c1, c2, exact_shifts=True):
    """Lower bound on the torus distance between two curves.

    Computed as the exact min over polyline edge pairs minus both curves'
    chord-deviation bounds.  Requires chart-clean sampling.
    """
    for c in (c1, c2):
        if c.max_step() > MAX_CHART_STEP:
            raise UnrefinedCurve("curve has sample steps above the chart limit")
    p0a, dla, _, _ = _edges_of(c1)
    p0b, dlb, _, _ = _edges_of(c2)
    best, _ = _edge_pair_min(p0a, dla, p0b, dlb, full_shifts=exact_shifts)
    if not np.isfinite(best):
        return 0.0 if (c1.n_samples == 0 or c2.n_samples == 0) else best
    return max(0.0, best - c1.chord_tol - c2.chord_tol)


def edge_distance_profile(curve, target, chunk=262144):
    """Per-edge min distance from `curve`'s edges to `target`.

    Returns (dist (E,), edge lengths (E,), seg ids (E,), edge start s (E,)).
    Uses the near-field single-shift evaluation (exact below ~0.4).
    """
    p0a, dla, seg_id, s0 = _edges_of(curve)
    p0b, dlb, _, _ = _edges_of(target)
    Ea, Eb = p0a.shape[0], p0b.shape[0]
    elen = np.linalg.norm(dla, axis=1)
    if Ea == 0 or Eb == 0:
        return np.full(Ea, np.inf), elen, seg_id, s0
    mida = p0a + 0.5 * dla
    midb = p0b + 0.5 * dlb
    out = np.full(Ea, np.inf)
    rows = max(1, chunk // Eb)
    for lo in range(0, Ea, rows):
        hi = min(Ea, lo + rows)
        off = np.round(mida[lo:hi, None, :] - midb[None, :, :])
        d = _seg_seg_dist(
            p0a[lo:hi, None, :], dla[lo:hi, None, :], p0b[None, :, :] + off, dlb[None, :, :]
        )
        out[lo:hi] = d.min(axis=1)
    return out, elen, seg_id, s0


def point_curve_distance(points, curve, chunk=4_000_000):
    """Distance from each point to the curve (exact over edges)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    p0, dl, _, _ = _edges_of(curve)
    n, E = points.shape[0], p0.shape[0]
    if E == 0:
        return np.full(n, np.inf)
    out = np.full(n, np.inf)
    mid = p0 + 0.5 * dl
    rows = max(1, chunk // E)
    for lo in range(0, n, rows):
        hi = min(n, lo + rows)
        off = np.round(points[lo:hi, None, :] - mid[None, :, :])
        q0 = p0[None, :, :] + off
        r = points[lo:hi, None, :] - q0
        a = np.sum(dl * dl, axis=-1)[None, :]
        t = np.where(a > 1e-30, np.sum(r * dl[None, :, :], axis=-1) / np.where(a > 1e-30, a, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        diff = r - t[..., None] * dl[None, :, :]
        d = np.sqrt(np.sum(diff * diff, axis=-1))
        out[lo:hi] = d.min(axis=1)
    return out


class EdgeGrid:
    """Uniform-cell index over a curve's edges for capped distance queries.

    Exact for distances below `cut`; larger distances are reported as inf.
    Edges are subdivided into cell-sized chunks and hashed into the cells
    they touch, so a 3x3 cell neighbourhood always covers the cut radius.
    """

    def __init__(self, curve, cut=2e-3, n_cells=None):
        p0, dl, _, _ = _edges_of(curve)
        self.cut = float(cut)
        if n_cells is None:
            n_cells = max(8, min(128, int(0.9 / max(cut, 1e-3))))
        self.n = int(n_cells)
        if 1.0 / self.n < 2.1 * cut:
            self.n = max(4, int(1.0 / (2.1 * cut)))
        self.p0 = p0
        self.dl = dl
        E = p0.shape[0]
        if E == 0:
            self.cell_sorted = np.zeros(0, dtype=np.int64)
            self.edge_sorted = np.zeros(0, dtype=np.int64)
            self.cell_bounds = np.zeros(self.n * self.n + 1, dtype=np.int64)
            return
        elen = np.linalg.norm(dl, axis=1)
        h = 1.0 / self.n
        counts = np.maximum(1, np.ceil(elen / h).astype(np.int64)) + 1
        edge_of = np.repeat(np.arange(E), counts)
        offs = np.concatenate([[0], np.cumsum(counts)])[:-1]
        t = (np.arange(edge_of.shape[0]) - np.repeat(offs, counts)) / np.maximum(
            counts[edge_of] - 1, 1
        )
        pts = p0[edge_of] + t[:, None] * dl[edge_of]
        pts -= np.floor(pts)
        cells = (
            np.minimum((pts[:, 0] * self.n).astype(np.int64), self.n - 1) * self.n
            + np.minimum((pts[:, 1] * self.n).astype(np.int64), self.n - 1)
        )
        pairs = np.unique(np.stack([cells, edge_of]), axis=1)
        order = np.argsort(pairs[0], kind="stable")
        self.cell_sorted = pairs[0][order]
        self.edge_sorted = pairs[1][order]
        self.cell_bounds = np.searchsorted(
            self.cell_sorted, np.arange(self.n * self.n + 1)
        )

    def query(self, points):
        """Min distance to the curve per point, exact below cut else inf."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m = points.shape[0]
        out = np.full(m, np.inf)
        if self.p0.shape[0] == 0 or m == 0:
            return out
        cx = np.minimum((points[:, 0] * self.n).astype(np.int64), self.n - 1)
        cy = np.minimum((points[:, 1] * self.n).astype(np.int64), self.n - 1)
        pt_idx, cand = [], []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                cc = ((cx + dx) % self.n) * self.n + (cy + dy) % self.n
                lo = self.cell_bounds[cc]
                hi = self.cell_bounds[cc + 1]
                k = hi - lo
                tot = int(k.sum())
                if tot == 0:
                    continue
                pi = np.repeat(np.arange(m), k)
                offs = np.concatenate([[0], np.cumsum(k)])[:-1]
                pos = np.arange(tot) - np.repeat(offs, k) + np.repeat(lo, k)
                pt_idx.append(pi)
                cand.append(self.edge_sorted[pos])
        if not pt_idx:
            return out
        pi = np.concatenate(pt_idx)
        ei = np.concatenate(cand)
        P = points[pi]
        q0 = self.p0[ei]
        dl = self.dl[ei]
        off = np.round((P - (q0 + 0.5 * dl)))
        r = P - (q0 + off)
        a = np.sum(dl * dl, axis=1)
        t = np.where(a > 1e-30, np.sum(r * dl, axis=1) / np.where(a > 1e-30, a, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        diff = r - t[:, None] * dl
        d = np.sqrt(np.sum(diff * diff, axis=1))
        np.minimum.at(out, pi, d)
        return np.where(out <= self.cut, out, np.inf)


def contact_windows(curve, target, tol):
    """Near-contact analysis for the measure-zero intersection surrogate.

    Flags every edge of `curve` within `tol` of `target`, groups flagged
    edges into maximal consecutive runs per segment, and returns
    (windows, margin, total_len) where windows is a list of (seg_id, s_lo,
    s_hi, length) runs, margin is the min distance over unflagged edges
    (inf when everything is flagged), and total_len the flagged length.
    """
    dist, elen, seg_id, s0 = edge_distance_profile(curve, target)
    flagged = dist < tol
    windows = []
    if np.any(flagged):
        idx = np.nonzero(flagged)[0]
        start = idx[0]
        prev = idx[0]
        for i in idx[1:]:
            if i == prev + 1 and seg_id[i] == seg_id[prev]:
                prev = i
                continue
            windows.append(_mk_window(seg_id, s0, elen, start, prev))
            start = prev = i
        windows.append(_mk_window(seg_id, s0, elen, start, prev))
    unflagged = dist[~flagged]
    margin = float(unflagged.min()) if unflagged.size else np.inf
    total = float(np.sum(elen[flagged]))
    return windows, margin, total


def _mk_window(seg_id, s0, elen, i0, i1):
    return (
        int(seg_id[i0]),
        float(s0[i0]),
        float(s0[i1] + elen[i1]),
        float(s0[i1] + elen[i1] - s0[i0]),
    )


# -- CSV ------------------------------------------------------------------


def fr(x):
    """Shortest round-trip decimal form of a float (plain, not numpy repr)."""
    return repr(float(x))


def curve_to_csv(curve):
    """Serialize: one row per sample, (segment_id, s, x, y, tx, ty, side)."""
    buf = io.StringIO()
    buf.write("segment_id,s,x,y,tx,ty,side\n")
    for i, seg in enumerate(curve.segments):
        for j in range(seg.n):
            buf.write(
                f"{i},{fr(seg.s[j])},{fr(seg.pts[j, 0])},{fr(seg.pts[j, 1])},"
                f"{fr(seg.tan[j, 0])},{fr(seg.tan[j, 1])},{seg.side}\n"
            )
    return buf.getvalue()


def curve_from_csv(text):
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    if not rows:
        return PolyCurve([])
    arr = np.array([[float(v) for v in r[:6]] for r in rows])
    sides = np.array([int(r[6]) for r in rows])
    seg_ids = arr[:, 0].astype(int)
    segs = []
    for sid in np.unique(seg_ids):
        m = seg_ids == sid
        segs.append(
            Segment(
                pts=arr[m][:, 2:4].copy(),
                s=arr[m][:, 1].copy(),
                tan=arr[m][:, 4:6].copy(),
                side=int(sides[m][0]),
            )
        )
    return PolyCurve(segs)
