"""Growth-rate estimates bounding the essential spectral radius.

Lower bounds come from the propagated curve family: infima over the base
curve of the weight product, of the stretch product, and of the
length-normalized stretch product, each raised to the 1/k power.  The
limits are liminf-type objects, so finite-depth reports carry the whole
k-th-root sequence, a windowed minimum over [K/2, K], and the log-slope of
the raw sequence as a convergence diagnostic.

The upper bound multiplies the cylinder-complexity factor e^{h_m} by the
sup over probe orbits of |phi_n det DF^n| / lambda_n, with lambda_n the
minimal n-step stretch over a direction grid.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import SpectorusError
from .torus import fr


@dataclass
class BoundSequence:
    """One liminf-type estimate: raw infima, k-th roots, windowed value."""

    name: str
    k: np.ndarray
    raw: np.ndarray
    root: np.ndarray
    window: tuple
    estimate: float
    trend: float  # slope of log(raw) vs k over the window (per-step rate)

    def window_min(self, lo_frac, hi_frac=1.0):
        K = int(self.k[-1])
        lo = max(int(np.ceil(lo_frac * K)), int(self.k[0]))
        hi = max(int(np.floor(hi_frac * K)), lo)
        m = (self.k >= lo) & (self.k <= hi)
        return float(np.min(self.root[m]))


@dataclass
class BoundReport:
    bv: BoundSequence
    linf1: BoundSequence
    linf2: BoundSequence
    linf: float
    lengths_are_cover: bool = False
    notes: list = field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        buf.write("k,raw_bv,root_bv,raw_linf1,root_linf1,raw_linf2,root_linf2\n")
        for i, k in enumerate(self.bv.k):
            buf.write(
                f"{int(k)},{fr(self.bv.raw[i])},{fr(self.bv.root[i])},"
                f"{fr(self.linf1.raw[i])},{fr(self.linf1.root[i])},"
                f"{fr(self.linf2.raw[i])},{fr(self.linf2.root[i])}\n"
            )
        return buf.getvalue()

    def summary(self):
        lines = [
            f"lambda_bv = {fr(self.bv.estimate)}",
            f"lambda_linf1 = {fr(self.linf1.estimate)}",
            f"lambda_linf2 = {fr(self.linf2.estimate)}",
            f"lambda_linf = {fr(self.linf)}",
            f"window = [{self.bv.window[0]}, {self.bv.window[1]}]",
            f"trend_bv = {fr(self.bv.trend)}",
            f"lengths_are_cover = {str(self.lengths_are_cover).lower()}",
        ]
        for n in self.notes:
            lines.append(f"note = {n}")
        return "\n".join(lines) + "\n"


def _sequence(name, ks, raw, window):
    ks = np.asarray(ks, dtype=float)
    raw = np.asarray(raw, dtype=float)
    root = np.exp(np.log(raw) / ks)
    lo, hi = window
    m = (ks >= lo) & (ks <= hi)
    est = float(np.min(root[m]))
    if np.count_nonzero(m) >= 2:
        slope = float(np.polyfit(ks[m], np.log(raw[m]), 1)[0])
    else:
        slope = float("nan")
    return BoundSequence(
        name=name, k=ks, raw=raw, root=root, window=(lo, hi), estimate=est, trend=slope
    )


def _window(K, lo_frac=0.5):
    lo = max(1, int(np.ceil(lo_frac * K)))
    return (lo, K)


def lambda_bv(orbit, window_frac=0.5):
    """Windowed estimate of liminf_k (inf_gamma |phi_k Jac_gamma F^k|)^{1/k}."""
    K = orbit.K
    if K < 10:
        raise SpectorusError("orbit too shallow for a liminf estimate (need K >= 10)")
    ks = np.arange(1, K + 1)
    prod = orbit.skel["phip"] * orbit.skel["jacp"]
    raw = np.min(np.abs(prod[1 : K + 1]), axis=1)
    return _sequence("bv", ks, raw, _window(K, window_frac))


def lambda_linf(orbit, window_frac=0.5):
    """The two sup-norm variants and their max.

    Variant 1 drops the stretch factor; variant 2 normalizes by the length
    of gamma_{k+1}.  Returns (seq1, seq2, max of estimates, report).
    """
    K = orbit.K
    if K < 10:
        raise SpectorusError("orbit too shallow for a liminf estimate (need K >= 10)")
    ks = np.arange(1, K + 1)
    raw1 = np.min(np.abs(orbit.skel["phip"][1 : K + 1]), axis=1)
    prod = orbit.skel["phip"] * orbit.skel["jacp"]
    rawp = np.min(np.abs(prod[1 : K + 1]), axis=1)
    lens = np.array([orbit.set_length(k + 1) for k in ks])
    raw2 = rawp / lens
    cover = not all(orbit.has_curve(int(k) + 1) for k in ks)
    seq1 = _sequence("linf1", ks, raw1, _window(K, window_frac))
    seq2 = _sequence("linf2", ks, raw2, _window(K, window_frac))
    return seq1, seq2, max(seq1.estimate, seq2.estimate), cover


def bound_report(orbit, window_frac=0.5):
    bv = lambda_bv(orbit, window_frac)
    s1, s2, linf, cover = lambda_linf(orbit, window_frac)
    return BoundReport(bv=bv, linf1=s1, linf2=s2, linf=linf, lengths_are_cover=cover)


# ---------------------------------------------------------------------------
# cylinder complexity and the upper bound
# ---------------------------------------------------------------------------


def _probe_points(gmap, n_side=24, n_gamma=1000, offset=0.235711):
    """Generic grid plus points seeded along the discontinuity set.

    Discontinuity samples use irrational-ish interior offsets so probes do
    not land on curve endpoints or lattice corners, where extra closures
    meet on a measure-zero set.
    """
    g = (np.arange(n_side) + offset) / n_side
    gx, gy = np.meshgrid(g, g)
    pts = [np.column_stack([gx.ravel(), gy.ravel()])]
    for comp in gmap.discontinuity():
        t = ((np.arange(n_gamma) + 0.6180339887) / n_gamma)[:, None]
        p0 = np.asarray(comp.p0, dtype=float)
        p1 = np.asarray(comp.p1, dtype=float)
        seg = p0 * (1 - t) + p1 * t
        pts.append(seg - np.floor(seg))
    return np.concatenate(pts)


def cylinder_multiplicity(gmap, probes, depth, ring_radius=1e-9, ring_points=12):
    """Number of depth-n cylinder closures containing each probe point,
    computed as the count of distinct branch itineraries realized on a
    small ring around the point."""
    n = probes.shape[0]
    ang = 2.0 * np.pi * (np.arange(ring_points) + 0.31) / ring_points
    ring = ring_radius * np.column_stack([np.cos(ang), np.sin(ang)])
    cloud = (probes[:, None, :] + ring[None, :, :]).reshape(-1, 2)
    cloud = cloud - np.floor(cloud)
    syms = gmap.orbit_symbols(cloud, depth)  # (n*ring, depth)
    # hash itineraries: mix symbols with a rolling base
    h = np.zeros(syms.shape[0], dtype=np.int64)
    base = np.int64(1)
    mod = np.int64((1 << 61) - 1)
    for j in range(depth):
        h = (h * np.int64(1_000_003) + syms[:, j] + 7) % mod
    h = h.reshape(n, ring_points)
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = np.unique(h[i]).size
    return out


def cylinder_complexity(gmap, n_max=8, probes=None, ring_radius=1e-9):
    """The (1/n) log max-multiplicity sequence for n = 1..n_max, plus a
    clamped slope fit used as the h_m estimate in the upper bound."""
    if probes is None:
        probes = _probe_points(gmap)
    ns = np.arange(1, n_max + 1)
    seq = np.empty(n_max)
    mult = np.empty(n_max)
    for i, n in enumerate(ns):
        m = cylinder_multiplicity(gmap, probes, int(n), ring_radius=ring_radius)
        mult[i] = float(np.max(m))
        seq[i] = np.log(mult[i]) / n
    if n_max >= 3:
        slope = float(np.polyfit(ns[1:], np.log(mult[1:]), 1)[0])
    else:
        slope = seq[-1]
    h_m = max(0.0, slope)
    return ns, mult, seq, h_m


def _sigma_min_2x2(M):
    """Smallest singular value per matrix, stable for huge anisotropy:
    sigma_min = |det| / sigma_max."""
    a, b = M[:, 0, 0], M[:, 0, 1]
    c, d = M[:, 1, 0], M[:, 1, 1]
    det = np.abs(a * d - b * c)
    E = a * a + b * b + c * c + d * d
    disc = np.sqrt(np.maximum(E * E - 4.0 * det * det, 0.0))
    smax = np.sqrt(0.5 * (E + disc))
    return det / np.where(smax > 0, smax, 1.0)


def lambda_upper(gmap, n_max=20, probes=None, h_m=None, complexity_depth=8):
    """Finite-n sequence of the upper-bound estimate.

    For each probe point the n-step derivative product along its own branch
    gives |phi_n det DF^n| and lambda_n = inf over unit tangents of the
    n-step stretch (the smallest singular value; a direction grid cannot
    resolve it once the product is strongly anisotropic).  The value at
    depth n is e^{h_m} * (max over probes of |phi_n det| / lambda_n)^{1/n}.
    Returns (ns, sequence, estimate, h_m).
    """
    if probes is None:
        probes = _probe_points(gmap, n_side=16, n_gamma=200)
    if h_m is None:
        _, _, _, h_m = cylinder_complexity(gmap, n_max=complexity_depth)
    n_pts = probes.shape[0]
    M = np.broadcast_to(np.eye(2), (n_pts, 2, 2)).copy()
    phi_n = np.ones(n_pts)
    cur = probes.copy()
    ns = np.arange(1, n_max + 1)
    seq = np.empty(n_max)
    for i in range(n_max):
        D = gmap.derivative(cur)
        phi_n = phi_n * gmap.weight_eval(cur)
        M = np.einsum("nij,njk->nik", D, M)
        cur = gmap.evaluate(cur)
        det = np.abs(M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0])
        lam_n = _sigma_min_2x2(M)
        val = np.max(np.abs(phi_n) * det / lam_n)
        seq[i] = np.exp(h_m) * val ** (1.0 / (i + 1))
    return ns, seq, float(seq[-1]), h_m
