"""Transfer-operator evaluation and the jump functionals on the curve family.

Observables are finite combinations of terms (coeff, g, n) standing for
coeff * L^n g with g smooth; evaluation recurses through branch preimages,
which is the only finite representation preserving the exact discontinuity
structure (L^n g is C^1 off the first n forward images of the
discontinuity set, so jumps live exactly on that family).

Jumps are two-sided differences along a geometric epsilon ladder,
extrapolated to zero; each quadrature node is screened so its ladder stays
on one side of every discontinuity curve the observable can jump across.
The curve functionals integrate alpha times the jump along gamma_k with
composite trapezoid weights, skipping screened-out windows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    LambdaTooLarge,
    RecursionDepthExceeded,
    SkippedLengthExceeded,
)
from .orbit import PropagateOptions, prepare_base_curve
from .torus import PolyCurve, _edges_of, refine, torus_distance, wrap

N_MAX_DEPTH = 8


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


@dataclass
class Observable:
    """Finite combination sum_i coeff_i * L^{n_i} g_i, divided by `div`.

    quad_step, when set, tells quadratures the node spacing needed to
    resolve the observable's features (e.g. a narrow bump support).
    """

    gmap: object
    terms: list  # (coeff, g callable, depth)
    div: float = 1.0
    quad_step: float | None = None

    @staticmethod
    def smooth(gmap, g):
        return Observable(gmap, [(1.0, g, 0)])

    @staticmethod
    def iterated(gmap, g, depth):
        if depth > N_MAX_DEPTH:
            raise RecursionDepthExceeded(f"depth {depth} exceeds cap {N_MAX_DEPTH}")
        return Observable(gmap, [(1.0, g, depth)])

    @property
    def depth(self):
        return max((n for _, _, n in self.terms), default=0)

    def apply_L(self):
        if self.depth + 1 > N_MAX_DEPTH:
            raise RecursionDepthExceeded(f"depth {self.depth + 1} exceeds cap {N_MAX_DEPTH}")
        return Observable(
            self.gmap, [(c, g, n + 1) for c, g, n in self.terms],
            div=self.div, quad_step=self.quad_step,
        )

    def scaled(self, factor):
        return Observable(
            self.gmap, [(c * factor, g, n) for c, g, n in self.terms],
            div=self.div, quad_step=self.quad_step,
        )

    def plus(self, other, factor=1.0):
        terms = list(self.terms) + [
            (c * factor * self.div / other.div, g, n) for c, g, n in other.terms
        ]
        steps = [s for s in (self.quad_step, other.quad_step) if s is not None]
        return Observable(self.gmap, terms, div=self.div, quad_step=min(steps) if steps else None)

    def eval(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        out = np.zeros(P.shape[0])
        for c, g, n in self.terms:
            out += c * _eval_Ln(self.gmap, g, n, P)
        return out / self.div


def _eval_Ln(gmap, g, n, P):
    if n == 0:
        return np.asarray(g(P), dtype=float)
    out = np.zeros(P.shape[0])
    for br in gmap.preimage_branches(P):
        if not np.any(br.valid):
            continue
        pts = br.pts[br.valid]
        vals = _eval_Ln(gmap, g, n - 1, pts) * gmap.weight_eval(pts)
        out[br.valid] += vals
    return out


def transfer_apply(gmap, h, y):
    """(L h)(y) pointwise: the weighted sum over branch preimages."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if isinstance(h, Observable):
        return h.apply_L().eval(y)
    out = np.zeros(y.shape[0])
    for br in gmap.preimage_branches(y):
        if not np.any(br.valid):
            continue
        pts = br.pts[br.valid]
        out[br.valid] += np.asarray(h(pts), dtype=float) * gmap.weight_eval(pts)
    return out


# smooth test functions -----------------------------------------------------


class TrigPoly:
    """Real trigonometric polynomial sum a cos(2pi(mx+ny)) + b sin(...)."""

    def __init__(self, modes, a, b, c0=0.0):
        self.modes = np.asarray(modes, dtype=float)
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.c0 = float(c0)

    @staticmethod
    def random(rng, n_modes=3, max_freq=2, amp=1.0, offset=0.0):
        modes = rng.integers(-max_freq, max_freq + 1, size=(n_modes, 2))
        modes[np.all(modes == 0, axis=1)] = [1, 0]
        a = amp * rng.standard_normal(n_modes) / n_modes
        b = amp * rng.standard_normal(n_modes) / n_modes
        return TrigPoly(modes, a, b, c0=offset)

    def __call__(self, P):
        P = np.atleast_2d(P)
        ph = 2.0 * np.pi * (P @ self.modes.T)
        return self.c0 + np.cos(ph) @ self.a + np.sin(ph) @ self.b


class Bump:
    """Smooth bump supported in the disc of given radius about a centre."""

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def __call__(self, P):
        P = np.atleast_2d(P)
        d = torus_distance(P, self.center) / self.radius
        out = np.zeros(P.shape[0])
        inside = d < 1.0
        u = d[inside]
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u * u))
        return out


# ---------------------------------------------------------------------------
# jumps
# ---------------------------------------------------------------------------


@dataclass
class JumpProbe:
    """Probe geometry for two-sided limits: ladder eps * 2^-j, j < rungs.

    eps adapts per node: it shrinks to keep the whole ladder strictly on
    one side of every curve the observable can jump across, down to
    eps_min below which the node is skipped.
    """

    eps0: float = 1e-3
    rungs: int = 7
    order: int = 4
    eps_min: float = 1e-6


def jump(gmap, h, X, V, probe=None, eps=None):
    """Extrapolated two-sided difference of h across each probe point.

    X (m,2) points, V (m,2) directions (normalized internally); eps an
    optional per-node ladder scale.  Returns (jump values (m,),
    extrapolation error estimates (m,)).
    """
    probe = probe or JumpProbe()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    nv = np.linalg.norm(V, axis=1, keepdims=True)
    V = V / np.where(nv > 0, nv, 1.0)
    m = X.shape[0]
    if eps is None:
        eps = np.full(m, probe.eps0)
    eps = np.asarray(eps, dtype=float)
    lad = eps[:, None] * 2.0 ** (-np.arange(probe.rungs))[None, :]
    pts = np.concatenate(
        [X[:, None, :] + lad[:, :, None] * V[:, None, :],
         X[:, None, :] - lad[:, :, None] * V[:, None, :]]
    ).reshape(-1, 2)
    vals = h.eval(wrap(pts)) if isinstance(h, Observable) else np.asarray(h(wrap(pts)))
    vals = vals.reshape(2, m, probe.rungs)
    T = vals[0] - vals[1]  # D_j, finest last
    order = min(probe.order, probe.rungs - 1)
    prev = T[:, -1].copy()
    for p in range(1, order + 1):
        fac = 2.0**p
        if p == order:
            prev = T[:, -1].copy()
        T = (fac * T[:, 1:] - T[:, :-1]) / (fac - 1.0)
    est = T[:, -1]
    err = np.abs(est - prev) if order >= 1 else np.zeros(m)
    return est, err


def get_family(gmap, depth, options=None):
    """Cached DiscontinuityFamily per (map, depth)."""
    cache = gmap.__dict__.setdefault("_family_cache", {})
    if depth not in cache:
        cache[depth] = DiscontinuityFamily(gmap, depth, options=options)
    return cache[depth]


class DiscontinuityFamily:
    """Materialized forward images Gamma_1..Gamma_depth for probe screening."""

    def __init__(self, gmap, depth, options=None):
        from .axioms import _side_orbits

        self.gmap = gmap
        self.depth = depth
        self.edges = []
        if depth >= 1 and gmap.discontinuity():
            opts = options or PropagateOptions(target_step=0.01, n_skeleton=16)
            fam = _side_orbits(gmap, max(depth - 1, 1), depth, options=opts)
            p0s, dls = [], []
            for k, curve in fam:
                if k > depth:
                    continue
                p0, dl, _, _ = _edges_of(curve)
                p0s.append(p0)
                dls.append(dl)
            if p0s:
                self.edges = [np.concatenate(p0s), np.concatenate(dls)]

    def first_crossing(self, X, V, eps0, chunk=4_000_000):
        """Smallest |t| in (0, eps0] where the line X + t V crosses a
        family edge; eps0 where no crossing occurs.  The node's own curve
        counts only through re-crossings away from the node (|t| > 0)."""
        m = X.shape[0]
        out = np.full(m, eps0)
        if not self.edges:
            return out
        p0, dl = self.edges
        E = p0.shape[0]
        rows = max(1, chunk // max(E, 1))
        for lo in range(0, m, rows):
            hi = min(m, lo + rows)
            Xc, Vc = X[lo:hi], V[lo:hi]
            off = np.round(Xc[:, None, :] - (p0 + 0.5 * dl)[None, :, :])
            b0 = p0[None, :, :] + off
            r = b0 - Xc[:, None, :]
            den = Vc[:, None, 0] * (-dl[None, :, 1]) + Vc[:, None, 1] * dl[None, :, 0]
            ok = np.abs(den) > 1e-15
            den_s = np.where(ok, den, 1.0)
            t = (r[..., 0] * (-dl[None, :, 1]) + r[..., 1] * dl[None, :, 0]) / den_s
            u = (Vc[:, None, 0] * r[..., 1] - Vc[:, None, 1] * r[..., 0]) / den_s
            hit = ok & (np.abs(t) > 1e-12) & (np.abs(t) <= eps0) & (u >= -1e-12) & (u <= 1 + 1e-12)
            tt = np.where(hit, np.abs(t), eps0)
            out[lo:hi] = np.min(tt, axis=1)
        return out


def screen_probes(family, X, V, probe):
    """Per-node ladder admissibility and scale.

    Returns (ok mask, per-node eps): eps shrinks to 0.45 of the distance
    to the first family crossing along the probe line, so ladders never
    straddle a jump of the observable; nodes whose admissible scale falls
    below eps_min are skipped (their windows carry negligible length).
    """
    nv = np.linalg.norm(V, axis=1, keepdims=True)
    Vn = V / np.where(nv > 0, nv, 1.0)
    t_first = family.first_crossing(X, Vn, probe.eps0)
    eps = np.minimum(probe.eps0, 0.45 * t_first)
    ok = eps >= probe.eps_min
    return ok, eps


# ---------------------------------------------------------------------------
# the curve functionals
# ---------------------------------------------------------------------------


@dataclass
class EllResult:
    value: float
    err: float
    skipped: float
    n_nodes: int
    n_used: int


def _refined_level(orbit, k, max_step, hint=None):
    c = orbit.curve(k)
    if hint is not None:
        max_step = hint if max_step is None else min(max_step, hint)
    if max_step is None:
        # fine nodes only pay off while curves are short: on long curves
        # the jump integrand is supported on transversal crossings of
        # measure zero, so coarse arc sampling loses nothing
        max_step = 2e-3 if c.length <= 32.0 else None
    if max_step is None or c.max_step() <= max_step:
        return c
    return refine(c, 1.0, max_step)


def ell(
    gmap,
    orbit,
    k,
    h,
    probe=None,
    family=None,
    max_step=None,
    skip_frac_tol=0.05,
):
    """ell_k(h): quadrature over gamma_k of alpha_k times the jump of h in
    the transported transversal direction.  Composite trapezoid on the
    arc-length samples; screened-out nodes are dropped and their weight is
    reported as skipped length."""
    probe = probe or JumpProbe()
    if family is None:
        family = get_family(gmap, h.depth if isinstance(h, Observable) else 1)
    div = 1.0
    if isinstance(h, Observable) and h.div != 1.0:
        # factor the normalization out of the quadrature: the unscaled sum
        # reproduces the stored scale bit-for-bit, so value/div is exact
        div = h.div
        h = Observable(h.gmap, h.terms, div=1.0, quad_step=h.quad_step)
    hint = h.quad_step if isinstance(h, Observable) else None
    curve = _refined_level(orbit, k, max_step, hint=hint)
    vals = []
    total_len = 0.0
    skipped = 0.0
    acc = 0.0
    acc_half = 0.0
    err_jump = 0.0
    n_nodes = n_used = 0
    for seg in curve.segments:
        n = seg.n
        if n < 2:
            continue
        w = np.zeros(n)
        d = np.diff(seg.s)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
        total_len += seg.length
        V = np.asarray(seg.data["v"])
        alpha = np.asarray(seg.data["alpha"])
        ok, eps_n = screen_probes(family, seg.pts, V, probe)
        # segment endpoints are cut points and sit exactly on the forward
        # discontinuity family; their ladders straddle a genuine jump of
        # the observable, so their weight moves to the adjacent node
        # (open-rule ends) instead of entering the sum
        if n > 2:
            w[1] += w[0]
            w[-2] += w[-1]
            w[0] = w[-1] = 0.0
            ok[0] = ok[-1] = False
        else:
            skipped += float(np.sum(w))
            w[:] = 0.0
            ok[:] = False
        n_nodes += n
        n_used += int(np.count_nonzero(ok))
        skipped += float(np.sum(w[~ok]))
        if not np.any(ok):
            continue
        J, Jerr = jump(gmap, h, seg.pts[ok], V[ok], probe, eps=eps_n[ok])
        contrib = w[ok] * alpha[ok] * J
        acc += float(np.sum(contrib))
        err_jump += float(np.sum(np.abs(w[ok] * alpha[ok]) * Jerr))
        half = np.zeros(n)
        idx = np.arange(0, n, 2)
        if idx[-1] != n - 1:
            idx = np.concatenate([idx, [n - 1]])
        dh = np.diff(seg.s[idx])
        half_w = np.zeros(idx.size)
        half_w[:-1] += 0.5 * dh
        half_w[1:] += 0.5 * dh
        okh = ok[idx]
        Jh = np.zeros(idx.size)
        lookup = {int(i): p for p, i in enumerate(np.nonzero(ok)[0])}
        for p, i in enumerate(idx):
            if okh[p] and int(i) in lookup:
                Jh[p] = J[lookup[int(i)]]
        acc_half += float(np.sum(half_w[okh] * alpha[idx][okh] * Jh[okh]))
    if total_len > 0 and skipped > skip_frac_tol * total_len:
        raise SkippedLengthExceeded(
            f"level {k}: skipped {skipped:.4g} of {total_len:.4g}"
        )
    err = (abs(acc - acc_half) / 3.0 + err_jump) / abs(div)
    return EllResult(
        value=acc / div, err=err, skipped=skipped, n_nodes=n_nodes, n_used=n_used
    )


def ell_value(gmap, orbit, k, h, **kw):
    return ell(gmap, orbit, k, h, **kw).value


# ---------------------------------------------------------------------------
# the normalized peak element
# ---------------------------------------------------------------------------


@dataclass
class PeakElement:
    h0: Observable
    scale: float
    center: np.ndarray
    radius: float
    checks: list  # (k, |ell_k|)


def build_h0(gmap, orbit, radius=None, k_check=6, probe=None, min_radius=5e-4):
    """Construct the normalized element: a smooth bump g centred on the
    edge curve (support clear of the rest of the discontinuity set), pushed
    once through the operator and scaled so the first functional is 1.

    The division by the measured scale makes ell_1 exactly 1 on
    re-evaluation; the higher functionals vanish up to quadrature noise
    because the once-pushed bump only jumps across the first image curve.
    """
    probe = probe or JumpProbe()
    base = orbit.base
    seg = max(base.segments, key=lambda s: s.length)
    mid = seg.n // 2
    x0 = seg.pts[mid]
    r = radius
    if r is None:
        r = 0.02
        sig = gmap.sigma_points()
        if sig.size:
            r = min(r, float(np.min(torus_distance(sig, x0))) / 4.0)
        for comp in gmap.discontinuity():
            if comp.comp == seg.comp:
                continue
            other = comp.curve(n=129)
            from .torus import point_curve_distance

            r = min(r, float(point_curve_distance(x0[None, :], other)[0]) / 4.0)
        r = max(r, min_radius)
    while r >= min_radius:
        g = Bump(x0, r)
        raw = Observable.iterated(gmap, g, 1)
        fam = get_family(gmap, 1)
        step = min(r / 8.0, 2e-3)
        s = ell(gmap, orbit, 1, raw, probe=probe, family=fam, max_step=step)
        if abs(s.value) > 10.0 * max(s.err, 1e-14):
            h0 = Observable(gmap, raw.terms, div=s.value, quad_step=step)
            checks = []
            for k in range(2, k_check + 1):
                if not orbit.has_curve(k):
                    break
                rk = ell(gmap, orbit, k, h0, probe=probe, family=fam)
                checks.append((k, abs(rk.value)))
            return PeakElement(h0=h0, scale=s.value, center=x0, radius=r, checks=checks)
        r *= 0.5
    raise SkippedLengthExceeded("could not normalize: first functional kept vanishing")


# ---------------------------------------------------------------------------
# duality, the resolvent-type sum, the rank-one correction
# ---------------------------------------------------------------------------


def verify_duality(gmap, orbit, h, k_max=5, probe=None, max_step=None):
    """Rows (k, ell_{k+1}(Lh), ell_k(h), residual, error budget)."""
    probe = probe or JumpProbe()
    Lh = h.apply_L()
    fam_h = get_family(gmap, h.depth)
    fam_L = get_family(gmap, Lh.depth)
    rows = []
    worst = 0.0
    for k in range(1, k_max + 1):
        rhs = ell(gmap, orbit, k, h, probe=probe, family=fam_h, max_step=max_step)
        lhs = ell(gmap, orbit, k + 1, Lh, probe=probe, family=fam_L, max_step=max_step)
        res = abs(lhs.value - rhs.value)
        rows.append((k, lhs.value, rhs.value, res, lhs.err + rhs.err))
        worst = max(worst, res)
    return worst, rows


def functional_sequence(gmap, orbit, h, K_trunc, probe=None):
    fam = get_family(gmap, h.depth)
    vals = []
    for k in range(1, K_trunc + 1):
        if not orbit.has_curve(k):
            break
        vals.append(ell(gmap, orbit, k, h, probe=probe, family=fam).value)
    return np.array(vals)


def xi_lambda(gmap, orbit, lam, h, K_trunc=12, lambda_hat=None, probe=None, ells=None):
    """Truncated power-weighted sum of the functionals, with a tail bound
    fitted from the observed geometric decay."""
    if lambda_hat is None:
        from .bounds import lambda_bv

        lambda_hat = lambda_bv(orbit).estimate
    if abs(lam) >= 0.9 * lambda_hat:
        raise LambdaTooLarge(
            f"|lambda| = {abs(lam):.4g} outside certified region 0.9 * {lambda_hat:.4g}"
        )
    if ells is None:
        ells = functional_sequence(gmap, orbit, h, K_trunc, probe=probe)
    ks = np.arange(1, ells.size + 1)
    value = complex(np.sum((lam ** ks) * ells))
    mags = np.abs(ells)
    nz = mags > 1e-14
    if np.count_nonzero(nz) >= 3:
        slope = np.polyfit(ks[nz], np.log(mags[nz]), 1)[0]
        rho = float(np.exp(slope))
    else:
        rho = 1.0 / lambda_hat
    q = abs(lam) * min(rho, 1.0 / (0.9 * lambda_hat))
    last = mags[-1] if mags.size else 0.0
    tail = last * q / max(1.0 - q, 1e-9) * abs(lam) ** ells.size if q < 1 else np.inf
    return value, tail, ells


def rank_one_image(gmap, orbit, h, peak, probe=None):
    """The rank-one correction applied to h: ell_1(Lh) times the peak
    element (returned as the scaled element plus the scalar)."""
    fam = get_family(gmap, h.depth + 1)
    c = ell(gmap, orbit, 1, h.apply_L(), probe=probe, family=fam).value
    return peak.h0.scaled(c), c


def shift_identity_residuals(gmap, orbit, k, h, n_probe=50, probe=None, match_tol=1e-9):
    """Sampled residuals of the jump pushforward identity between levels k
    and k+1: the jump of Lh at y against the weighted sum of jumps of h at
    the preimages of y on gamma_k."""
    probe = probe or JumpProbe()
    pts1, _, _, v1, _, _, _, _ = orbit.level_arrays(k + 1)
    ptsk, _, _, vk, _, _, _, _ = orbit.level_arrays(k)
    stride = max(1, pts1.shape[0] // n_probe)
    sel = np.arange(0, pts1.shape[0], stride)[:n_probe]
    ys, vys = pts1[sel], v1[sel]
    Lh = h.apply_L()
    fam_L = get_family(gmap, Lh.depth)
    fam_h = get_family(gmap, h.depth)
    oky, epsy = screen_probes(fam_L, ys, vys, probe)
    Jy = np.zeros(sel.size)
    Jy[oky], _ = jump(gmap, Lh, ys[oky], vys[oky], probe, eps=epsy[oky])
    rhs = np.zeros(sel.size)
    ok_rhs = oky.copy()
    gk = orbit.curve(k)
    for br in gmap.preimage_branches(ys):
        if not np.any(br.valid):
            continue
        x = br.pts[br.valid]
        from .torus import point_curve_distance

        d = point_curve_distance(x, gk)
        on = d < match_tol
        if not np.any(on):
            continue
        idx_valid = np.nonzero(br.valid)[0][on]
        xs = x[on]
        near = np.argmin(
            np.sum((ptsk[None, :, :] - xs[:, None, :] - np.round(ptsk[None, :, :] - xs[:, None, :])) ** 2, axis=2),
            axis=1,
        )
        vx = vk[near]
        okx, epsx = screen_probes(fam_h, xs, vx, probe)
        Jx = np.zeros(xs.shape[0])
        Jx[okx], _ = jump(gmap, h, xs[okx], vx[okx], probe, eps=epsx[okx])
        phi = gmap.weight_eval(xs)
        rhs[idx_valid] += phi * Jx
        ok_rhs[idx_valid] &= okx
    use = oky & ok_rhs
    return np.abs(Jy[use] - rhs[use]), int(np.count_nonzero(use))
