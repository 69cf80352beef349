"""The map families: affine skew products, cocycles over expanding circle
maps, slit-perturbed doublings, plus smooth control maps.

Every map exposes vectorized evaluation, derivative, weight, bounded
branch-wise preimage enumeration and its discontinuity components.  Points
sitting on a discontinuity component are evaluated through the one-sided
C^r extension, selected by a (component, side) context so no limits are
taken numerically.  All maps are immutable after construction and all
operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NewtonFailure, SingularDerivative
from .torus import PolyCurve, frac as _FRAC, wrap


@dataclass(frozen=True)
class Weight:
    """Transfer-operator weight.  kinds: unit, inverse_det, custom."""

    kind: str = "inverse_det"
    fn: object = None
    inf_bound: float = 0.0
    sup_bound: float = np.inf

    def label(self):
        return self.kind


@dataclass(frozen=True)
class GammaComponent:
    """One C^1 component of the discontinuity set.

    plus_normal points toward the side labelled +1.
    """

    comp: int
    name: str
    p0: tuple
    p1: tuple  # endpoints in lifted coordinates (p1 may exceed 1 for circles)
    plus_normal: tuple

    def curve(self, n=257, side=0):
        path = np.array([self.p0, self.p1], dtype=float)
        c = PolyCurve.from_lifted_path(path, n=n, side=side, comp=self.comp)
        for seg in c.segments:
            seg.side = side
            seg.comp = self.comp
        return c

    @property
    def length(self):
        return float(np.linalg.norm(np.subtract(self.p1, self.p0)))


@dataclass
class PreimageBranch:
    pts: np.ndarray
    valid: np.ndarray
    key: str


@dataclass(frozen=True)
class Preimage:
    """Single-point preimage record: location, branch id, local derivative."""

    point: np.ndarray
    branch: str
    deriv: np.ndarray


class TorusMap:
    """Base class; subclasses implement the vectorized kernel methods."""

    name = "abstract"
    preimage_bound = 0

    def __init__(self, weight=None):
        self.weight = weight or Weight("inverse_det")

    # subclass interface ---------------------------------------------------
    def evaluate(self, P, ctx=None):
        raise NotImplementedError

    def derivative(self, P, ctx=None):
        raise NotImplementedError

    def preimage_branches(self, Q):
        raise NotImplementedError

    def discontinuity(self):
        return []

    def sigma_points(self):
        return np.zeros((0, 2))

    def branch_symbols(self, P):
        raise NotImplementedError

    def default_curve(self, n=513):
        raise NotImplementedError

    # shared ---------------------------------------------------------------
    def weight_eval(self, P, ctx=None):
        w = self.weight
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if w.kind == "unit":
            return np.ones(P.shape[0])
        if w.kind == "inverse_det":
            D = self.derivative(P, ctx=ctx)
            det = np.abs(D[:, 0, 0] * D[:, 1, 1] - D[:, 0, 1] * D[:, 1, 0])
            if np.any(det < 1e-14):
                raise SingularDerivative("derivative determinant vanished")
            return 1.0 / det
        if w.kind == "custom":
            return np.asarray(w.fn(P), dtype=float)
        raise ConfigError(f"unknown weight kind {w.kind!r}")

    def preimages(self, y, tol_map=1e-10):
        """Complete preimage list of a single target point."""
        y = np.asarray(y, dtype=float)
        out = []
        for br in self.preimage_branches(y[None, :]):
            if not br.valid[0]:
                continue
            p = br.pts[0]
            img = self.evaluate(p[None, :])[0]
            d = np.sqrt(np.sum((img - y - np.round(img - y)) ** 2))
            if d > tol_map:
                raise NewtonFailure(br.key, f"round-trip error {d:.2e}")
            out.append(Preimage(point=p, branch=br.key, deriv=self.derivative(p[None, :])[0]))
        return out

    def orbit_symbols(self, P, depth):
        """(n, depth) branch itinerary under forward iteration."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        out = np.empty((P.shape[0], depth), dtype=np.int64)
        cur = P
        for j in range(depth):
            out[:, j] = self.branch_symbols(cur)
            cur = self.evaluate(cur)
        return out

    def params_text(self):
        return ""


def _as_pts(P):
    return np.atleast_2d(np.asarray(P, dtype=float))


def _ctx_force_left(x, ctx, comp0=0):
    """Shift x by +1 where a side=-1 context applies across a circle at x=c
    (points are stored at the circle, i.e. x == c)."""
    if ctx is None:
        return x
    comp, side = ctx
    if comp == comp0 and side < 0:
        return np.where(x < 0.5, x + 1.0, x)
    return x


# ---------------------------------------------------------------------------
# F_A : (x, y) -> (beta x + y, 2 y)  mod 1
# ---------------------------------------------------------------------------


class AffineSkewMap(TorusMap):
    """Piecewise affine expanding skew product with constant derivative
    [[beta, 1], [0, 2]].  Discontinuous across the vertical circle x = 0
    whenever beta is not an integer."""

    name = "affine_a"

    def __init__(self, beta=np.e, weight=None):
        super().__init__(weight)
        beta = float(beta)
        if beta <= 1.0:
            raise ConfigError("affine_a requires beta > 1")
        if float(beta).is_integer():
            raise ConfigError("affine_a requires non-integer beta (no jump otherwise)")
        self.beta = beta
        # non-algebraicity is assumed, not certifiable; checked downstream
        # only through the numerical disjointness margins
        self.assumed_non_algebraic = True
        self._D = np.array([[beta, 1.0], [0.0, 2.0]])
        self.lip_bound = float(np.linalg.norm(self._D, 2))
        self.sigma_min = float(np.linalg.svd(self._D, compute_uv=False)[-1])
        self.preimage_bound = 2 * (int(np.ceil(beta)) + 1)

    def evaluate(self, P, ctx=None):
        P = _as_pts(P)
        x = _ctx_force_left(P[:, 0], ctx)
        y = P[:, 1]
        return np.column_stack([_FRAC(self.beta * x + y), _FRAC(2.0 * y)])

    def derivative(self, P, ctx=None):
        P = _as_pts(P)
        return np.broadcast_to(self._D, (P.shape[0], 2, 2)).copy()

    def preimage_branches(self, Q):
        Q = _as_pts(Q)
        u, v = Q[:, 0], Q[:, 1]
        out = []
        for m in (0, 1):
            y = (v + m) / 2.0
            for n in range(int(np.ceil(self.beta)) + 2):
                x = (u + n - y) / self.beta
                valid = (x >= 0.0) & (x < 1.0)
                pts = np.column_stack([x, y])
                out.append(PreimageBranch(pts=pts, valid=valid, key=f"y{m}x{n}"))
        return out

    def discontinuity(self):
        return [GammaComponent(0, "x0", (0.0, 0.0), (0.0, 1.0), (1.0, 0.0))]

    def default_curve(self, n=513):
        # the x -> 1^- side of the circle at x = 0
        return self.discontinuity()[0].curve(n=n, side=-1)

    def branch_symbols(self, P):
        P = _as_pts(P)
        nx = np.floor(self.beta * P[:, 0] + P[:, 1]).astype(np.int64)
        ny = np.floor(2.0 * P[:, 1]).astype(np.int64)
        return nx * 2 + ny

    def params_text(self):
        return f"beta = {self.beta!r}"


# ---------------------------------------------------------------------------
# one-dimensional expanding base maps for the cocycle family
# ---------------------------------------------------------------------------


class OneDPiecewiseMap:
    """Expanding circle map given by a strictly increasing lift on [0,1].

    The circle map x -> frac(lift(x)) is smooth except at x = 0, where it
    jumps by frac(lift(1) - lift(0)) when this is not an integer.  Branch
    inverses come from the closed form when affine, else from a safeguarded
    bisection/Newton solve (valid since lift' >= lambda_min > 1).
    """

    def __init__(self, lift, dlift, lambda_min, inverse=None, label="1d"):
        self.lift = lift
        self.dlift = dlift
        self.lambda_min = float(lambda_min)
        if self.lambda_min <= 1.0:
            raise ConfigError("base map must be uniformly expanding")
        self.inverse = inverse
        self.label = label
        self.lift0 = float(lift(np.array([0.0]))[0])
        self.lift1 = float(lift(np.array([1.0]))[0])

    @classmethod
    def affine(cls, beta):
        beta = float(beta)
        return cls(
            lift=lambda x: beta * x,
            dlift=lambda x: np.full_like(np.asarray(x, dtype=float), beta),
            lambda_min=beta,
            inverse=lambda u: u / beta,
            label=f"beta-map({beta:g})",
        )

    def eval(self, x):
        return _FRAC(self.lift(np.asarray(x, dtype=float)))

    def eval_sided0(self, side):
        """One-sided value at the wrap point x = 0."""
        return _FRAC(np.array([self.lift0 if side >= 0 else self.lift1]))[0]

    def deriv(self, x):
        return self.dlift(np.asarray(x, dtype=float))

    def is_discontinuous_at_zero(self):
        return abs((self.lift1 - self.lift0) - round(self.lift1 - self.lift0)) > 1e-12

    def branch_index(self, x):
        return np.floor(self.lift(np.asarray(x, dtype=float))).astype(np.int64)

    def n_branches(self):
        return int(np.ceil(self.lift1)) - int(np.floor(self.lift0)) + 1

    def inverse_branches(self, u):
        """All circle preimages of u: list of (x, valid, n)."""
        u = np.asarray(u, dtype=float)
        out = []
        n0 = int(np.floor(self.lift0)) - 1
        n1 = int(np.ceil(self.lift1)) + 1
        for n in range(n0, n1 + 1):
            target = u + n
            valid = (target >= self.lift0) & (target < self.lift1)
            if not np.any(valid):
                continue
            x = self._solve(target, valid)
            valid = valid & (x >= 0.0) & (x < 1.0)
            out.append((x, valid, n))
        return out

    def _solve(self, target, valid):
        if self.inverse is not None:
            return self.inverse(target)
        lo = np.zeros_like(target)
        hi = np.ones_like(target)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            f = self.lift(mid) - target
            lo = np.where(f < 0.0, mid, lo)
            hi = np.where(f < 0.0, hi, mid)
        x = 0.5 * (lo + hi)
        for _ in range(3):
            x = np.clip(x - (self.lift(x) - target) / self.dlift(x), 0.0, 1.0)
        err = np.abs(self.lift(x) - target)[valid]
        if err.size and np.max(err) > 1e-9:
            raise NewtonFailure(self.label, f"residual {np.max(err):.2e}")
        return x


# ---------------------------------------------------------------------------
# F_B : (x, y) -> (T(x), q y + p x + amp sin(2 pi x))  mod 1
# ---------------------------------------------------------------------------


class CocycleMap(TorusMap):
    """Cocycle over an expanding circle map; the base's wrap discontinuity
    lifts to the vertical circle x = 0.  The fibre map is surjective of
    degree q on every fibre (p integer keeps it smooth on the torus)."""

    name = "cocycle_b"

    def __init__(self, base=None, q=2, p=0, amp=0.25, beta=np.e, weight=None):
        super().__init__(weight)
        self.base = base if base is not None else OneDPiecewiseMap.affine(beta)
        if int(q) < 1:
            raise ConfigError("fibre degree q must be >= 1")
        if int(p) != p:
            raise ConfigError("fibre shear p must be an integer")
        self.q = int(q)
        self.p = int(p)
        self.amp = float(amp)
        dmax = max(abs(self.base.dlift(np.linspace(0, 1, 2049))).max(), self.q)
        self.lip_bound = float(dmax + abs(self.p) + 2 * np.pi * abs(self.amp) + 1)
        self.sigma_min = 1.0  # coarse; exact values not needed for budgeting
        self.preimage_bound = (self.base.n_branches() + 1) * self.q

    # fibre lift: q y + p x + amp sin(2 pi x)
    def _c(self, x):
        return self.p * x + self.amp * np.sin(2.0 * np.pi * x)

    def _dc(self, x):
        return self.p + 2.0 * np.pi * self.amp * np.cos(2.0 * np.pi * x)

    def evaluate(self, P, ctx=None):
        P = _as_pts(P)
        x = _ctx_force_left(P[:, 0], ctx)
        y = P[:, 1]
        u = _FRAC(self.base.lift(x))
        v = _FRAC(self.q * y + self._c(x))
        return np.column_stack([u, v])

    def derivative(self, P, ctx=None):
        P = _as_pts(P)
        x = _ctx_force_left(P[:, 0], ctx)
        n = P.shape[0]
        D = np.zeros((n, 2, 2))
        D[:, 0, 0] = self.base.deriv(x)
        D[:, 1, 0] = self._dc(x)
        D[:, 1, 1] = self.q
        return D

    def preimage_branches(self, Q):
        Q = _as_pts(Q)
        u, v = Q[:, 0], Q[:, 1]
        out = []
        for x, xvalid, n in self.base.inverse_branches(u):
            c = self._c(x)
            for m in range(self.q):
                # q y + c = v mod 1  ->  y = (v - c + m)/q shifted into [0,1)
                y = _FRAC((v - c + m) / self.q)
                pts = np.column_stack([x, y])
                out.append(PreimageBranch(pts=pts, valid=xvalid.copy(), key=f"T{n}S{m}"))
        return out

    def discontinuity(self):
        if not self.base.is_discontinuous_at_zero():
            return []
        return [GammaComponent(0, "x0", (0.0, 0.0), (0.0, 1.0), (1.0, 0.0))]

    def default_curve(self, n=513):
        comps = self.discontinuity()
        if not comps:
            raise ConfigError("base map is continuous; no discontinuity curve")
        return comps[0].curve(n=n, side=-1)

    def branch_symbols(self, P):
        P = _as_pts(P)
        x, y = P[:, 0], P[:, 1]
        bx = self.base.branch_index(x) - int(np.floor(self.base.lift0))
        by = np.floor(self.q * y + self._c(x)).astype(np.int64) + abs(self.p) + 2
        stride = self.q + 2 * abs(self.p) + 6
        return bx * stride + by

    def params_text(self):
        return f"base = {self.base.label}\nq = {self.q}\np = {self.p}\namp = {self.amp!r}"


# ---------------------------------------------------------------------------
# F_C : doubling with an epsilon slit
# ---------------------------------------------------------------------------


def _rho(u):
    """C^2 monotone cutoff: 1 on u<=0, 0 on u>=1 (quintic smoothstep)."""
    u = np.clip(u, 0.0, 1.0)
    return 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _drho(u):
    u = np.asarray(u, dtype=float)
    inside = (u > 0.0) & (u < 1.0)
    uu = np.where(inside, u, 0.0)
    return np.where(inside, -30.0 * uu * uu * (1.0 - uu) ** 2, 0.0)


def search_slit_epsilon(target=0.015, k_max=40, clearance=1e-3, pair_gap=5e-4):
    """Smallest admissible dyadic epsilon >= target.

    Dyadic (j * 2^-52) so the doubling orbit of x0 - eps is exact in binary
    floating point; conditions keep the orbit clear of the slit interval,
    of the wrap point, and pairwise separated, for k <= k_max.
    """
    scale = 2.0**-52
    j = int(np.ceil(target / scale)) | 1
    for _ in range(200000):
        eps = j * scale
        if _slit_eps_ok(eps, k_max, clearance, pair_gap):
            return eps
        j += 2
    raise ConfigError("no admissible slit epsilon found near the target")


def _slit_eps_ok(eps, k_max, clearance, pair_gap):
    x0 = 0.5
    a = x0 - eps
    orbit = np.empty(k_max)
    for k in range(k_max):
        a = 2.0 * a
        a -= np.floor(a)
        orbit[k] = a
    if np.any((orbit > x0 - clearance) & (orbit < x0 + eps + clearance)):
        return False
    if np.any((orbit < clearance) | (orbit > 1.0 - clearance)):
        return False
    d = np.abs(orbit[:, None] - orbit[None, :])
    d = np.minimum(d, 1.0 - d)
    iu = np.triu_indices(k_max, 1)
    return bool(np.all(d[iu] >= pair_gap))


class SlitMap(TorusMap):
    """Doubling in both coordinates, perturbed inside an epsilon-sized
    rectangle J so that a short vertical slit becomes a genuine jump.

    The perturbation pulls the left edge of J back by epsilon before
    doubling: the map is smooth on the complement of three sides of dJ.
    """

    name = "slit_c"

    def __init__(self, eps=None, k_max=40, weight=None):
        super().__init__(weight)
        self.x0 = 0.5
        self.y0 = 0.5
        if eps is None:
            eps = search_slit_epsilon(k_max=k_max)
        else:
            eps = float(eps)
            if eps <= 0 or eps >= 0.2:
                raise ConfigError("slit epsilon must lie in (0, 0.2)")
            if not _slit_eps_ok(eps, k_max, 1e-3, 5e-4):
                raise ConfigError(
                    "slit epsilon rejected: orbit meets the slit or degenerates "
                    f"within {k_max} steps"
                )
        self.eps = eps
        self.k_max = int(k_max)
        self.lip_bound = 2.0 * (1.0 + 30.0 / 16.0) + 0.5
        self.sigma_min = 2.0
        self.preimage_bound = 8

    def slit_orbit(self, k_max=None):
        """a_k = forward doubling orbit of x0 - eps (a_0 = x0 - eps)."""
        k_max = k_max or self.k_max
        a = np.empty(k_max + 1)
        a[0] = self.x0 - self.eps
        for k in range(k_max):
            v = 2.0 * a[k]
            a[k + 1] = v - np.floor(v)
        return a

    def _in_J(self, x, y):
        return (
            (x >= self.x0)
            & (x <= self.x0 + self.eps)
            & (y >= self.y0 - self.eps)
            & (y <= self.y0 + self.eps)
        )

    def _sx(self, x):
        return x - self.eps * _rho((x - self.x0) / self.eps)

    def _dsx(self, x):
        return 1.0 - _drho((x - self.x0) / self.eps)

    def _branch_mask(self, P, ctx):
        x, y = P[:, 0], P[:, 1]
        if ctx is None:
            return self._in_J(x, y)
        comp, side = ctx
        if comp == 0:  # vertical slit edge: +1 side is inside J
            return np.full(x.shape, side > 0)
        if comp == 1:  # bottom edge of J: +1 side (greater y) is inside
            return np.full(x.shape, side > 0)
        if comp == 2:  # top edge of J: +1 side is outside
            return np.full(x.shape, side < 0)
        return self._in_J(x, y)

    def evaluate(self, P, ctx=None):
        P = _as_pts(P)
        x, y = P[:, 0], P[:, 1]
        inJ = self._branch_mask(P, ctx)
        w = np.where(inJ, self._sx(x), x)
        return np.column_stack([_FRAC(2.0 * w), _FRAC(2.0 * y)])

    def derivative(self, P, ctx=None):
        P = _as_pts(P)
        x = P[:, 0]
        inJ = self._branch_mask(P, ctx)
        n = P.shape[0]
        D = np.zeros((n, 2, 2))
        D[:, 0, 0] = np.where(inJ, 2.0 * self._dsx(x), 2.0)
        D[:, 1, 1] = 2.0
        return D

    def _sx_inverse(self, w):
        """Solve x - eps*rho((x-x0)/eps) = w on [x0, x0+eps]."""
        lo = np.full_like(w, self.x0)
        hi = np.full_like(w, self.x0 + self.eps)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            f = self._sx(mid) - w
            lo = np.where(f < 0.0, mid, lo)
            hi = np.where(f < 0.0, hi, mid)
        x = 0.5 * (lo + hi)
        for _ in range(3):
            x = np.clip(x - (self._sx(x) - w) / self._dsx(x), self.x0, self.x0 + self.eps)
        return x

    def preimage_branches(self, Q):
        Q = _as_pts(Q)
        u, v = Q[:, 0], Q[:, 1]
        out = []
        for i in (0, 1):
            w = (u + i) / 2.0
            for j in (0, 1):
                z = (v + j) / 2.0
                in_strip = (
                    (w >= self.x0 - self.eps)
                    & (w <= self.x0 + self.eps)
                    & (z >= self.y0 - self.eps)
                    & (z <= self.y0 + self.eps)
                )
                # identity branch: valid wherever (w, z) is not interior to J
                id_valid = ~(
                    (w > self.x0) & (w < self.x0 + self.eps) & (z > self.y0 - self.eps) & (z < self.y0 + self.eps)
                )
                out.append(
                    PreimageBranch(
                        pts=np.column_stack([w, z]), valid=id_valid, key=f"id{i}{j}"
                    )
                )
                if np.any(in_strip):
                    xj = np.zeros_like(w)
                    idx = np.nonzero(in_strip)[0]
                    xj[idx] = self._sx_inverse(w[idx])
                    out.append(
                        PreimageBranch(
                            pts=np.column_stack([xj, z]),
                            valid=in_strip.copy(),
                            key=f"J{i}{j}",
                        )
                    )
        return out

    def discontinuity(self):
        x0, y0, e = self.x0, self.y0, self.eps
        return [
            GammaComponent(0, "slit", (x0, y0 - e), (x0, y0 + e), (1.0, 0.0)),
            GammaComponent(1, "bottom", (x0, y0 - e), (x0 + e, y0 - e), (0.0, 1.0)),
            GammaComponent(2, "top", (x0, y0 + e), (x0 + e, y0 + e), (0.0, 1.0)),
        ]

    def sigma_points(self):
        return np.array(
            [[self.x0, self.y0 - self.eps], [self.x0, self.y0 + self.eps]], dtype=float
        )

    def default_curve(self, n=257):
        # the slit edge approached from inside J
        return self.discontinuity()[0].curve(n=n, side=+1)

    def branch_symbols(self, P):
        P = _as_pts(P)
        x, y = P[:, 0], P[:, 1]
        inJ = self._in_J(x, y)
        w = np.where(inJ, self._sx(x), x)
        sym = np.floor(2.0 * w).astype(np.int64) * 2 + np.floor(2.0 * y).astype(np.int64)
        return sym + 4 * inJ.astype(np.int64)

    def params_text(self):
        return f"eps = {self.eps!r}\nx0 = {self.x0!r}\ny0 = {self.y0!r}"


# ---------------------------------------------------------------------------
# smooth control maps
# ---------------------------------------------------------------------------


class DoublingMap(TorusMap):
    """Smooth control map (2x, 2y): expanding, continuous, degree 4."""

    name = "doubling"
    preimage_bound = 4

    def __init__(self, weight=None):
        super().__init__(weight)
        self.lip_bound = 2.0
        self.sigma_min = 2.0

    def evaluate(self, P, ctx=None):
        P = _as_pts(P)
        return _FRAC(2.0 * P)

    def derivative(self, P, ctx=None):
        P = _as_pts(P)
        D = np.zeros((P.shape[0], 2, 2))
        D[:, 0, 0] = 2.0
        D[:, 1, 1] = 2.0
        return D

    def preimage_branches(self, Q):
        Q = _as_pts(Q)
        out = []
        ok = np.ones(Q.shape[0], dtype=bool)
        for i in (0, 1):
            for j in (0, 1):
                pts = np.column_stack([(Q[:, 0] + i) / 2.0, (Q[:, 1] + j) / 2.0])
                out.append(PreimageBranch(pts=pts, valid=ok.copy(), key=f"d{i}{j}"))
        return out

    def branch_symbols(self, P):
        P = _as_pts(P)
        return np.floor(2.0 * P[:, 0]).astype(np.int64) * 2 + np.floor(2.0 * P[:, 1]).astype(
            np.int64
        )

    def default_curve(self, n=257):
        c = PolyCurve.vertical_circle(0.5, n=n)
        for seg in c.segments:
            seg.comp = 0
        return c


class IdentityMap(TorusMap):
    """Identity control map."""

    name = "identity"
    preimage_bound = 1

    def __init__(self, weight=None):
        super().__init__(weight or Weight("unit"))
        self.lip_bound = 1.0
        self.sigma_min = 1.0

    def evaluate(self, P, ctx=None):
        return wrap(_as_pts(P))

    def derivative(self, P, ctx=None):
        P = _as_pts(P)
        D = np.zeros((P.shape[0], 2, 2))
        D[:, 0, 0] = 1.0
        D[:, 1, 1] = 1.0
        return D

    def preimage_branches(self, Q):
        Q = _as_pts(Q)
        return [PreimageBranch(pts=Q.copy(), valid=np.ones(Q.shape[0], bool), key="id")]

    def branch_symbols(self, P):
        return np.zeros(_as_pts(P).shape[0], dtype=np.int64)

    def default_curve(self, n=257):
        return PolyCurve.vertical_circle(0.5, n=n)


# ---------------------------------------------------------------------------


_WEIGHTS = {"unit": Weight("unit"), "inverse_det": Weight("inverse_det")}


def make_weight(kind, fn=None):
    if kind in _WEIGHTS:
        return _WEIGHTS[kind]
    if kind == "custom":
        if fn is None:
            raise ConfigError("custom weight needs an evaluator")
        return Weight("custom", fn=fn)
    raise ConfigError(f"unknown weight kind {kind!r}")


def make_map(family, weight="inverse_det", **params):
    """Factory: family in {affine_a, cocycle_b, slit_c, doubling, identity}."""
    w = weight if isinstance(weight, Weight) else make_weight(weight)
    if family == "affine_a":
        return AffineSkewMap(beta=params.get("beta", np.e), weight=w)
    if family == "cocycle_b":
        return CocycleMap(
            base=params.get("base"),
            beta=params.get("beta", np.e),
            q=params.get("q", 2),
            p=params.get("p", 0),
            amp=params.get("amp", 0.25),
            weight=w,
        )
    if family == "slit_c":
        return SlitMap(eps=params.get("eps"), k_max=params.get("k_max", 40), weight=w)
    if family == "doubling":
        return DoublingMap(weight=w)
    if family == "identity":
        return IdentityMap(weight=w)
    raise ConfigError(f"unknown map family {family!r}")
