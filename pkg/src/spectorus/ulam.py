"""Ulam-type matrix discretization of the transfer operator.

A diagnostic, not a spectral truth source: eigenvalues with modulus inside
the proven lower bound on the essential spectral radius are artifacts of
the discretization and are labelled as such by the CLI.  Assembly uses
fixed-seed stratified Monte Carlo so runs reproduce bit-for-bit.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import eigs

from .errors import SpectorusError
from .torus import fr


@dataclass
class UlamMatrix:
    N: int
    mat: object  # scipy CSR, shape (N^2, N^2)
    samples_per_cell: int
    seed: int

    def column_sums(self):
        return np.asarray(self.mat.sum(axis=0)).ravel()


def _cell_index(P, N):
    i = np.minimum((P[:, 0] * N).astype(np.int64), N - 1)
    j = np.minimum((P[:, 1] * N).astype(np.int64), N - 1)
    return i * N + j


def build_ulam(gmap, N=64, samples_per_cell=16, seed=0):
    """M[i,j] ~ cell_j-average of (phi |det DF|) carried into cell_i.

    Stratified sampling: each cell is split into a near-square grid of
    strata with one uniform draw per stratum.  For the weight 1/|det DF|
    every sample deposits 1/samples, so column sums are exactly one.
    """
    if N > 256:
        raise SpectorusError("grid resolution capped at 256")
    rng = np.random.default_rng(seed)
    s1 = int(np.floor(np.sqrt(samples_per_cell)))
    while samples_per_cell % s1:
        s1 -= 1
    s2 = samples_per_cell // s1
    # stratum corners for one cell, replicated over the grid
    gx = (np.arange(s1) / s1)[:, None].repeat(s2, 1).ravel()
    gy = (np.arange(s2) / s2)[None, :].repeat(s1, 0).ravel()
    n_cells = N * N
    cols, rows, vals = [], [], []
    cell_ids = np.arange(n_cells)
    cx = (cell_ids // N) / N
    cy = (cell_ids % N) / N
    for s in range(samples_per_cell):
        u = rng.random(n_cells)
        v = rng.random(n_cells)
        px = cx + (gx[s] + u / s1) / N
        py = cy + (gy[s] + v / s2) / N
        P = np.column_stack([px, py])
        D = gmap.derivative(P)
        det = np.abs(D[:, 0, 0] * D[:, 1, 1] - D[:, 0, 1] * D[:, 1, 0])
        wgt = gmap.weight_eval(P) * det / samples_per_cell
        img = gmap.evaluate(P)
        rows.append(_cell_index(img, N))
        cols.append(cell_ids)
        vals.append(wgt)
    mat = coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_cells, n_cells),
    ).tocsr()
    return UlamMatrix(N=N, mat=mat, samples_per_cell=samples_per_cell, seed=seed)


def leading_spectrum(ulam, count=6, tol=1e-10, maxiter=20000):
    """Largest-modulus eigenvalues with per-pair residuals |Mv - lam v|.

    Dense solve for small matrices, implicitly restarted Arnoldi above.
    Returns (eigenvalues (count,), residuals (count,)), modulus-sorted.
    """
    mat = ulam.mat if isinstance(ulam, UlamMatrix) else ulam
    n = mat.shape[0]
    count = min(count, 20)
    if n <= 600 or count >= n - 1:
        dense = mat.toarray() if hasattr(mat, "toarray") else np.asarray(mat)
        w, V = np.linalg.eig(dense)
        order = np.argsort(-np.abs(w))[:count]
        w = w[order]
        V = V[:, order]
    else:
        try:
            w, V = eigs(mat, k=count, which="LM", tol=tol, maxiter=maxiter)
        except Exception as exc:  # ARPACC non-convergence surfaces as error
            raise SpectorusError(f"eigen-iteration failed: {exc}") from exc
        order = np.argsort(-np.abs(w))
        w = w[order]
        V = V[:, order]
    res = np.empty(w.shape[0])
    for i in range(w.shape[0]):
        v = V[:, i]
        res[i] = np.linalg.norm(mat @ v - w[i] * v) / max(np.linalg.norm(v), 1e-300)
    return w, res


def apply_to_observable(ulam, h):
    """M applied to the cell-average vector of a function h(P)->(n,)."""
    N = ulam.N
    g = (np.arange(N) + 0.5) / N
    gx, gy = np.meshgrid(g, g, indexing="ij")
    # cell averages via a 4x4 midpoint rule per cell
    sub = (np.arange(4) + 0.5) / 4 / N - 0.5 / N
    acc = np.zeros(N * N)
    for dx in sub:
        for dy in sub:
            P = np.column_stack([(gx + dx).ravel(), (gy + dy).ravel()])
            acc += np.asarray(h(P), dtype=float)
    hvec = acc / 16.0
    return ulam.mat @ hvec


def cell_average_transfer(gmap, h, N):
    """Cell averages of (L h) by the same midpoint rule, for comparison."""
    from .functionals import transfer_apply

    g = (np.arange(N) + 0.5) / N
    gx, gy = np.meshgrid(g, g, indexing="ij")
    sub = (np.arange(4) + 0.5) / 4 / N - 0.5 / N
    acc = np.zeros(N * N)
    for dx in sub:
        for dy in sub:
            P = np.column_stack([(gx + dx).ravel(), (gy + dy).ravel()])
            acc += transfer_apply(gmap, h, P)
    return acc / 16.0


def matrix_to_text(ulam):
    """Coordinate-triplet export: row, col, value."""
    coo = ulam.mat.tocoo()
    buf = io.StringIO()
    buf.write("row,col,value\n")
    for r, c, v in zip(coo.row, coo.col, coo.data):
        buf.write(f"{r},{c},{fr(v)}\n")
    return buf.getvalue()


def spectrum_to_csv(w, res, disc_radius=None):
    buf = io.StringIO()
    if disc_radius is None:
        buf.write("re,im,modulus,residual\n")
        for lam, r in zip(w, res):
            buf.write(f"{fr(lam.real)},{fr(lam.imag)},{fr(abs(lam))},{fr(r)}\n")
    else:
        buf.write("re,im,modulus,residual,disc_radius,certifiable\n")
        for lam, r in zip(w, res):
            cert = "false" if abs(lam) <= disc_radius else "true"
            buf.write(
                f"{fr(lam.real)},{fr(lam.imag)},{fr(abs(lam))},{fr(r)},{fr(disc_radius)},{cert}\n"
            )
    return buf.getvalue()
