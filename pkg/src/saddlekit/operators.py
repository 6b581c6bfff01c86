"""Finite-difference assembly of the (s, t)-reduced Laplacian.

For functions of s = |x^1|, t = |x^2| in R^{2m} the Laplacian reads
u_ss + u_tt + (m - 1)(u_s / s + u_t / t). On a uniform lattice we use
3-point second differences and central first differences. On a coordinate
axis (s = 0 or t = 0) the first-order term is replaced by its limit
(m - 1) u_tt, with a reflected ghost node, giving m u_tt in total. Where
the central first difference would produce a positive off-diagonal entry,
i.e. (m - 1) h / (2 s) > 1, it is replaced by a forward difference so the
matrix stays an M-matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

RESIDUAL_TOL = 1e-11


class LinearSolveError(RuntimeError):
    pass


class DiagonalDominanceError(ValueError):
    pass


@dataclass
class Assembled:
    """Operator restricted to the unknown nodes of a lattice.

    ``A`` acts on the unknowns; ``B`` couples unknowns to fixed (Dirichlet)
    lattice values, so the discrete equation is ``A x + B v = rhs`` with ``v``
    the full lattice array flattened.
    """

    A: sp.csc_matrix
    B: sp.csr_matrix
    index: np.ndarray          # lattice -> unknown number, -1 for fixed nodes
    unknown: np.ndarray        # boolean lattice mask
    shape: tuple[int, int]

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def gather(self, full: np.ndarray) -> np.ndarray:
        return full[self.unknown]

    def scatter(self, x: np.ndarray, full: np.ndarray) -> np.ndarray:
        out = np.array(full, dtype=float, copy=True)
        out[self.unknown] = x
        return out

    def bc_rhs(self, full: np.ndarray) -> np.ndarray:
        v = np.where(np.isfinite(full), full, 0.0).ravel()
        return -(self.B @ v)


def assemble(s: np.ndarray, t: np.ndarray, h: float, m: int, unknown: np.ndarray,
             diag_shift=0.0) -> Assembled:
    """Assemble -Delta_reduced + diag_shift on the nodes flagged ``unknown``.

    ``s`` and ``t`` are 2-D lattice coordinate arrays indexed [i, j] with s
    varying along i and t along j. ``diag_shift`` is a scalar or a lattice array.
    """
    shape = s.shape
    ni, nj = shape
    index = -np.ones(shape, dtype=np.int64)
    index[unknown] = np.arange(int(unknown.sum()))
    ii, jj = np.nonzero(unknown)
    p = index[ii, jj]
    sv = s[ii, jj]
    tv = t[ii, jj]
    inv_h2 = 1.0 / h**2
    shift = np.broadcast_to(np.asarray(diag_shift, dtype=float), shape)[ii, jj]
    diag = shift.copy()

    rows, cols, vals = [], [], []          # couplings in full-lattice numbering

    def couple(mask, ti, tj, coef):
        if not np.any(mask):
            return
        ti, tj = ti[mask], tj[mask]
        if np.any((ti < 0) | (ti >= ni) | (tj < 0) | (tj >= nj)):
            raise ValueError("unknown node on the lattice edge without a reflection axis")
        rows.append(p[mask])
        cols.append(ti * nj + tj)
        vals.append(coef[mask] if np.ndim(coef) else np.full(int(mask.sum()), coef))

    for coord, di, dj in ((sv, 1, 0), (tv, 0, 1)):
        on_axis = coord == 0.0
        safe = np.where(on_axis, 1.0, coord)
        first = (m - 1) / (2.0 * h * safe)
        upwind = (~on_axis) & ((m - 1) * h / (2.0 * safe) > 1.0)
        central = (~on_axis) & ~upwind
        # central: -(u+ - 2u + u-)/h^2 - (m-1)(u+ - u-)/(2 h c)
        couple(central, ii + di, jj + dj, -inv_h2 - first)
        couple(central, ii - di, jj - dj, -inv_h2 + first)
        # forward first difference
        couple(upwind, ii + di, jj + dj, -inv_h2 - 2.0 * first)
        couple(upwind, ii - di, jj - dj, -inv_h2 * np.ones_like(first))
        diag += np.where(upwind, 2.0 * inv_h2 + 2.0 * first, 2.0 * inv_h2)
        # axis: -m (2 u+ - 2u)/h^2, ghost node reflected onto u+
        couple(on_axis, ii + di, jj + dj, -2.0 * m * inv_h2)
        diag = np.where(on_axis, diag - 2.0 * inv_h2 + 2.0 * m * inv_h2, diag)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    target = index.ravel()[cols]
    inner = target >= 0
    n = p.size
    A = sp.coo_matrix((vals[inner], (rows[inner], target[inner])), shape=(n, n))
    A = (A + sp.diags(diag, format="coo", shape=(n, n))).tocsc()
    B = sp.coo_matrix((vals[~inner], (rows[~inner], cols[~inner])),
                      shape=(n, ni * nj)).tocsr()
    return Assembled(A=A, B=B, index=index, unknown=unknown.copy(), shape=shape)


def check_diagonal_dominance(op: Assembled, rtol: float = 1e-12) -> None:
    """Raise if some row has a positive off-diagonal entry or loses weak dominance."""
    A = op.A.tocsr()
    diag = A.diagonal()
    off = A - sp.diags(diag)
    absoff = abs(off).sum(axis=1).A1 + abs(op.B).sum(axis=1).A1
    positive = (off.max(axis=1).toarray().ravel() > 0) | (op.B.max(axis=1).toarray().ravel() > 0)
    bad = positive | (absoff > diag * (1 + rtol))
    if np.any(bad):
        k = int(np.argmax(bad))
        raise DiagonalDominanceError(
            f"operator row {k} is not diagonally dominant; use a smaller h")


class FactorizedOperator:
    """Sparse LU of an assembled operator with a relative-residual contract."""

    def __init__(self, A: sp.csc_matrix, residual_tol: float = RESIDUAL_TOL):
        self.A = A
        self.residual_tol = residual_tol
        self._lu = splu(A.tocsc())

    def solve(self, b: np.ndarray) -> tuple[np.ndarray, float]:
        x = self._lu.solve(b)
        nb = np.linalg.norm(b)
        if nb == 0.0:
            return x, 0.0
        r = b - self.A @ x
        res = np.linalg.norm(r) / nb
        if res > self.residual_tol:
            x = x + self._lu.solve(r)
            res = np.linalg.norm(b - self.A @ x) / nb
            if res > self.residual_tol:
                raise LinearSolveError(f"relative residual {res:.2e} above {self.residual_tol:.0e}")
        return x, float(res)
