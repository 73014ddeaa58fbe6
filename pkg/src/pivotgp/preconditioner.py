"""Low-rank triangular preconditioner built from a partial Cholesky factor.

The preconditioner factor is ``Lt = Dt + L @ E.T`` where L holds the first M
columns of the partial factor (shared storage, pivoted order), E selects the
first M coordinates, and Dt is a diagonal of residual standard deviations,
zero on the first M positions.  Lt is lower triangular, and Lt @ Lt.T equals
the low-rank-plus-diagonal reconstruction diag(G - Khat) + Khat of the
factorized matrix, so applying its inverse costs O(N M) per vector.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular


class LowRankTriangular:
    """Triangular preconditioner factor in pivoted order.

    Attributes
    ----------
    cols : ndarray
        The M shared factor columns, pivoted rows, shape (n, m).
    resid_diag : ndarray
        Diagonal part Dt, length n; zero on the first m positions.
    perm, inv_perm : ndarray of int
        Pivot permutation and its inverse, for callers that need to move
        between user order and pivoted order.
    """

    def __init__(self, cols, resid_diag, perm):
        self.cols = cols
        self.resid_diag = resid_diag
        self.perm = perm
        self.n = cols.shape[0]
        self.m = cols.shape[1]
        self.inv_perm = np.empty(self.n, dtype=int)
        self.inv_perm[perm] = np.arange(self.n)

    def __repr__(self):
        return f"LowRankTriangular(n={self.n}, m={self.m})"

    def dense(self):
        """Materialize Lt as a dense lower-triangular matrix (tests only)."""
        Lt = np.diag(self.resid_diag)
        Lt[:, : self.m] += self.cols
        return Lt

    def solve_lower(self, b):
        """Solve ``Lt x = b`` with b in pivoted order.

        The top m-by-m triangle is solved densely; every later coordinate
        needs only its row of the shared columns and one division.
        """
        b = np.asarray(b, dtype=float)
        m = self.m
        x = np.empty(self.n)
        if m > 0:
            x[:m] = solve_triangular(self.cols[:m], b[:m], lower=True)
            x[m:] = (b[m:] - np.einsum("jk,k->j", self.cols[m:], x[:m]))
            x[m:] /= self.resid_diag[m:]
        else:
            x[:] = b / self.resid_diag
        return x

    def solve_upper(self, b):
        """Solve ``Lt.T x = b`` with b in pivoted order."""
        b = np.asarray(b, dtype=float)
        m = self.m
        x = np.empty(self.n)
        x[m:] = b[m:] / self.resid_diag[m:]
        if m > 0:
            rhs = b[:m] - np.einsum("jk,j->k", self.cols[m:], x[m:])
            x[:m] = solve_triangular(self.cols[:m], rhs, lower=True, trans="T")
        return x

    def apply_inverse(self, v):
        """Apply ``(Lt Lt.T)^{-1}`` to a pivoted-order vector."""
        return self.solve_upper(self.solve_lower(v))


def build_preconditioner(pc, floor=None):
    """Build the triangular preconditioner from a partial factor.

    The residual diagonal is floored at ``1e-12`` times the diagonal scale so
    an exactly low-rank residual still yields a positive-definite
    preconditioner.  Columns are shared with the factor, not copied.
    """
    if floor is None:
        scale = float(np.max(pc.initial_diag)) if pc.n else 1.0
        floor = 1e-12 * scale
    dt = np.sqrt(np.maximum(pc.d, floor))
    dt[: pc.m] = 0.0
    return LowRankTriangular(pc.L[:, : pc.m], dt, pc.perm)
