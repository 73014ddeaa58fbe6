"""Preconditioned conjugate gradients with iteration accounting.

Left-preconditioned CG on the pivoted system; the permutation into and out of
pivoted order happens here, so preconditioner solves stay permutation-free.
The per-iteration convergence test uses the recursive residual; the true
residual is recomputed every 25 iterations to stop drift, and once more to
confirm before convergence is declared.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericalDivergence

_REFRESH_EVERY = 25


@dataclass
class PcgReport:
    """Outcome of one solve.

    ``residual_history[k]`` is the relative residual 2-norm after iteration
    k+1 (recursive, refreshed with the true residual at checkpoints); the
    final entry is a recomputed true residual whenever ``converged``.
    """

    solution: np.ndarray
    iterations: int
    converged: bool
    residual_history: np.ndarray = field(repr=False)
    wall_time: float


def _dot(a, b):
    return float(np.einsum("i,i->", a, b))


def pcg_solve(op, y, preconditioner=None, tol=1e-4, max_iter=None):
    """Solve ``G x = y`` for a symmetric positive definite operator.

    Parameters
    ----------
    op : operator with ``matvec`` and ``n``
        The system matrix, typically a noisy-mode Gram operator.
    y : ndarray
        Right-hand side in user order.
    preconditioner : LowRankTriangular, optional
        Applied through its ``apply_inverse``; identity when absent.
    tol : float
        Relative residual target, ``||y - G x|| <= tol * ||y||``.
    max_iter : int, optional
        Iteration cap, default ``10 * n``.  Exhaustion is reported, not
        raised.

    Returns
    -------
    PcgReport

    Raises
    ------
    NumericalDivergence
        When a recurrence produces a non-finite value or the operator turns
        out not to be positive definite.
    """
    n = op.n
    y = np.asarray(y, dtype=float).ravel()
    if y.size != n:
        raise ValueError(f"right-hand side has length {y.size}, expected {n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("right-hand side must be finite")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = 10 * n
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")

    start = time.perf_counter()
    perm = preconditioner.perm if preconditioner is not None else None

    def matvec(v):
        if perm is None:
            return op.matvec(v)
        u = np.empty(n)
        u[perm] = v
        return op.matvec(u)[perm]

    def unpermute(v):
        if perm is None:
            return v
        u = np.empty(n)
        u[perm] = v
        return u

    b = y[perm] if perm is not None else y.copy()
    bnorm = np.sqrt(_dot(b, b))
    if bnorm == 0.0:
        return PcgReport(np.zeros(n), 0, True, np.zeros(0),
                         time.perf_counter() - start)

    x = np.zeros(n)
    r = b.copy()
    z = preconditioner.apply_inverse(r) if preconditioner is not None else r
    p = z.copy()
    rz = _dot(r, z)
    history = []
    converged = False
    k = 0
    while k < max_iter:
        k += 1
        Ap = matvec(p)
        pAp = _dot(p, Ap)
        if not np.isfinite(pAp) or pAp <= 0:
            raise NumericalDivergence(
                iteration=k, detail=f"curvature p'Gp = {pAp:.3e}"
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if k % _REFRESH_EVERY == 0:
            r = b - matvec(x)
        rel = np.sqrt(_dot(r, r)) / bnorm
        if not np.isfinite(rel):
            raise NumericalDivergence(iteration=k, detail="non-finite residual")
        history.append(rel)
        if rel <= tol:
            r = b - matvec(x)
            rel = np.sqrt(_dot(r, r)) / bnorm
            history[-1] = rel
            if rel <= tol:
                converged = True
                break
            # drift exposed: restart the search direction from the true residual
            z = preconditioner.apply_inverse(r) if preconditioner is not None else r
            p = z.copy()
            rz = _dot(r, z)
            continue
        z = preconditioner.apply_inverse(r) if preconditioner is not None else r
        rz_next = _dot(r, z)
        beta = rz_next / rz
        p = z + beta * p
        rz = rz_next
    return PcgReport(unpermute(x), k, converged, np.asarray(history),
                     time.perf_counter() - start)
