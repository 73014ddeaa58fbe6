"""Sparse-GP evaluation metrics and per-row trace-reduction bounds.

All heavy quantities are computed with low-rank algebra: the marginal
likelihood uses the Woodbury identity and the matrix determinant lemma on the
latent-kernel factor, so nothing here forms a dense n-by-n matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .decomposition import PartialCholesky
from .exceptions import AssumptionViolated, PivotBreakdown, SingularSystem
from .operators import GramOperator
from .strategies import FixedStrategy


@dataclass
class MetricsRow:
    """One (strategy, seed, rank) cell of the regression experiment."""

    rank: int
    sse: float
    trace_residual: float
    nlml: float
    seed: int
    strategy: str


def trace_residual(pc):
    """Residual trace of the approximation, ``sum of d over unpivoted rows``."""
    return float(np.sum(pc.d[pc.m :]))


def sse(pc, op, y):
    """Sum of squared errors of the least-squares fit on the pivot columns.

    Solves the normal equations of ``min_a ||y - G[:, pivots] a||`` with the
    pivot columns taken from the operator, retrying once with a small
    diagonal jitter when the system is singular.
    """
    if pc.m < 1:
        raise ValueError("sse needs at least one pivot")
    y = np.asarray(y, dtype=float).ravel()
    C = op.rows(pc.pivots)
    A = C @ C.T
    b = C @ y
    theta = float(np.max(op.diag()))
    try:
        alpha = _solve_spd(A, b)
    except np.linalg.LinAlgError:
        try:
            A2 = A + 1e-10 * theta * op.n * np.eye(pc.m)
            alpha = _solve_spd(A2, b)
        except np.linalg.LinAlgError:
            raise SingularSystem(
                f"normal equations singular at rank {pc.m} even with jitter"
            ) from None
    resid = y - C.T @ alpha
    return float(resid @ resid)


def _solve_spd(A, b):
    c, low = cho_factor(A, lower=True)
    return cho_solve((c, low), b)


def latent_replay(pc, op, config=None):
    """Replay the factor's pivots on the latent (noise-free) kernel matrix.

    Stops early if the latent matrix breaks down before reaching the factor's
    rank; the achieved-rank factor is returned.
    """
    if config is None:
        config = op.config
    if getattr(op, "mode", None) == "latent":
        kop = op
    else:
        # row access only, so skip the dense cache however large the problem
        kop = GramOperator(op.X, config, mode="latent", cache=False)
    pck = PartialCholesky(kop, FixedStrategy(pc.pivots), max_rank=pc.m)
    try:
        while pck.m < pc.m:
            pck.step()
    except PivotBreakdown:
        pass
    return pck


def nlml(pc, op, y, config=None, paper_literal_coefficients=False):
    """Approximate negative log marginal likelihood of the sparse GP.

    The latent-kernel factor (pivots replayed on K) supplies both the
    low-rank approximation and the trace penalty.  The default coefficients
    are the standard Gaussian ones, which make the value an upper bound on
    the exact dense negative log marginal likelihood at every rank; the
    ``paper_literal_coefficients`` flag switches the complexity term to
    ``n/2 * logdet`` and the trace penalty to ``1/sigma^2`` (no half).
    """
    if config is None:
        config = op.config
    sigma2 = config.noise_variance
    if sigma2 <= 0:
        raise ValueError("nlml requires positive noise variance")
    y = np.asarray(y, dtype=float).ravel()
    n = op.n
    pck = latent_replay(pc, op, config)
    Lo = pck.unpivoted_factor()
    r = y - config.mean
    mk = pck.m
    if mk == 0:
        quad = float(r @ r) / sigma2
        logdet = n * np.log(sigma2)
    else:
        t = Lo.T @ r
        B = np.eye(mk) + (Lo.T @ Lo) / sigma2
        c, low = cho_factor(B, lower=True)
        u = cho_solve((c, low), t)
        quad = (float(r @ r) - float(t @ u) / sigma2) / sigma2
        logdet = n * np.log(sigma2) + 2.0 * float(np.sum(np.log(np.diag(c))))
    trace = max(trace_residual(pck), 0.0)
    const = 0.5 * n * np.log(2.0 * np.pi)
    fit = 0.5 * quad
    if paper_literal_coefficients:
        complexity = 0.5 * n * logdet
        penalty = trace / sigma2
    else:
        complexity = 0.5 * logdet
        penalty = 0.5 * trace / sigma2
    return float(const + fit + complexity + penalty)


@dataclass
class TraceBoundRow:
    """Row statistics bracketing the exact trace reduction of a pivot.

    ``tau`` is the trace drop pivoting at this row would achieve; ``lower``
    and ``upper`` are its mean-based bounds, valid for matrices with
    nonnegative entries and a constant diagonal.
    """

    index: int
    m: float
    v: float
    s: float
    tau: float
    lower: float
    upper: float
    assumption_ok: bool = True

    def violated(self, rel_slack=1e-10):
        scale = max(abs(self.tau), abs(self.upper), abs(self.lower), 1e-300)
        slack = rel_slack * scale
        return (not self.assumption_ok
                or self.lower > self.tau + slack
                or self.tau > self.upper + slack)


def trace_bounds(op, strict=True):
    """Per-row trace-reduction statistics and bounds for a Gram operator.

    Asserts nonnegative entries and a constant diagonal.  With ``strict``
    the first violation raises :class:`AssumptionViolated` naming the entry;
    otherwise the offending row is flagged and kept.
    """
    n = op.n
    diag = op.diag()
    scale = float(np.max(np.abs(diag))) if n else 1.0
    rows = []
    for i in range(n):
        g = op.row(i)
        ok = True
        j = int(np.argmin(g))
        if g[j] < -1e-12 * scale:
            if strict:
                raise AssumptionViolated(i, j, f"negative entry {g[j]:.3e}")
            ok = False
        if abs(diag[i] - diag[0]) > 1e-10 * scale:
            if strict:
                raise AssumptionViolated(i, i, "diagonal entry not constant")
            ok = False
        m = float(np.mean(g))
        s = float(np.mean(g * g))
        v = s - m * m
        tau = n * s / diag[i]
        rows.append(TraceBoundRow(
            index=i, m=m, v=v, s=s, tau=tau,
            lower=n * m * m / diag[i], upper=n * m, assumption_ok=ok,
        ))
    return rows
