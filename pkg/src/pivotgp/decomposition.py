"""Partial pivoted Cholesky decomposition driven by a selection strategy.

The factor is built column by column.  Each step asks the strategy for the
next pivot, swaps it into the leading block, computes one column from a single
Gram row, and downdates the residual diagonal.  All bookkeeping lives in
pivoted order; ``perm`` maps pivoted positions back to original indices.

Column accumulation and diagonal downdates use fixed-order elementwise
reductions, so a given operator, strategy, and seed always reproduce the same
pivot sequence bit for bit.
"""

from __future__ import annotations

import numpy as np

from .exceptions import PivotBreakdown
from .strategies import Strategy, make_strategy


class PartialCholesky:
    """Pivoted partial Cholesky factor, incrementally extensible.

    Attributes
    ----------
    perm : ndarray of int
        Original index of each pivoted position; ``perm[:m]`` are the chosen
        pivots in order.
    L : ndarray
        Factor columns in pivoted order; only ``L[:, :m]`` is meaningful.
    d : ndarray
        Residual (Schur complement) diagonal in pivoted order; zero at
        pivoted positions.
    m : int
        Achieved rank.
    trace_history : list of float
        Residual trace before the first step and after every step since.
    """

    def __init__(self, op, strategy="var", *, y=None, mean=None, max_rank=None,
                 tolerance=None, mi_eps=0.5, weights=None, rng=None, pivots=None):
        if isinstance(strategy, str):
            strategy = make_strategy(
                strategy, weights=weights, eps=mi_eps, rng=rng, pivots=pivots
            )
        elif not isinstance(strategy, Strategy):
            raise TypeError("strategy must be a name or a Strategy instance")
        self.op = op
        self.n = op.n
        self.strategy = strategy
        self.strategy_name = strategy.name
        if y is not None:
            y = np.array(y, dtype=float).ravel().copy()
            if y.size != self.n:
                raise ValueError(f"y has length {y.size}, expected {self.n}")
        self.y = y
        if mean is None:
            mean = getattr(getattr(op, "config", None), "mean", 0.0)
        self.mean = float(mean)
        self.d = op.diag().astype(float)
        self.initial_diag = self.d.copy()
        scale = float(np.max(self.initial_diag)) if self.n else 1.0
        self.tolerance = 1e-10 * scale if tolerance is None else float(tolerance)
        self.perm = np.arange(self.n)
        self.inv_perm = np.arange(self.n)
        if max_rank is None:
            max_rank = min(self.n, 64)
        self.L = np.zeros((self.n, max_rank))
        self.m = 0
        self.trace_history = [float(np.sum(self.d))]
        strategy.begin(self)

    @property
    def rank(self):
        return self.m

    @property
    def pivots(self):
        """Chosen pivots as original indices, in selection order."""
        return self.perm[: self.m].copy()

    def __repr__(self):
        return (
            f"PartialCholesky(n={self.n}, rank={self.m}, "
            f"strategy={self.strategy_name!r})"
        )

    def _swap(self, a, b):
        if a == b:
            return
        for v in (self.perm, self.d, self.initial_diag):
            v[a], v[b] = v[b], v[a]
        self.inv_perm[self.perm[a]] = a
        self.inv_perm[self.perm[b]] = b
        self.L[[a, b], : self.m] = self.L[[b, a], : self.m]
        if self.y is not None:
            self.y[a], self.y[b] = self.y[b], self.y[a]
        self.strategy.swap(a, b)

    def step(self):
        """Perform one pivot step; returns self.

        Raises
        ------
        PivotBreakdown
            When the selected pivot's residual diagonal is at or below the
            tolerance; the factor keeps its achieved rank and stays valid.
        """
        m = self.m
        if m >= self.n:
            raise ValueError("factor is already full rank")
        j = self.strategy.select(self)
        if not m <= j < self.n:
            raise ValueError(f"strategy selected position {j} outside [{m}, {self.n})")
        if self.d[j] <= self.tolerance:
            raise PivotBreakdown(
                rank=m, pivot_value=float(self.d[j]), tolerance=self.tolerance
            )
        self._swap(m, j)
        if m >= self.L.shape[1]:
            extra = np.zeros((self.n, max(1, self.L.shape[1])))
            self.L = np.concatenate([self.L, extra], axis=1)
        c = self.op.row(self.perm[m])[self.perm]
        if m > 0:
            c -= np.einsum("jk,k->j", self.L[:, :m], self.L[m, :m])
        c[m] = np.sqrt(self.d[m])
        c[m + 1 :] /= c[m]
        c[:m] = 0.0
        self.L[:, m] = c
        self.d[m:] -= c[m:] * c[m:]
        self.d[m] = 0.0
        self.m = m + 1
        self.trace_history.append(float(np.sum(self.d[self.m :])))
        self.strategy.update(self, m)
        return self

    def factor(self):
        """The pivoted factor, shape (n, rank)."""
        return self.L[:, : self.m]

    def unpivoted_factor(self):
        """Factor rows scattered back to original index order."""
        Lo = np.zeros((self.n, self.m))
        Lo[self.perm] = self.L[:, : self.m]
        return Lo

    def approximation(self):
        """Dense low-rank approximation in original index order."""
        Lo = self.unpivoted_factor()
        return Lo @ Lo.T

    def truncate(self, rank):
        """Copy of this factor cut back to a smaller rank.

        The residual diagonal is rebuilt from the initial diagonal and the
        kept columns, so it matches what a run stopped at ``rank`` would have
        produced.  The copy cannot be stepped further.
        """
        if not 0 <= rank <= self.m:
            raise ValueError(f"rank {rank} outside [0, {self.m}]")
        out = object.__new__(PartialCholesky)
        out.op = self.op
        out.n = self.n
        out.strategy = None
        out.strategy_name = self.strategy_name
        out.y = None if self.y is None else self.y.copy()
        out.mean = self.mean
        out.tolerance = self.tolerance
        out.perm = self.perm.copy()
        out.inv_perm = self.inv_perm.copy()
        out.initial_diag = self.initial_diag.copy()
        out.L = self.L[:, :rank].copy()
        out.m = rank
        d = self.initial_diag.copy()
        if rank > 0:
            d -= np.einsum("jk,jk->j", self.L[:, :rank], self.L[:, :rank])
        d[:rank] = 0.0
        out.d = d
        out.trace_history = list(self.trace_history[: rank + 1])
        return out


def decompose(op, strategy="var", *, rank=None, trace_tolerance=None, y=None,
              mean=None, tolerance=None, mi_eps=0.5, weights=None, rng=None,
              pivots=None):
    """Run the pivoted decomposition until a rank or trace target is met.

    Parameters
    ----------
    op : GramOperator or DenseOperator
        Symmetric positive semidefinite operator to factorize.
    strategy : str or Strategy
        Pivot selection rule; see :mod:`pivotgp.strategies`.
    rank : int, optional
        Rank target.  Defaults to full rank when no trace target is given.
    trace_tolerance : float, optional
        Stop once the residual trace falls to this fraction of the initial
        trace.  A value of 1.0 returns a rank-0 factor.
    y, mean, weights, mi_eps, rng, pivots
        Strategy inputs; see the strategy classes.

    Returns
    -------
    PartialCholesky
        The factor with its permutation and achieved rank.

    Notes
    -----
    A ``PivotBreakdown`` mid-run means the matrix is numerically rank
    deficient; the partial factor is returned as is.  The exception
    propagates only when the caller demanded full rank.
    """
    n = op.n
    demanded_full = rank == n or (rank is None and trace_tolerance is None)
    if rank is None:
        rank = n
    if not 0 <= rank <= n:
        raise ValueError(f"rank {rank} outside [0, {n}]")
    if trace_tolerance is not None and trace_tolerance <= 0:
        raise ValueError("trace_tolerance must be positive")
    pc = PartialCholesky(
        op, strategy, y=y, mean=mean, max_rank=rank, tolerance=tolerance,
        mi_eps=mi_eps, weights=weights, rng=rng, pivots=pivots,
    )
    initial = pc.trace_history[0]
    while pc.m < rank:
        if trace_tolerance is not None and pc.trace_history[-1] <= trace_tolerance * initial:
            break
        try:
            pc.step()
        except PivotBreakdown:
            if demanded_full:
                raise
            break
    return pc
