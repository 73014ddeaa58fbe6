"""Pivot-selection strategies for the partial pivoted Cholesky decomposition.

Each strategy scores the not-yet-pivoted points and returns the pivoted-order
position of the next pivot.  The decomposition drives the protocol:

* ``begin(state)`` once before the first step,
* ``select(state)`` to pick a position ``>= state.m``,
* ``swap(a, b)`` whenever the decomposition swaps two pivoted positions,
* ``update(state, m)`` after column ``m`` of the factor has been written.

Ties break toward the lowest pivoted position (argmax takes the first hit).
Scores are computed with fixed-order reductions (einsum, elementwise numpy)
so the chosen pivot sequence is bitwise reproducible across runs and BLAS
thread counts.
"""

from __future__ import annotations

import numpy as np

from .exceptions import NumericalError


def _chol_lower(A, jitter=0.0):
    """Cholesky factor of a small SPD matrix via fixed-order column updates.

    Raises ``np.linalg.LinAlgError`` on a non-positive pivot.  Used instead of
    LAPACK so selection scores do not vary with the thread count.
    """
    q = A.shape[0]
    L = np.zeros((q, q))
    for k in range(q):
        pivot = A[k, k] + jitter - np.einsum("i,i->", L[k, :k], L[k, :k])
        if pivot <= 0:
            raise np.linalg.LinAlgError("non-positive pivot in neighborhood solve")
        L[k, k] = np.sqrt(pivot)
        if k + 1 < q:
            off = A[k + 1 :, k] - np.einsum("ij,j->i", L[k + 1 :, :k], L[k, :k])
            L[k + 1 :, k] = off / L[k, k]
    return L


def _chol_quad(L, b):
    """Quadratic form ``b' A^{-1} b`` given the Cholesky factor of A."""
    q = L.shape[0]
    y = np.zeros(q)
    for k in range(q):
        y[k] = (b[k] - np.einsum("i,i->", L[k, :k], y[:k])) / L[k, k]
    return float(np.einsum("i,i->", y, y))


def mi_score(S, eps, floor=0.0, jitter=0.0):
    """Mutual-information scores over a residual covariance block.

    For each point ``j`` with residual variance above ``floor``, the score is
    ``log S_jj - log(S_jj - S_jQ S_QQ^{-1} S_Qj)`` where the neighborhood Q
    holds the other points whose normalized absolute covariance with j
    exceeds ``eps``.  ``eps = 0`` conditions on every correlated point and
    reproduces the exact mutual information; ``eps = 1`` leaves every
    neighborhood empty and all scores zero.

    A singular neighborhood system is retried once with ``jitter`` added to
    its diagonal; if it stays singular the error names the point.
    """
    S = np.asarray(S, dtype=float)
    r = S.shape[0]
    s = np.diag(S).copy()
    scores = np.full(r, -np.inf)
    denom = np.sqrt(np.maximum(s, max(floor, np.finfo(float).tiny)))
    for j in range(r):
        if s[j] <= floor:
            continue
        w = np.abs(S[j]) / (denom[j] * denom)
        w[j] = 0.0
        Q = np.flatnonzero(w > eps)
        if Q.size == 0:
            scores[j] = 0.0
            continue
        A = S[np.ix_(Q, Q)]
        b = S[Q, j]
        try:
            quad = _chol_quad(_chol_lower(A), b)
        except np.linalg.LinAlgError:
            try:
                quad = _chol_quad(_chol_lower(A, jitter=jitter), b)
            except np.linalg.LinAlgError:
                raise NumericalError(
                    f"singular neighborhood covariance for point {j}"
                ) from None
        cond = s[j] - quad
        if cond <= 0:
            cond = 1e-12 * s[j]
        scores[j] = np.log(s[j]) - np.log(cond)
    return scores


def aopt_score(S):
    """Trace-reduction scores ``||S[:, j]||^2 / S_jj`` on a residual block.

    Each value is exactly how much the residual trace would drop if point j
    were pivoted next.
    """
    S = np.asarray(S, dtype=float)
    d = np.diag(S)
    if np.any(d <= 0):
        j = int(np.argmax(d <= 0))
        raise NumericalError(f"non-positive residual diagonal at point {j}")
    sq = np.einsum("ij,ij->j", S, S)
    return sq / d


class Strategy:
    """Base class; subclasses override ``select`` and any hooks they need."""

    name = "base"

    def begin(self, state):
        pass

    def swap(self, a, b):
        pass

    def select(self, state):
        raise NotImplementedError

    def update(self, state, m):
        pass


class VarStrategy(Strategy):
    """Pick the point with the largest residual diagonal.

    Greedy variance reduction; each step removes the largest remaining
    conditional variance, so the factor tracks the dominant directions of the
    matrix first.
    """

    name = "var"

    def select(self, state):
        return int(np.argmax(state.d[state.m :])) + state.m


class ProjectionStrategy(Strategy):
    """Shared machinery for scores of the form ``(t_j - proj_j)^2``.

    ``t`` is a per-point target and ``proj`` its projection onto the span of
    the selected columns.  One vector stores both the projection (for points
    still available) and the expansion coefficients (for points already
    pivoted), so each step costs O(n):

    * ``z = (t[m] - s[m]) / L[m, m]`` is the new coefficient, stored in
      ``s[m]``,
    * ``s[j] += L[j, m] * z`` advances the projections for ``j > m``.
    """

    def _target(self, state):
        raise NotImplementedError

    def begin(self, state):
        self.t = self._target(state)
        self.s = np.zeros(state.n)

    def swap(self, a, b):
        self.t[a], self.t[b] = self.t[b], self.t[a]
        self.s[a], self.s[b] = self.s[b], self.s[a]

    def select(self, state):
        m = state.m
        r = self.t[m:] - self.s[m:]
        return int(np.argmax(r * r)) + m

    def update(self, state, m):
        col = state.L[:, m]
        z = (self.t[m] - self.s[m]) / col[m]
        self.s[m] = z
        self.s[m + 1 :] += col[m + 1 :] * z


class PCovStrategy(ProjectionStrategy):
    """Match the row sums of the matrix: target ``t = G 1``.

    Prefers points whose covariance with the whole set is poorly captured by
    the current factor.
    """

    name = "pcov"

    def _target(self, state):
        return state.op.matvec(np.ones(state.n))


class WeightedStrategy(ProjectionStrategy):
    """Match a weighted row sum ``t = G w`` for a caller-chosen weight vector.

    Reduces to the plain row-sum score when ``w`` is all ones.
    """

    name = "weighted"

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float).ravel()
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        self.weights = w

    def _target(self, state):
        if self.weights.size != state.n:
            raise ValueError(
                f"weights have length {self.weights.size}, expected {state.n}"
            )
        return state.op.matvec(self.weights)


class WPCovStrategy(ProjectionStrategy):
    """Weight the row-sum target by the centered observations: ``t = G (y - mu)``."""

    name = "wpcov"

    def _target(self, state):
        if state.y is None:
            raise ValueError("wpcov strategy requires targets y")
        return state.op.matvec(state.y - state.mean)


class MEStrategy(ProjectionStrategy):
    """Greedy matching pursuit on the centered observations.

    The target is ``y - mu`` itself, no matrix product involved; each step
    picks the point whose observation is worst explained by the current
    columns.
    """

    name = "me"

    def _target(self, state):
        if state.y is None:
            raise ValueError("me strategy requires targets y")
        return state.y - state.mean


class MIStrategy(Strategy):
    """Mutual-information score with a sparsified neighborhood.

    For each available point ``j`` the score is the log ratio of its residual
    variance to its conditional variance given the neighborhood ``Q`` of
    points whose normalized residual covariance with ``j`` exceeds ``eps``.
    The residual (Schur) covariance over the available points is rebuilt every
    step, so the strategy costs O(r^2) memory per step and is only meant for
    small problems.
    """

    name = "mi"

    def __init__(self, eps=0.5):
        if not 0.0 <= eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        self.eps = eps

    def select(self, state):
        m = state.m
        rem = state.perm[m:]
        S = state.op.rows(rem)[:, rem]
        if m > 0:
            Lr = state.L[m:, :m]
            S = S - np.einsum("ik,jk->ij", Lr, Lr)
        scores = mi_score(
            S, self.eps, floor=state.tolerance, jitter=1e-10 * state.op.diag()[0]
        )
        if np.all(np.isneginf(scores)):
            return int(np.argmax(state.d[m:])) + m
        return int(np.argmax(scores)) + m


class AOptStrategy(Strategy):
    """Pick the point whose column removes the most residual trace.

    The score is ``||S[:, j]||^2 / S[j, j]`` on the residual matrix S, the
    exact trace reduction a pivot at j would achieve.  Keeps a dense running
    copy of the residual, so it requires an operator that can materialize its
    matrix.
    """

    name = "aopt"

    def begin(self, state):
        if not state.op.cached:
            raise ValueError("aopt strategy requires a dense-cached operator")
        self.S = state.op.dense()

    def swap(self, a, b):
        self.S[[a, b]] = self.S[[b, a]]
        self.S[:, [a, b]] = self.S[:, [b, a]]

    def select(self, state):
        m = state.m
        d = state.d[m:]
        if np.max(d) <= state.tolerance:
            return int(np.argmax(d)) + m
        R = self.S[m:, m:]
        sq = np.einsum("ij,ij->j", R, R)
        scores = np.where(d > state.tolerance, sq / np.where(d > 0, d, 1.0), -np.inf)
        return int(np.argmax(scores)) + m

    def update(self, state, m):
        col = state.L[:, m]
        self.S -= col[:, None] * col[None, :]


class RandomStrategy(Strategy):
    """Uniform choice among the available points from a seeded stream."""

    name = "random"

    def __init__(self, rng):
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        self.rng = rng

    def select(self, state):
        return int(self.rng.integers(state.m, state.n))


class FixedStrategy(Strategy):
    """Replay a given pivot sequence (original indices, in order)."""

    name = "fixed"

    def __init__(self, pivots):
        self.pivots = np.asarray(pivots, dtype=int)

    def select(self, state):
        m = state.m
        if m >= self.pivots.size:
            raise ValueError("fixed pivot sequence exhausted")
        pos = int(state.inv_perm[self.pivots[m]])
        if pos < m:
            raise ValueError(f"pivot {self.pivots[m]} repeated in fixed sequence")
        return pos


def make_strategy(name, *, weights=None, eps=0.5, rng=None, pivots=None):
    """Build a strategy from its registry name.

    Extra data some strategies need (weights, a random stream, a pivot list)
    comes through keyword arguments; targets travel with the decomposition
    call itself.
    """
    if name == "var":
        return VarStrategy()
    if name == "pcov":
        return PCovStrategy()
    if name == "wpcov":
        return WPCovStrategy()
    if name == "weighted":
        if weights is None:
            raise ValueError("weighted strategy requires weights")
        return WeightedStrategy(weights)
    if name == "me":
        return MEStrategy()
    if name == "mi":
        return MIStrategy(eps=eps)
    if name == "aopt":
        return AOptStrategy()
    if name == "random":
        return RandomStrategy(rng if rng is not None else 0)
    if name == "fixed":
        if pivots is None:
            raise ValueError("fixed strategy requires a pivot sequence")
        return FixedStrategy(pivots)
    raise ValueError(f"unknown strategy {name!r}")


STRATEGY_NAMES = ("var", "pcov", "wpcov", "weighted", "me", "mi", "aopt", "random")
