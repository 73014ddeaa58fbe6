"""Shared fixtures and independent oracle implementations.

The oracles here recompute quantities densely and naively (explicit inverses,
brute-force enumeration) so the incremental implementations in the package
can be checked against them without sharing code paths.
"""

import numpy as np
import pytest

from pivotgp.kernels import KernelConfig
from pivotgp.operators import GramOperator
from pivotgp.strategies import Strategy


def make_instance(n, d=2, seed=0, theta=1.0, ell=0.5, noise=0.05,
                  jitter=0.0, mode="noisy", cache="auto"):
    """Random EQ-kernel Gram operator with its inputs and config."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    config = KernelConfig(signal_variance=theta,
                          lengthscales=np.full(d, float(ell)),
                          noise_variance=noise, jitter=jitter)
    op = GramOperator(X, config, mode=mode, cache=cache)
    return X, config, op


def dense_schur_diag(Gp, m):
    """Residual diagonal after conditioning on the leading m pivoted rows."""
    if m == 0:
        return np.diag(Gp).copy()
    C = Gp[:, :m]
    A = Gp[:m, :m]
    return np.diag(Gp - C @ np.linalg.solve(A, C.T))


def dense_projection(Gp, m, w):
    """Projection of G w onto the span of the leading m pivot columns."""
    if m == 0:
        return np.zeros(Gp.shape[0])
    C = Gp[:, :m]
    A = Gp[:m, :m]
    return C @ np.linalg.solve(A, Gp[:m, :] @ w)


def dense_nystrom(Gp, m):
    """Cross-column reconstruction C A^{-1} C' from the leading m pivots."""
    C = Gp[:, :m]
    A = Gp[:m, :m]
    return C @ np.linalg.solve(A, C.T)


def brute_force_mi(S):
    """Exact mutual-information scores, conditioning on all other points."""
    n = S.shape[0]
    scores = np.zeros(n)
    for j in range(n):
        others = [i for i in range(n) if i != j]
        A = S[np.ix_(others, others)]
        b = S[others, j]
        cond = S[j, j] - b @ np.linalg.solve(A, b)
        scores[j] = np.log(S[j, j]) - np.log(cond)
    return scores


def dense_nlml(K, sigma2, y, mean=0.0):
    """Exact dense negative log marginal likelihood."""
    n = len(y)
    r = np.asarray(y, dtype=float) - mean
    Kn = K + sigma2 * np.eye(n)
    sign, logdet = np.linalg.slogdet(Kn)
    assert sign > 0
    return 0.5 * (n * np.log(2.0 * np.pi) + logdet + r @ np.linalg.solve(Kn, r))


class TwoVectorProjection(Strategy):
    """Projection scoring with separate coefficient and projection vectors.

    The shipped strategy overlays coefficients onto the projection array;
    this twin keeps them apart.  The arithmetic is the same expression in the
    same order, so pivot selections must agree bit for bit.
    """

    name = "two-vector"

    def __init__(self, target="ones"):
        self.target = target

    def begin(self, state):
        if self.target == "ones":
            self.t = state.op.matvec(np.ones(state.n))
        else:
            self.t = state.op.matvec(state.y - state.mean)
        self.z = np.zeros(state.n)
        self.proj = np.zeros(state.n)

    def swap(self, a, b):
        for v in (self.t, self.z, self.proj):
            v[a], v[b] = v[b], v[a]

    def select(self, state):
        m = state.m
        r = self.t[m:] - self.proj[m:]
        return int(np.argmax(r * r)) + m

    def update(self, state, m):
        col = state.L[:, m]
        self.z[m] = (self.t[m] - self.proj[m]) / col[m]
        self.proj[m + 1 :] += col[m + 1 :] * self.z[m]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
