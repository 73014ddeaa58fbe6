"""Gram-matrix operators: kernel-backed (matrix-free) and explicit-dense.

The kernel operator exposes entries, rows, row blocks, and matrix-vector
products without ever requiring the full matrix, but keeps an optional dense
cache for small problems.  Cached and uncached paths return bitwise-identical
values: the cache is filled by the same elementwise kernel evaluation that the
matrix-free path uses, and products reduce with the same fixed-order summation
either way.
"""

from __future__ import annotations

import numpy as np

from .kernels import KernelConfig, cross_kernel

DEFAULT_CACHE_LIMIT = 4096
_BLOCK_ROWS = 256


class GramOperator:
    """Symmetric Gram operator for the EQ-ARD kernel on a fixed point set.

    Parameters
    ----------
    X : ndarray of shape (n, d)
        Input locations.
    config : KernelConfig
        Kernel and noise hyperparameters.
    mode : {'noisy', 'latent'}
        'noisy' adds ``noise_variance + jitter`` to the diagonal; 'latent' is
        the bare kernel matrix.
    cache : bool or 'auto'
        Whether to materialize the dense matrix up front.  'auto' caches when
        ``n <= cache_limit``.
    cache_limit : int
        Size threshold for automatic caching.
    """

    def __init__(self, X, config: KernelConfig, mode: str = "noisy",
                 cache: bool | str = "auto", cache_limit: int = DEFAULT_CACHE_LIMIT):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be 2-dimensional")
        if not np.all(np.isfinite(X)):
            raise ValueError("X must be finite")
        if mode not in ("noisy", "latent"):
            raise ValueError(f"unknown mode {mode!r}")
        self.X = X
        self.config = config
        self.mode = mode
        self.ell = config.lengthscales_for(X.shape[1])
        self.shift = (
            config.noise_variance + config.effective_jitter if mode == "noisy" else 0.0
        )
        if cache == "auto":
            cache = X.shape[0] <= cache_limit
        self._dense = None
        if cache:
            self._dense = self._build_dense()

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def diagonal_value(self) -> float:
        """Common value of every diagonal entry."""
        return self.config.signal_variance + self.shift

    @property
    def cached(self) -> bool:
        return self._dense is not None

    def _build_dense(self) -> np.ndarray:
        M = cross_kernel(self.X, self.X, self.config, self.ell)
        if self.shift:
            M[np.diag_indices_from(M)] += self.shift
        return M

    def entry(self, i: int, j: int) -> float:
        if self._dense is not None:
            return float(self._dense[i, j])
        v = cross_kernel(self.X[i : i + 1], self.X[j : j + 1], self.config, self.ell)[0, 0]
        if i == j:
            v += self.shift
        return float(v)

    def row(self, i: int) -> np.ndarray:
        """Row ``i`` of the Gram matrix, length n."""
        if self._dense is not None:
            return self._dense[i].copy()
        r = cross_kernel(self.X[i : i + 1], self.X, self.config, self.ell)[0]
        r[i] += self.shift
        return r

    def rows(self, idx) -> np.ndarray:
        """Row block ``G[idx, :]``, shape (len(idx), n)."""
        idx = np.asarray(idx, dtype=int)
        if self._dense is not None:
            return self._dense[idx].copy()
        B = cross_kernel(self.X[idx], self.X, self.config, self.ell)
        if self.shift:
            B[np.arange(idx.size), idx] += self.shift
        return B

    def diag(self) -> np.ndarray:
        return np.full(self.n, self.diagonal_value)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Product ``G @ v`` with a fixed-order row reduction.

        The reduction is ``np.sum(block * v, axis=1)`` over row blocks, so the
        result does not depend on whether the dense cache is present or on the
        BLAS thread count.
        """
        v = np.asarray(v, dtype=float)
        out = np.empty(self.n)
        for start in range(0, self.n, _BLOCK_ROWS):
            stop = min(start + _BLOCK_ROWS, self.n)
            if self._dense is not None:
                block = self._dense[start:stop]
            else:
                block = cross_kernel(self.X[start:stop], self.X, self.config, self.ell)
                if self.shift:
                    rr = np.arange(start, stop)
                    block[rr - start, rr] += self.shift
            out[start:stop] = np.sum(block * v[None, :], axis=1)
        return out

    def dense(self) -> np.ndarray:
        """Materialize the full matrix (a copy)."""
        if self._dense is not None:
            return self._dense.copy()
        return self._build_dense()


class DenseOperator:
    """Operator view over an explicit symmetric matrix.

    Used for arbitrary-matrix inputs (trace bounds on stored matrices) and as
    an oracle in tests.  Exposes the same surface as :class:`GramOperator`.
    """

    def __init__(self, M):
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("matrix must be square")
        if not np.all(np.isfinite(M)):
            raise ValueError("matrix must be finite")
        self.M = M

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def shape(self):
        return self.M.shape

    @property
    def cached(self) -> bool:
        return True

    def entry(self, i: int, j: int) -> float:
        return float(self.M[i, j])

    def row(self, i: int) -> np.ndarray:
        return self.M[i].copy()

    def rows(self, idx) -> np.ndarray:
        return self.M[np.asarray(idx, dtype=int)].copy()

    def diag(self) -> np.ndarray:
        return np.diag(self.M).copy()

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.empty(self.n)
        for start in range(0, self.n, _BLOCK_ROWS):
            stop = min(start + _BLOCK_ROWS, self.n)
            out[start:stop] = np.sum(self.M[start:stop] * v[None, :], axis=1)
        return out

    def dense(self) -> np.ndarray:
        return self.M.copy()
