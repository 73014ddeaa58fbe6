"""Exponentiated-quadratic kernel with per-dimension lengthscales (ARD).

All pairwise evaluations funnel through :func:`cross_kernel`, which accumulates
squared distances dimension by dimension in a fixed left-to-right order.  Entry,
row, and full-matrix paths therefore produce bitwise-identical values, which the
decomposition relies on for reproducible pivot sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class KernelConfig:
    """Hyperparameters of the EQ-ARD kernel and the observation model.

    Parameters
    ----------
    signal_variance : float
        Prior variance of the latent function; the kernel's diagonal value.
    lengthscales : array-like
        Per-dimension lengthscales; a scalar broadcasts to every dimension
        once the data dimension is known.
    noise_variance : float
        Variance of the additive observation noise.
    mean : float
        Constant prior mean of the latent function.
    jitter : float or None
        Diagonal shift added in noisy mode to guard full-rank factorizations.
        ``None`` selects the default ``1e-10 * signal_variance``; pass ``0.0``
        for exact oracle comparisons.
    """

    signal_variance: float = 1.0
    lengthscales: np.ndarray = field(default_factory=lambda: np.ones(1))
    noise_variance: float = 0.0
    mean: float = 0.0
    jitter: float | None = None

    def __post_init__(self):
        ell = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ell)
        if not np.isfinite(self.signal_variance) or self.signal_variance <= 0:
            raise ValueError("signal_variance must be positive and finite")
        if ell.ndim != 1 or not np.all(np.isfinite(ell)) or np.any(ell <= 0):
            raise ValueError("lengthscales must be a vector of positive finite values")
        if not np.isfinite(self.noise_variance) or self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative and finite")
        if self.jitter is not None and self.jitter < 0:
            raise ValueError("jitter must be non-negative")

    @property
    def effective_jitter(self) -> float:
        if self.jitter is None:
            return 1e-10 * self.signal_variance
        return float(self.jitter)

    @property
    def noisy_diagonal(self) -> float:
        """Diagonal value of the noisy Gram matrix."""
        return self.signal_variance + self.noise_variance + self.effective_jitter

    def lengthscales_for(self, ndim: int) -> np.ndarray:
        """Broadcast scalar lengthscales to ``ndim`` dimensions."""
        ell = self.lengthscales
        if ell.size == 1:
            return np.full(ndim, ell[0])
        if ell.size != ndim:
            raise ValueError(
                f"got {ell.size} lengthscales for {ndim}-dimensional inputs"
            )
        return ell


def kernel_eval(x: np.ndarray, x_other: np.ndarray, config: KernelConfig) -> float:
    """Covariance between two input points.

    Raises ``ValueError`` on dimension mismatch or non-finite inputs.
    """
    x = np.asarray(x, dtype=float).ravel()
    x_other = np.asarray(x_other, dtype=float).ravel()
    if x.size != x_other.size:
        raise ValueError(f"point dimensions differ: {x.size} vs {x_other.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(x_other))):
        raise ValueError("kernel inputs must be finite")
    ell = config.lengthscales_for(x.size)
    return float(cross_kernel(x[None, :], x_other[None, :], config, ell)[0, 0])


def cross_kernel(
    X1: np.ndarray,
    X2: np.ndarray,
    config: KernelConfig,
    ell: np.ndarray | None = None,
) -> np.ndarray:
    """Kernel matrix between two sets of points, shape ``(n1, n2)``.

    The distance accumulation loops over dimensions so every evaluation of the
    same pair is bitwise identical regardless of batch shape.
    """
    X1 = np.asarray(X1, dtype=float)
    X2 = np.asarray(X2, dtype=float)
    if ell is None:
        ell = config.lengthscales_for(X1.shape[1])
    sq = np.zeros((X1.shape[0], X2.shape[0]))
    for d in range(X1.shape[1]):
        diff = (X1[:, d, None] - X2[None, :, d]) / ell[d]
        sq += diff * diff
    return config.signal_variance * np.exp(-0.5 * sq)
