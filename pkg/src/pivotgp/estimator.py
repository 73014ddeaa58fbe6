"""Scikit-learn style transformer around the pivoted decomposition."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted
from scipy.linalg import solve_triangular

from .decomposition import decompose
from .kernels import KernelConfig, cross_kernel
from .operators import GramOperator


class PivotedNystroem(TransformerMixin, BaseEstimator):
    """Low-rank kernel feature map with pivot-selected landmark points.

    Fitting runs the pivoted partial Cholesky on the training Gram matrix and
    keeps the selected rows as landmarks.  ``transform`` maps points to
    features whose inner products reproduce the low-rank kernel
    approximation, like a landmark (Nystroem) feature map whose landmarks
    were chosen by the decomposition instead of uniformly.

    Parameters
    ----------
    rank : int, default=None
        Number of landmarks; ``ceil(sqrt(n_samples))`` when None.
    strategy : str, default='var'
        Pivot selection rule; one of 'var', 'pcov', 'wpcov', 'me', 'mi',
        'aopt', 'random'.  'wpcov' and 'me' require ``y`` at fit time.
    signal_variance : float, default=1.0
        Kernel output scale.
    lengthscales : float or array-like, default=1.0
        Kernel lengthscales; a scalar is shared across input dimensions.
    noise_variance : float, default=1e-6
        Diagonal noise added to the training Gram matrix.
    mi_eps : float, default=0.5
        Neighborhood threshold for the 'mi' strategy.
    trace_tolerance : float, default=None
        Optional early stop: quit once the residual trace falls to this
        fraction of the initial trace.
    random_state : int, default=None
        Seed for the 'random' strategy.

    Attributes
    ----------
    pivots_ : ndarray of int
        Selected training row indices, in selection order.
    components_ : ndarray
        The landmark rows of the training data.
    factor_ : PartialCholesky
        The underlying decomposition.

    Examples
    --------
    >>> import numpy as np
    >>> from pivotgp.estimator import PivotedNystroem
    >>> X = np.random.default_rng(0).random((50, 2))
    >>> phi = PivotedNystroem(rank=5).fit_transform(X)
    >>> phi.shape
    (50, 5)
    """

    def __init__(self, rank=None, strategy="var", signal_variance=1.0,
                 lengthscales=1.0, noise_variance=1e-6, mi_eps=0.5,
                 trace_tolerance=None, random_state=None):
        self.rank = rank
        self.strategy = strategy
        self.signal_variance = signal_variance
        self.lengthscales = lengthscales
        self.noise_variance = noise_variance
        self.mi_eps = mi_eps
        self.trace_tolerance = trace_tolerance
        self.random_state = random_state

    def fit(self, X, y=None):
        """Run the decomposition on the training Gram matrix.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features)
            Training points.
        y : array-like of shape (n_samples,), optional
            Targets; required by the 'wpcov' and 'me' strategies.

        Returns
        -------
        self
        """
        X = check_array(X, dtype=float)
        if y is not None:
            y = check_array(y, ensure_2d=False, dtype=float)
            if y.ndim != 1 or y.shape[0] != X.shape[0]:
                raise ValueError("y must be a vector matching X's row count")
        n = X.shape[0]
        rank = self.rank
        if rank is None:
            rank = int(np.ceil(np.sqrt(n)))
        if not 1 <= rank <= n:
            raise ValueError(f"rank must lie in [1, {n}], got {rank}")
        config = KernelConfig(
            signal_variance=self.signal_variance,
            lengthscales=np.atleast_1d(np.asarray(self.lengthscales, dtype=float)),
            noise_variance=self.noise_variance,
        )
        op = GramOperator(X, config, mode="noisy")
        rng = None
        if self.strategy == "random":
            rng = np.random.default_rng(self.random_state)
        pc = decompose(op, self.strategy, rank=rank,
                       trace_tolerance=self.trace_tolerance, y=y,
                       mi_eps=self.mi_eps, rng=rng)
        self.factor_ = pc
        self.pivots_ = pc.pivots
        self.components_ = X[pc.pivots].copy()
        self._config = config
        self._top = pc.L[: pc.m, : pc.m].copy()
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        """Map points to the low-rank feature space.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features)

        Returns
        -------
        ndarray of shape (n_samples, rank_)
        """
        check_is_fitted(self, "factor_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        Kc = cross_kernel(X, self.components_, self._config)
        return solve_triangular(self._top, Kc.T, lower=True).T

    @property
    def rank_(self):
        """Achieved rank, which can fall short of ``rank`` on breakdown."""
        check_is_fitted(self, "factor_")
        return self.factor_.m
