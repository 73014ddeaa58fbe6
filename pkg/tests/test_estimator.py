import numpy as np
import pytest
from numpy.testing import assert_allclose
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.linear_model import Ridge

from pivotgp.estimator import PivotedNystroem
from pivotgp.kernels import KernelConfig, cross_kernel


@pytest.fixture
def data(rng):
    X = rng.random((60, 2))
    y = np.sin(3.0 * X[:, 0]) + rng.normal(scale=0.1, size=60)
    return X, y


class TestSklearnContract:
    def test_get_set_params_round_trip(self):
        est = PivotedNystroem(rank=7, strategy="pcov", lengthscales=0.3)
        params = est.get_params()
        assert params["rank"] == 7
        assert params["strategy"] == "pcov"
        twin = PivotedNystroem().set_params(**params)
        assert twin.get_params() == params

    def test_clone(self, data):
        X, _ = data
        est = PivotedNystroem(rank=5).fit(X)
        fresh = clone(est)
        with pytest.raises(NotFittedError):
            fresh.transform(X)

    def test_unfitted_transform_raises(self, data):
        X, _ = data
        with pytest.raises(NotFittedError):
            PivotedNystroem().transform(X)

    def test_works_in_pipeline(self, data):
        X, y = data
        model = make_pipeline(PivotedNystroem(rank=10, lengthscales=0.5), Ridge())
        model.fit(X, y)
        assert model.predict(X).shape == (60,)


class TestFit:
    def test_attributes_after_fit(self, data):
        X, _ = data
        est = PivotedNystroem(rank=8, lengthscales=0.5).fit(X)
        assert est.rank_ == 8
        assert est.pivots_.shape == (8,)
        assert est.components_.shape == (8, 2)
        assert est.n_features_in_ == 2
        assert np.array_equal(est.components_, X[est.pivots_])
        assert est.factor_.m == 8

    def test_default_rank_is_sqrt_n(self, data):
        X, _ = data
        est = PivotedNystroem(lengthscales=0.5).fit(X)
        assert est.rank_ == int(np.ceil(np.sqrt(60)))

    def test_observation_driven_strategy_needs_y(self, data):
        X, y = data
        with pytest.raises(ValueError):
            PivotedNystroem(rank=5, strategy="wpcov").fit(X)
        est = PivotedNystroem(rank=5, strategy="wpcov", lengthscales=0.5).fit(X, y)
        assert est.rank_ == 5

    def test_random_strategy_respects_random_state(self, data):
        X, _ = data
        a = PivotedNystroem(rank=6, strategy="random", random_state=3).fit(X)
        b = PivotedNystroem(rank=6, strategy="random", random_state=3).fit(X)
        c = PivotedNystroem(rank=6, strategy="random", random_state=4).fit(X)
        assert np.array_equal(a.pivots_, b.pivots_)
        assert not np.array_equal(a.pivots_, c.pivots_)

    def test_trace_tolerance_stops_early(self, data):
        X, _ = data
        est = PivotedNystroem(rank=60, trace_tolerance=0.05, lengthscales=0.5).fit(X)
        assert est.rank_ < 60

    def test_rank_validated(self, data):
        X, _ = data
        with pytest.raises(ValueError):
            PivotedNystroem(rank=0).fit(X)
        with pytest.raises(ValueError):
            PivotedNystroem(rank=61).fit(X)

    def test_bad_y_shape_rejected(self, data):
        X, _ = data
        with pytest.raises(ValueError):
            PivotedNystroem(rank=3).fit(X, np.ones((60, 2)))
        with pytest.raises(ValueError):
            PivotedNystroem(rank=3).fit(X, np.ones(59))


class TestTransform:
    def test_feature_products_reproduce_low_rank_kernel(self, data):
        # queries use bare kernel covariances against the landmarks, while
        # the landmark block keeps the training noise shift
        X, _ = data
        est = PivotedNystroem(rank=10, lengthscales=0.5, noise_variance=1e-6).fit(X)
        phi = est.transform(X)
        assert phi.shape == (60, 10)
        config = KernelConfig(
            signal_variance=1.0, lengthscales=0.5, noise_variance=1e-6
        )
        K = cross_kernel(X, X, config)
        piv = est.pivots_
        shift = 1e-6 + config.effective_jitter
        A = K[np.ix_(piv, piv)] + shift * np.eye(10)
        Kc = K[:, piv]
        oracle = Kc @ np.linalg.solve(A, Kc.T)
        assert_allclose(phi @ phi.T, oracle, atol=1e-8)

    def test_non_landmark_training_features_match_factor_rows(self, data):
        # away from the landmarks the training rows carry no noise shift, so
        # the features coincide with the decomposition's factor rows
        X, _ = data
        est = PivotedNystroem(rank=9, lengthscales=0.5).fit(X)
        phi = est.transform(X)
        Lo = est.factor_.unpivoted_factor()
        rest = np.setdiff1d(np.arange(60), est.pivots_)
        assert_allclose(phi[rest], Lo[rest], atol=1e-7)

    def test_new_points_accepted(self, data, rng):
        X, _ = data
        est = PivotedNystroem(rank=6, lengthscales=0.5).fit(X)
        Z = rng.random((7, 2))
        assert est.transform(Z).shape == (7, 6)

    def test_dimension_mismatch_rejected(self, data):
        X, _ = data
        est = PivotedNystroem(rank=4, lengthscales=0.5).fit(X)
        with pytest.raises(ValueError, match="features"):
            est.transform(np.ones((3, 5)))

    def test_fit_transform_equals_fit_then_transform(self, data):
        X, _ = data
        a = PivotedNystroem(rank=5, lengthscales=0.5).fit_transform(X)
        b = PivotedNystroem(rank=5, lengthscales=0.5).fit(X).transform(X)
        assert np.array_equal(a, b)
