import numpy as np
import pytest
from numpy.testing import assert_allclose

from pivotgp import metrics as metrics_mod
from pivotgp.decomposition import decompose
from pivotgp.exceptions import AssumptionViolated, SingularSystem
from pivotgp.kernels import KernelConfig, cross_kernel
from pivotgp.metrics import (
    MetricsRow,
    TraceBoundRow,
    latent_replay,
    nlml,
    sse,
    trace_bounds,
    trace_residual,
)
from pivotgp.operators import DenseOperator, GramOperator
from pivotgp.strategies import aopt_score

from conftest import dense_nlml, make_instance


class TestTraceResidual:
    def test_rank_zero_is_full_trace(self):
        _, _, op = make_instance(20, noise=0.1)
        pc = decompose(op, "var", rank=0)
        assert trace_residual(pc) == pytest.approx(np.sum(op.diag()))

    def test_full_rank_is_zero(self):
        _, _, op = make_instance(20, noise=0.1)
        pc = decompose(op, "var")
        assert trace_residual(pc) <= 1e-10 * np.sum(op.diag())

    def test_matches_dense_residual_trace(self):
        _, _, op = make_instance(30, seed=3, noise=0.1)
        pc = decompose(op, "var", rank=9)
        dense = np.trace(op.dense() - pc.approximation())
        assert trace_residual(pc) == pytest.approx(dense, abs=1e-10)

    def test_monotone_in_rank(self):
        _, _, op = make_instance(40, seed=5, noise=0.05)
        pc = decompose(op, "var", rank=20)
        values = [trace_residual(pc.truncate(r)) for r in range(21)]
        assert np.all(np.diff(values) <= 1e-12)


class TestSse:
    def test_requires_at_least_one_pivot(self):
        _, _, op = make_instance(10)
        pc = decompose(op, "var", rank=0)
        with pytest.raises(ValueError):
            sse(pc, op, np.ones(10))

    def test_matches_least_squares_oracle(self, rng):
        _, _, op = make_instance(40, seed=7, noise=0.1)
        y = rng.normal(size=40)
        pc = decompose(op, "var", rank=10)
        C = op.dense()[pc.pivots]
        coef, *_ = np.linalg.lstsq(C.T, y, rcond=None)
        oracle = float(np.sum((y - C.T @ coef) ** 2))
        assert sse(pc, op, y) == pytest.approx(oracle, rel=1e-8, abs=1e-10)

    def test_zero_when_target_in_column_span(self, rng):
        _, _, op = make_instance(30, seed=2, noise=0.1)
        pc = decompose(op, "var", rank=8)
        w = rng.normal(size=8)
        y = op.dense()[pc.pivots].T @ w
        assert sse(pc, op, y) == pytest.approx(0.0, abs=1e-10)

    def test_full_rank_fit_is_exact(self, rng):
        _, _, op = make_instance(25, seed=4, noise=0.2)
        y = rng.normal(size=25)
        pc = decompose(op, "var")
        assert sse(pc, op, y) == pytest.approx(0.0, abs=1e-8)

    def test_decreases_with_rank(self, rng):
        _, _, op = make_instance(50, seed=9, noise=0.05)
        y = rng.normal(size=50)
        pc = decompose(op, "var", rank=25)
        values = [sse(pc.truncate(r), op, y) for r in range(1, 26)]
        assert np.all(np.diff(values) <= 1e-8)

    def test_duplicate_pivot_rows_recover_with_jitter(self):
        # identical pivot rows make the normal equations exactly singular;
        # the retry with a scaled jitter must still produce a finite fit
        from types import SimpleNamespace

        _, _, op = make_instance(12, seed=1, noise=0.1)
        fake = SimpleNamespace(m=2, pivots=np.array([3, 3]))
        value = sse(fake, op, np.ones(12))
        assert np.isfinite(value)

    def test_singular_even_with_jitter_raises(self, monkeypatch):
        _, _, op = make_instance(10, noise=0.1)
        pc = decompose(op, "var", rank=3)

        def always_fail(A, b):
            raise np.linalg.LinAlgError("forced")

        monkeypatch.setattr(metrics_mod, "_solve_spd", always_fail)
        with pytest.raises(SingularSystem, match="rank 3"):
            sse(pc, op, np.ones(10))


class TestLatentReplay:
    def test_replays_pivots_on_latent_kernel(self):
        _, config, op = make_instance(20, seed=6, noise=0.3)
        pc = decompose(op, "var", rank=8)
        pck = latent_replay(pc, op)
        assert pck.m == 8
        assert np.array_equal(pck.pivots, pc.pivots)
        K = cross_kernel(op.X, op.X, config)
        piv = pck.pivots
        C = K[:, piv]
        oracle = C @ np.linalg.solve(K[np.ix_(piv, piv)], C.T)
        assert_allclose(pck.approximation(), oracle, atol=1e-7)

    def test_latent_operator_passes_through(self):
        _, _, op = make_instance(15, seed=2, noise=0.0, mode="latent")
        pc = decompose(op, "var", rank=6)
        pck = latent_replay(pc, op)
        assert np.array_equal(pck.pivots, pc.pivots)
        assert np.array_equal(pck.factor(), pc.factor())

    def test_stops_at_latent_rank_deficiency(self):
        rng = np.random.default_rng(0)
        X = rng.random((12, 2))
        X[7] = X[2]
        # short lengthscale keeps the latent matrix well conditioned except
        # for the duplicated point, so the replay stops exactly there
        config = KernelConfig(lengthscales=0.1, noise_variance=0.05, jitter=0.0)
        op = GramOperator(X, config, mode="noisy")
        pc = decompose(op, "var")  # noise keeps the noisy matrix full rank
        assert pc.m == 12
        pck = latent_replay(pc, op)
        assert pck.m == 11


class TestNlml:
    def test_single_point_closed_form(self):
        X = np.array([[0.3]])
        config = KernelConfig(signal_variance=2.0, noise_variance=0.5, jitter=0.0)
        op = GramOperator(X, config, mode="noisy")
        pc = decompose(op, "var")
        y = np.array([1.3])
        g = 2.0 + 0.5
        expected = 0.5 * (np.log(2 * np.pi) + np.log(g) + 1.3**2 / g)
        assert nlml(pc, op, y) == pytest.approx(expected, rel=1e-12)

    def test_full_rank_matches_dense_marginal_likelihood(self, rng):
        _, config, op = make_instance(30, seed=11, noise=0.2, jitter=0.0)
        y = rng.normal(size=30)
        pc = decompose(op, "var")
        K = cross_kernel(op.X, op.X, config)
        assert nlml(pc, op, y) == pytest.approx(
            dense_nlml(K, 0.2, y), rel=1e-8
        )

    def test_terms_match_dense_oracle_at_partial_rank(self, rng):
        _, config, op = make_instance(40, seed=13, noise=0.3, jitter=0.0)
        y = rng.normal(size=40)
        pc = decompose(op, "var", rank=12)
        pck = latent_replay(pc, op)
        Lo = pck.unpivoted_factor()
        Q = Lo @ Lo.T
        K = cross_kernel(op.X, op.X, config)
        n = 40
        sigma2 = 0.3
        Qn = Q + sigma2 * np.eye(n)
        expected = 0.5 * (
            n * np.log(2 * np.pi)
            + np.linalg.slogdet(Qn)[1]
            + y @ np.linalg.solve(Qn, y)
            + np.trace(K - Q) / sigma2
        )
        assert nlml(pc, op, y) == pytest.approx(expected, rel=1e-7)

    def test_rank_zero_factor(self, rng):
        _, _, op = make_instance(15, seed=3, noise=0.4, jitter=0.0)
        y = rng.normal(size=15)
        pc = decompose(op, "var", rank=0)
        expected = 0.5 * (
            15 * np.log(2 * np.pi)
            + 15 * np.log(0.4)
            + y @ y / 0.4
            + 15 * 1.0 / 0.4
        )
        assert nlml(pc, op, y) == pytest.approx(expected, rel=1e-10)

    def test_upper_bounds_dense_value_at_every_rank(self, rng):
        _, config, op = make_instance(35, seed=17, noise=0.25, jitter=0.0)
        y = rng.normal(size=35)
        K = cross_kernel(op.X, op.X, config)
        exact = dense_nlml(K, 0.25, y)
        pc = decompose(op, "var", rank=20)
        for r in range(21):
            assert nlml(pc.truncate(r), op, y) >= exact - 1e-8

    def test_alternate_coefficients(self, rng):
        _, config, op = make_instance(20, seed=19, noise=0.3, jitter=0.0)
        y = rng.normal(size=20)
        pc = decompose(op, "var", rank=6)
        pck = latent_replay(pc, op)
        Lo = pck.unpivoted_factor()
        Q = Lo @ Lo.T
        K = cross_kernel(op.X, op.X, config)
        Qn = Q + 0.3 * np.eye(20)
        logdet = np.linalg.slogdet(Qn)[1]
        quad = y @ np.linalg.solve(Qn, y)
        expected = (
            0.5 * 20 * np.log(2 * np.pi)
            + 0.5 * quad
            + 0.5 * 20 * logdet
            + np.trace(K - Q) / 0.3
        )
        got = nlml(pc, op, y, paper_literal_coefficients=True)
        assert got == pytest.approx(expected, rel=1e-7)

    def test_mean_is_subtracted(self, rng):
        X = rng.random((18, 2))
        config = KernelConfig(lengthscales=0.5, noise_variance=0.2,
                              mean=1.5, jitter=0.0)
        op = GramOperator(X, config, mode="noisy")
        y = rng.normal(size=18) + 1.5
        pc = decompose(op, "var", rank=5)
        K = cross_kernel(X, X, config)
        config0 = KernelConfig(lengthscales=0.5, noise_variance=0.2, jitter=0.0)
        op0 = GramOperator(X, config0, mode="noisy")
        pc0 = decompose(op0, "var", rank=5)
        assert nlml(pc, op, y) == pytest.approx(
            nlml(pc0, op0, y - 1.5), rel=1e-10
        )

    def test_zero_noise_rejected(self):
        _, _, op = make_instance(10, noise=0.0)
        pc = decompose(op, "var", rank=3)
        with pytest.raises(ValueError):
            nlml(pc, op, np.ones(10))

    def test_metrics_row_holds_cell(self):
        row = MetricsRow(rank=3, sse=1.0, trace_residual=2.0, nlml=3.0,
                         seed=0, strategy="var")
        assert row.rank == 3 and row.strategy == "var"


class TestTraceBounds:
    def test_scaled_identity(self):
        rows = trace_bounds(DenseOperator(2.0 * np.eye(4)))
        for row in rows:
            assert row.m == pytest.approx(0.5)
            assert row.s == pytest.approx(1.0)
            assert row.v == pytest.approx(0.75)
            assert row.tau == pytest.approx(2.0)
            assert row.lower == pytest.approx(0.5)
            assert row.upper == pytest.approx(2.0)
            assert not row.violated()

    def test_constant_matrix_attains_both_bounds(self):
        rows = trace_bounds(DenseOperator(np.ones((3, 3))))
        for row in rows:
            assert row.lower == pytest.approx(3.0)
            assert row.tau == pytest.approx(3.0)
            assert row.upper == pytest.approx(3.0)
            assert row.v == pytest.approx(0.0, abs=1e-15)
            assert not row.violated()

    def test_tau_is_exact_trace_reduction(self):
        _, _, op = make_instance(25, seed=21, noise=0.1)
        rows = trace_bounds(op)
        expected = aopt_score(op.dense())
        got = np.array([row.tau for row in rows])
        assert_allclose(got, expected, rtol=1e-12)

    def test_bounds_bracket_tau_on_kernel_matrices(self):
        for seed in range(5):
            _, _, op = make_instance(30, seed=seed, noise=0.05)
            for row in trace_bounds(op):
                assert not row.violated()
                assert row.lower <= row.tau + 1e-10 * row.tau
                assert row.tau <= row.upper + 1e-10 * row.upper

    def test_variance_identity_is_exact(self):
        _, _, op = make_instance(12, seed=2, noise=0.3)
        for row in trace_bounds(op):
            assert row.v == row.s - row.m * row.m

    def test_negative_entry_strict_raises(self):
        M = np.array([[1.0, -0.5], [-0.5, 1.0]])
        with pytest.raises(AssumptionViolated) as info:
            trace_bounds(DenseOperator(M))
        assert info.value.row == 0
        assert info.value.col == 1

    def test_nonconstant_diagonal_strict_raises(self):
        with pytest.raises(AssumptionViolated) as info:
            trace_bounds(DenseOperator(np.diag([1.0, 2.0])))
        assert info.value.row == info.value.col

    def test_lenient_mode_flags_rows(self):
        M = np.array([[1.0, -0.5], [-0.5, 1.0]])
        rows = trace_bounds(DenseOperator(M), strict=False)
        assert len(rows) == 2
        assert not rows[0].assumption_ok
        assert rows[0].violated()

    def test_violation_slack(self):
        row = TraceBoundRow(index=0, m=1.0, v=0.0, s=1.0, tau=3.0 + 1e-12,
                            lower=3.0, upper=3.0)
        assert not row.violated()
        row_bad = TraceBoundRow(index=0, m=1.0, v=0.0, s=1.0, tau=3.0 + 1e-6,
                                lower=3.0, upper=3.0)
        assert row_bad.violated()
