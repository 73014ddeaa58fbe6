import numpy as np
import pytest
from numpy.testing import assert_allclose

from pivotgp.decomposition import decompose
from pivotgp.preconditioner import LowRankTriangular, build_preconditioner

from conftest import make_instance


def pivoted_gram(op, perm):
    G = op.dense()
    return G[np.ix_(perm, perm)]


def build(n=40, m=10, seed=0, noise=0.1, strategy="var"):
    _, _, op = make_instance(n, seed=seed, noise=noise)
    pc = decompose(op, strategy, rank=m)
    return op, pc, build_preconditioner(pc)


class TestStructure:
    def test_dense_factor_is_lower_triangular(self):
        _, _, lt = build()
        Lt = lt.dense()
        assert_allclose(Lt, np.tril(Lt), atol=0)
        assert np.all(np.diag(Lt) > 0)

    def test_diagonal_zeroed_on_pivot_block(self):
        _, pc, lt = build(m=7)
        assert np.array_equal(lt.resid_diag[:7], np.zeros(7))
        assert np.all(lt.resid_diag[7:] > 0)

    def test_columns_are_shared_not_copied(self):
        _, pc, lt = build()
        assert lt.cols.base is pc.L

    def test_reconstruction_splits_into_diag_plus_low_rank(self):
        # Lt Lt' must equal the factorized matrix on its diagonal and the
        # low-rank reconstruction off it
        op, pc, lt = build(n=30, m=8)
        Gp = pivoted_gram(op, pc.perm)
        L = pc.factor()
        Khat = L @ L.T
        expected = Khat + np.diag(np.diag(Gp) - np.diag(Khat))
        assert_allclose(lt.dense() @ lt.dense().T, expected, atol=1e-9)

    def test_diagonal_matches_target_matrix_exactly(self):
        op, pc, lt = build(n=30, m=8)
        Gp = pivoted_gram(op, pc.perm)
        M = lt.dense() @ lt.dense().T
        assert_allclose(np.diag(M), np.diag(Gp), atol=1e-10)


class TestSolves:
    def test_lower_solve_matches_dense(self, rng):
        _, _, lt = build(n=35, m=12)
        b = rng.normal(size=35)
        assert_allclose(lt.solve_lower(b), np.linalg.solve(lt.dense(), b), atol=1e-12)

    def test_upper_solve_matches_dense(self, rng):
        _, _, lt = build(n=35, m=12)
        b = rng.normal(size=35)
        assert_allclose(lt.solve_upper(b), np.linalg.solve(lt.dense().T, b), atol=1e-12)

    def test_apply_inverse_matches_dense(self, rng):
        _, _, lt = build(n=35, m=12)
        b = rng.normal(size=35)
        M = lt.dense() @ lt.dense().T
        assert_allclose(lt.apply_inverse(b), np.linalg.solve(M, b), atol=1e-11)

    def test_solves_are_linear(self, rng):
        _, _, lt = build(n=25, m=6)
        u, v = rng.normal(size=(2, 25))
        assert_allclose(
            lt.apply_inverse(2.0 * u - 3.0 * v),
            2.0 * lt.apply_inverse(u) - 3.0 * lt.apply_inverse(v),
            atol=1e-10,
        )

    def test_round_trip(self, rng):
        _, _, lt = build(n=25, m=6)
        x = rng.normal(size=25)
        Lt = lt.dense()
        assert_allclose(lt.solve_lower(Lt @ x), x, atol=1e-11)
        assert_allclose(lt.solve_upper(Lt.T @ x), x, atol=1e-11)


class TestEdgeRanks:
    def test_rank_zero_is_diagonal_scaling(self, rng):
        op, pc, lt = build(n=20, m=0)
        assert lt.m == 0
        b = rng.normal(size=20)
        assert_allclose(lt.apply_inverse(b), b / op.diag(), rtol=1e-12)

    def test_full_rank_is_exact_cholesky(self, rng):
        op, pc, lt = build(n=20, m=20)
        Gp = pivoted_gram(op, pc.perm)
        b = rng.normal(size=20)
        assert_allclose(lt.apply_inverse(b), np.linalg.solve(Gp, b), atol=1e-8)

    def test_floor_keeps_exactly_low_rank_residual_positive(self):
        # a wide-lengthscale matrix is numerically low rank, so many residual
        # variances hit zero; the floor must keep the factor invertible
        rng = np.random.default_rng(3)
        X = rng.random((30, 1))
        from pivotgp.kernels import KernelConfig
        from pivotgp.operators import GramOperator

        config = KernelConfig(lengthscales=5.0, noise_variance=0.0, jitter=0.0)
        op = GramOperator(X, config, mode="latent")
        pc = decompose(op, "var", rank=12)
        lt = build_preconditioner(pc)
        assert np.all(lt.resid_diag[12:] > 0)
        x = lt.apply_inverse(np.ones(30))
        assert np.all(np.isfinite(x))

    def test_explicit_floor_respected(self):
        _, pc, _ = build(n=15, m=5)
        lt = build_preconditioner(pc, floor=4.0)
        assert np.all(lt.resid_diag[5:] >= 2.0)


class TestSpdSampling:
    def test_inverse_is_positive_definite(self, rng):
        _, _, lt = build(n=30, m=9)
        for _ in range(20):
            v = rng.normal(size=30)
            quad = v @ lt.apply_inverse(v)
            assert quad > 0


class TestConstruction:
    def test_manual_assembly(self):
        cols = np.array([[2.0], [1.0], [0.5]])
        dt = np.array([0.0, 3.0, 4.0])
        lt = LowRankTriangular(cols, dt, np.array([0, 1, 2]))
        expected = np.array([[2.0, 0.0, 0.0], [1.0, 3.0, 0.0], [0.5, 0.0, 4.0]])
        assert_allclose(lt.dense(), expected, atol=0)
        b = np.array([2.0, 4.0, 5.0])
        assert_allclose(lt.solve_lower(b), np.linalg.solve(expected, b), atol=1e-14)

    def test_inverse_permutation_consistent(self):
        _, pc, lt = build(n=18, m=5)
        assert np.array_equal(lt.perm[lt.inv_perm], np.arange(18))
        assert np.array_equal(lt.perm, pc.perm)
