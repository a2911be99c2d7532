import numpy as np
import pytest

from colangevin.numerics import (
    RankDeficiencyError,
    frobenius_norm,
    make_rng,
    matmul,
    orthonormalize_columns,
    spawn_rngs,
    standard_normal_matrix,
    transpose,
)


class TestRng:
    def test_same_seed_same_draws(self):
        a = standard_normal_matrix(2, 3, make_rng(7))
        b = standard_normal_matrix(2, 3, make_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self):
        a = standard_normal_matrix(2, 3, make_rng(7))
        b = standard_normal_matrix(2, 3, make_rng(8))
        assert np.any(a != b)

    def test_spawn_streams_are_independent_and_reproducible(self):
        r1 = spawn_rngs(0, 3)
        r2 = spawn_rngs(0, 3)
        for a, b in zip(r1, r2):
            np.testing.assert_array_equal(a.standard_normal(5), b.standard_normal(5))
        assert np.any(r1[0].standard_normal(5) != r1[1].standard_normal(5))

    def test_law_of_large_numbers_moments(self):
        draws = standard_normal_matrix(1000, 1000, make_rng(123))
        assert abs(draws.mean()) < 0.01
        assert abs(draws.var() - 1.0) < 0.01

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            standard_normal_matrix(0, 3, make_rng(0))


class TestDenseKernel:
    def test_matmul_identity(self):
        rng = make_rng(1)
        a = rng.standard_normal((3, 4))
        np.testing.assert_allclose(matmul(np.eye(3), a), a)

    def test_matmul_dim_mismatch(self):
        with pytest.raises(ValueError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_transpose_involution(self):
        a = make_rng(2).standard_normal((4, 2))
        np.testing.assert_array_equal(transpose(transpose(a)), a)

    def test_frobenius_345(self):
        assert frobenius_norm(np.array([[3.0, 4.0]])) == pytest.approx(5.0)

    def test_matmul_associativity(self):
        rng = make_rng(3)
        a, b, c = (rng.standard_normal((5, 5)) for _ in range(3))
        lhs = matmul(matmul(a, b), c)
        rhs = matmul(a, matmul(b, c))
        assert frobenius_norm(lhs - rhs) / frobenius_norm(lhs) < 1e-12


class TestOrthonormalize:
    def test_already_orthonormal_is_fixed_point(self):
        q = orthonormalize_columns(make_rng(4).standard_normal((6, 3)))
        np.testing.assert_allclose(orthonormalize_columns(q), q, atol=1e-14)

    def test_diagonal_scaling_removed(self):
        np.testing.assert_allclose(orthonormalize_columns(np.diag([2.0, 3.0])), np.eye(2), atol=1e-15)

    def test_negative_column_sign_fixed(self):
        # sign convention: nonnegative diagonal of the triangular factor
        a = np.diag([-2.0, 3.0])
        np.testing.assert_allclose(orthonormalize_columns(a), np.diag([-1.0, 1.0]), atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_residual_random(self, seed):
        a = make_rng(seed).standard_normal((5, 3))
        q = orthonormalize_columns(a)
        assert frobenius_norm(q.T @ q - np.eye(3)) <= 1e-12

    def test_span_preserved(self):
        a = make_rng(11).standard_normal((7, 3))
        q = orthonormalize_columns(a)
        # columns of a must be reproducible from q
        coeff = q.T @ a
        np.testing.assert_allclose(q @ coeff, a, atol=1e-12)

    def test_rank_deficient_raises(self):
        a = np.ones((4, 2))
        with pytest.raises(RankDeficiencyError):
            orthonormalize_columns(a)

    def test_wide_matrix_rejected(self):
        with pytest.raises(ValueError):
            orthonormalize_columns(np.ones((2, 4)))
