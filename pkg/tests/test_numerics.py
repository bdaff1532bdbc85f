import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ibpdn.numerics import (
    NumericalError,
    as_matrix,
    least_squares,
    nullspace_projector,
    pseudoinverse,
    range_projector,
    singular_values_stack,
    svd,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def small_matrices(max_side=8):
    shapes = st.tuples(st.integers(1, max_side), st.integers(1, max_side))
    return shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite))


class TestSvd:
    def test_identity(self):
        f = svd(np.eye(3), 1e-12)
        np.testing.assert_allclose(f.singular_values, [1, 1, 1])

    def test_diagonal_rank_one(self):
        f = svd(np.diag([3.0, 0.0]), 1e-12)
        np.testing.assert_allclose(f.singular_values, [3.0])
        assert f.rank == 1

    def test_all_ones(self):
        # A^T A = [[2,2],[2,2]] has eigenvalues {4, 0}
        f = svd([[1.0, 1.0], [1.0, 1.0]])
        np.testing.assert_allclose(f.singular_values, [2.0])

    def test_zero_matrix_has_rank_zero(self):
        f = svd(np.zeros((3, 2)))
        assert f.rank == 0
        np.testing.assert_array_equal(f.reconstruct(), np.zeros((3, 2)))

    def test_deterministic(self, rng):
        a = rng.standard_normal((7, 5))
        f1, f2 = svd(a), svd(a)
        np.testing.assert_array_equal(f1.u, f2.u)
        np.testing.assert_array_equal(f1.singular_values, f2.singular_values)

    def test_rejects_non_finite(self):
        with pytest.raises(NumericalError):
            svd([[1.0, np.nan]])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            as_matrix(np.zeros((0, 3)))

    def test_numerical_error_is_arithmetic(self):
        assert issubclass(NumericalError, ArithmeticError)

    @settings(max_examples=60, deadline=None)
    @given(small_matrices())
    def test_reconstruction(self, a):
        f = svd(a)
        smax = np.linalg.norm(a, 2)
        err = np.abs(f.reconstruct() - a).max()
        assert err <= 1e-10 * smax


class TestPseudoinverse:
    def test_identity(self):
        np.testing.assert_allclose(pseudoinverse(np.eye(4)), np.eye(4))

    def test_unit_column(self):
        np.testing.assert_allclose(pseudoinverse([[1.0], [0.0]]), [[1.0, 0.0]])

    def test_diagonal(self):
        np.testing.assert_allclose(pseudoinverse([[2.0, 0.0], [0.0, 0.0]]), [[0.5, 0.0], [0.0, 0.0]])

    @pytest.mark.parametrize("shape", [(3, 7), (12, 5), (50, 50), (20, 35)])
    def test_penrose_identities(self, rng, shape):
        a = rng.standard_normal(shape)
        p = pseudoinverse(a)
        assert np.abs(a @ p @ a - a).max() < 1e-8
        assert np.abs(p @ a @ p - p).max() < 1e-8

    def test_rank_deficient(self, rng):
        a = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 5))
        p = pseudoinverse(a)
        assert np.abs(a @ p @ a - a).max() < 1e-8
        assert np.abs(p @ a @ p - p).max() < 1e-8


class TestProjectors:
    def test_range_of_unit_column(self):
        np.testing.assert_allclose(range_projector([[1.0], [0.0], [0.0]]), np.diag([1.0, 0, 0]))

    def test_range_of_orthonormal_columns(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((6, 3)))
        np.testing.assert_allclose(range_projector(q), q @ q.T, atol=1e-12)

    def test_trace_equals_rank(self, rng):
        omega = rng.standard_normal((5, 2))
        p = range_projector(omega)
        # independent route: count unit eigenvalues
        ones = int(np.sum(np.abs(np.linalg.eigvalsh(p) - 1.0) < 1e-8))
        assert ones == 2
        assert np.trace(p) == pytest.approx(2.0, abs=1e-12)

    def test_complement_of_unit_column(self):
        np.testing.assert_allclose(nullspace_projector([[1.0], [0.0], [0.0]]), np.diag([0.0, 1, 1]))

    def test_complement_of_square_invertible(self, rng):
        a = rng.standard_normal((4, 4))
        assert np.abs(nullspace_projector(a)).max() < 1e-12

    @settings(max_examples=60, deadline=None)
    @given(small_matrices())
    def test_idempotent_symmetric(self, a):
        for p in (range_projector(a), nullspace_projector(a)):
            assert np.abs(p @ p - p).max() < 1e-8
            assert np.abs(p - p.T).max() < 1e-8


class TestLeastSquares:
    def test_identity(self):
        np.testing.assert_allclose(least_squares(np.eye(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_mean_of_entries(self):
        np.testing.assert_allclose(least_squares([[1.0], [1.0]], [2.0, 0.0]), [1.0])

    def test_overdetermined_consistent(self, rng):
        a = rng.standard_normal((9, 4))
        x0 = rng.standard_normal(4)
        x = least_squares(a, a @ x0)
        assert np.linalg.norm(a @ x - a @ x0) < 1e-10
        np.testing.assert_allclose(x, x0, atol=1e-10)

    def test_matches_lstsq(self, rng):
        a = rng.standard_normal((8, 5))
        b = rng.standard_normal(8)
        np.testing.assert_allclose(least_squares(a, b), np.linalg.lstsq(a, b, rcond=None)[0], atol=1e-12)


def test_singular_values_stack_matches_loop(rng):
    stack = rng.standard_normal((6, 5, 3))
    got = singular_values_stack(stack)
    want = np.array([np.linalg.svd(s, compute_uv=False) for s in stack])
    np.testing.assert_allclose(got, want, atol=1e-12)
