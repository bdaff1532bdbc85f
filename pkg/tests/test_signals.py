import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ibpdn.signals import (
    SupportSet,
    best_k_term,
    compressibility_error,
    generate_signal,
    known_support,
    read_vector,
    restrict,
    support_from_threshold,
    write_vector,
)

vectors = arrays(np.float64, st.integers(1, 12), elements=st.floats(-100, 100, allow_nan=False))


class TestSupportSet:
    def test_sorted_and_deduplicated(self):
        s = SupportSet.from_indices([3, 1, 3], 5)
        assert s.indices == (1, 3)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            SupportSet.from_indices([5], 5)

    def test_set_algebra(self):
        a = SupportSet.from_indices([0, 1, 2], 6)
        b = SupportSet.from_indices([2, 3], 6)
        assert a.union(b).indices == (0, 1, 2, 3)
        assert a.difference(b).indices == (0, 1)
        assert a.intersection(b).indices == (2,)
        assert a.complement().indices == (3, 4, 5)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            SupportSet.empty(3).union(SupportSet.empty(4))

    def test_of(self):
        assert SupportSet.of([0.0, 2.0, 0.0, -1.0]).indices == (1, 3)


class TestRestrict:
    def test_basic(self):
        np.testing.assert_array_equal(restrict([1.0, 2, 3], SupportSet.from_indices([0, 2], 3)), [1, 0, 3])

    def test_empty(self):
        np.testing.assert_array_equal(restrict([1.0, 2, 3], SupportSet.empty(3)), [0, 0, 0])

    def test_full(self):
        np.testing.assert_array_equal(restrict([1.0, 2, 3], SupportSet.full(3)), [1, 2, 3])

    @settings(max_examples=80, deadline=None)
    @given(vectors, st.data())
    def test_partition_is_exact(self, x, data):
        idx = data.draw(st.sets(st.integers(0, x.size - 1)))
        s = SupportSet.from_indices(idx, x.size)
        np.testing.assert_array_equal(restrict(x, s) + restrict(x, s.complement()), x)


class TestBestKTerm:
    def test_largest(self):
        np.testing.assert_array_equal(best_k_term([3.0, 1, 0, 0], 1), [3, 0, 0, 0])

    def test_k_zero(self):
        np.testing.assert_array_equal(best_k_term([3.0, 1], 0), [0, 0])

    def test_tie_lowest_index(self):
        np.testing.assert_array_equal(best_k_term([2.0, -2, 1], 1), [2, 0, 0])

    @settings(max_examples=80, deadline=None)
    @given(vectors)
    def test_tail_nonincreasing(self, x):
        tails = [np.abs(x - best_k_term(x, k)).sum() for k in range(x.size + 1)]
        assert all(b <= a for a, b in zip(tails, tails[1:]))
        assert tails[-1] == 0


class TestCompressibilityError:
    def test_single(self):
        assert compressibility_error([3.0, 1, 0, 0], 1) == 1.0

    def test_two_tail_entries(self):
        assert compressibility_error([2.0, -1, 1, 0], 1) == 2.0

    def test_scaled_by_root_k(self):
        assert compressibility_error([4.0, 3, 2, 2], 4 - 2) == pytest.approx(4 / np.sqrt(2))

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            compressibility_error([1.0, 2.0], 3)

    def test_sparse_gives_zero(self):
        assert compressibility_error([0.0, 5, 0, -1], 2) == 0.0

    @settings(max_examples=80, deadline=None)
    @given(vectors, st.data())
    def test_zero_iff_k_sparse(self, r, data):
        k = data.draw(st.integers(1, r.size))
        assert (compressibility_error(r, k) == 0) == (np.count_nonzero(r) <= k)


class TestGenerateSignal:
    def test_zero_sparsity(self):
        x, s = generate_signal(10, 0, "exact_sparse", 1)
        assert not x.any() and len(s) == 0

    def test_full_support(self):
        x, s = generate_signal(10, 10, "exact_sparse", 1)
        assert len(s) == 10 and np.all(x != 0)

    def test_deterministic(self):
        x1, s1 = generate_signal(50, 7, "power_law", 99)
        x2, s2 = generate_signal(50, 7, "power_law", 99)
        np.testing.assert_array_equal(x1, x2)
        assert s1 == s2

    def test_exact_sparse_count(self):
        x, s = generate_signal(40, 6, "exact_sparse", 3)
        assert np.count_nonzero(x) == 6 and SupportSet.of(x) == s

    def test_power_law_dense(self):
        x, s = generate_signal(40, 6, "power_law", 3)
        assert np.count_nonzero(x) == 40
        assert len(s) == 6
        # the marked head holds the largest magnitudes
        assert np.abs(x[s.array]).min() >= np.abs(np.delete(x, s.array)).max()

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            generate_signal(5, 1, "gamma")


class TestKnownSupport:
    def test_good_and_spurious(self):
        truth = SupportSet.from_indices(range(16), 128)
        t = known_support(truth, 0.75, 2, 7)
        assert len(t.intersection(truth)) == 12
        assert len(t.difference(truth)) == 2

    def test_deterministic(self):
        truth = SupportSet.from_indices([1, 5, 9], 20)
        assert known_support(truth, 0.5, 3, 4) == known_support(truth, 0.5, 3, 4)

    def test_too_many_spurious(self):
        with pytest.raises(ValueError):
            known_support(SupportSet.from_indices([0, 1], 3), 1.0, 2, 0)


class TestThreshold:
    def test_basic(self):
        assert support_from_threshold([0.1, -3, 0.05], 0.5).indices == (1,)

    def test_zero_tau(self):
        assert len(support_from_threshold([1.0, -2, 3], 0.0)) == 3

    def test_large_tau(self):
        assert len(support_from_threshold([1.0, -2, 3], 3.0)) == 0


def test_vector_round_trip(tmp_path, rng):
    x = rng.standard_normal(9)
    path = tmp_path / "x.txt"
    write_vector(path, x)
    np.testing.assert_array_equal(read_vector(path), x)
    assert len(path.read_text().splitlines()) == 9
