import math

import numpy as np
import pytest

from core.errors import ParameterError, ShapeError
from core.numkit import (
    RngStream,
    as_matrix,
    matmul,
    quantile,
    sample_bernoulli,
    sample_std_normal,
    sample_uniform,
)


def oracle_quantile(values, q):
    ordered = sorted(values)
    h = (len(ordered) - 1) * q
    lo = math.floor(h)
    hi = math.ceil(h)
    return ordered[lo] + (h - lo) * (ordered[hi] - ordered[lo])


class TestRngStream:
    """Seeded streams and their children"""

    def test_same_seed_and_path_repeat(self):
        a = RngStream(7).child("weights", 3)
        b = RngStream(7).child("weights", 3)
        assert [a.next_u64() for _ in range(20)] == [b.next_u64() for _ in range(20)]

    def test_distinct_labels_differ(self):
        a = RngStream(7).child("weights", 1)
        b = RngStream(7).child("weights", 2)
        c = RngStream(7).child("noise", 1)
        first = [s.next_u64() for s in (a, b, c)]
        assert len(set(first)) == 3

    def test_child_does_not_advance_parent(self):
        parent = RngStream(11)
        reference = RngStream(11)
        child = parent.child("x")
        child.next_u64()
        assert parent.next_u64() == reference.next_u64()

    def test_floats_in_unit_interval(self):
        rng = RngStream(3)
        values = [rng.next_float() for _ in range(10000)]
        assert min(values) >= 0.0
        assert max(values) < 1.0

    def test_permutation(self):
        order = RngStream(5).permutation(50)
        assert sorted(order.tolist()) == list(range(50))
        assert order.tolist() != list(range(50))

    def test_next_below_range(self):
        rng = RngStream(9)
        draws = {rng.next_below(4) for _ in range(500)}
        assert draws == {0, 1, 2, 3}


class TestMatmul:
    """Checked matrix product"""

    def test_identity(self):
        out = matmul(np.eye(2), [[3.0], [-1.0]])
        np.testing.assert_array_equal(out, [[3.0], [-1.0]])

    def test_hand_product(self):
        np.testing.assert_array_equal(matmul([[1.0, 2.0]], [[3.0], [-1.0]]), [[1.0]])

    def test_zero_annihilates(self):
        b = np.arange(4.0).reshape(2, 2)
        np.testing.assert_array_equal(matmul(np.zeros((2, 2)), b), np.zeros((2, 2)))

    def test_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(np.ones((2, 3)), np.ones((2, 2)))

    def test_associativity(self):
        gen = np.random.default_rng(0)
        for _ in range(200):
            m, n, p, q = gen.integers(1, 9, size=4)
            a = gen.uniform(-2, 2, (m, n))
            b = gen.uniform(-2, 2, (n, p))
            c = gen.uniform(-2, 2, (p, q))
            diff = np.abs(matmul(matmul(a, b), c) - matmul(a, matmul(b, c))).max()
            assert diff <= 1e-10


def test_as_matrix_row_major():
    m = as_matrix([1, 2, 3, 4, 5, 6], 2, 3)
    assert m.shape == (2, 3)
    assert m[1, 0] == 4.0
    with pytest.raises(ShapeError):
        as_matrix([1, 2, 3], 2, 2)


class TestSampling:
    """Uniform, normal and Bernoulli draws"""

    def test_uniform_range(self):
        m = sample_uniform(RngStream(1), 0.0, 2.0, 30, 30)
        assert m.shape == (30, 30)
        assert m.min() >= 0.0 and m.max() < 2.0

    def test_uniform_reproducible(self):
        a = sample_uniform(RngStream(4).child("w"), -2.0, 2.0, 3, 4)
        b = sample_uniform(RngStream(4).child("w"), -2.0, 2.0, 3, 4)
        np.testing.assert_array_equal(a, b)

    def test_uniform_consumes_rows_times_cols(self):
        rng = RngStream(8)
        sample_uniform(rng, 0.0, 1.0, 3, 5)
        reference = RngStream(8)
        for _ in range(15):
            reference.next_u64()
        assert rng.next_u64() == reference.next_u64()

    def test_uniform_mean(self):
        m = sample_uniform(RngStream(2), -2.0, 2.0, 1, 100000)
        assert abs(m.mean()) < 0.05

    def test_uniform_rejects_empty_interval(self):
        with pytest.raises(ParameterError):
            sample_uniform(RngStream(0), 1.0, 1.0, 1, 1)

    def test_normal_shape_and_reproducible(self):
        a = sample_std_normal(RngStream(6), 3, 2)
        assert a.shape == (3, 2)
        np.testing.assert_array_equal(a, sample_std_normal(RngStream(6), 3, 2))

    def test_normal_variance(self):
        m = sample_std_normal(RngStream(12), 1, 100000)
        assert abs(m.var() - 1.0) < 0.05
        assert abs(m.mean()) < 0.05

    def test_normal_odd_count_is_prefix_of_even(self):
        odd = sample_std_normal(RngStream(13), 1, 3).ravel()
        even = sample_std_normal(RngStream(13), 1, 4).ravel()
        np.testing.assert_array_equal(odd, even[:3])

    @pytest.mark.parametrize("p, expected", [(0.0, 0), (1.0, 1)])
    def test_bernoulli_degenerate(self, p, expected):
        draws = sample_bernoulli(RngStream(3), p, 100)
        assert np.all(draws == expected)

    def test_bernoulli_frequency(self):
        draws = sample_bernoulli(RngStream(21), 0.3, 100000)
        assert abs(draws.mean() - 0.3) < 0.01

    @pytest.mark.parametrize("p", [-0.1, 1.5])
    def test_bernoulli_rejects_bad_p(self, p):
        with pytest.raises(ParameterError):
            sample_bernoulli(RngStream(0), p, 3)


class TestQuantile:
    """Linear-interpolation quantile"""

    def test_middle(self):
        assert quantile([1, 2, 3], 0.5) == 2

    def test_third_quartile(self):
        assert quantile([1, 2, 3, 4], 0.75) == pytest.approx(3.25)

    @pytest.mark.parametrize("q", [0.0, 0.3, 0.75, 1.0])
    def test_singleton(self, q):
        assert quantile([5], q) == 5

    def test_empty(self):
        with pytest.raises(ParameterError):
            quantile([], 0.5)

    def test_matches_sort_and_interpolate(self):
        gen = np.random.default_rng(1)
        for _ in range(1000):
            values = gen.normal(size=gen.integers(1, 40)).round(gen.integers(0, 3)).tolist()
            q = float(gen.uniform())
            assert abs(quantile(values, q) - oracle_quantile(values, q)) <= 1e-12
