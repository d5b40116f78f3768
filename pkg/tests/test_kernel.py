import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose, assert_array_equal

from bayesdd.errors import DimensionMismatchError, EmptyDatasetError, ParameterError
from bayesdd.kernel import KernelSpec, cross_kernel, eval_kernel, gram_matrix, self_kernel

GAUSS = KernelSpec("gaussian", 1.0)
LINEAR = KernelSpec("linear", 1.0)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def points(max_n=12, max_d=4):
    return st.integers(1, max_n).flatmap(
        lambda n: st.integers(1, max_d).flatmap(
            lambda d: arrays(np.float64, (n, d), elements=finite)))


class TestEvalKernel:
    def test_self_similarity_is_one(self):
        assert eval_kernel(GAUSS, [3.2, -1.0], [3.2, -1.0]) == 1.0

    def test_gaussian_formula(self):
        assert_allclose(eval_kernel(GAUSS, [0.0], [2.0]), math.exp(-2.0), rtol=1e-15)
        assert_allclose(eval_kernel(GAUSS, [0.0], [2.0]), 0.135335, atol=1e-6)

    def test_bandwidth_scaling(self):
        spec = KernelSpec("gaussian", 0.5)
        assert_allclose(eval_kernel(spec, [0.0, 0.0], [1.0, 0.0]), math.exp(-2.0), rtol=1e-15)

    def test_linear_is_dot_product(self):
        assert eval_kernel(LINEAR, [1, 2], [3, 4]) == 11.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            eval_kernel(GAUSS, [1.0, 2.0], [1.0])

    @pytest.mark.parametrize("bw", [0.0, -1.0])
    def test_bandwidth_must_be_positive(self, bw):
        with pytest.raises(ParameterError):
            KernelSpec("gaussian", bw)

    def test_unknown_family(self):
        with pytest.raises(ParameterError):
            KernelSpec("polynomial", 1.0)

    def test_spec_round_trip(self):
        spec = KernelSpec("gaussian", 0.3)
        assert KernelSpec.from_dict(spec.to_dict()) == spec


class TestGramMatrix:
    def test_single_point(self):
        g = gram_matrix(GAUSS, [[1.5, 2.0]])
        assert_array_equal(g.values, [[1.0]])
        assert_array_equal(g.degrees, [1.0])

    def test_identical_points(self):
        g = gram_matrix(GAUSS, [[0.3], [0.3]])
        assert_array_equal(g.values, np.ones((2, 2)))
        assert_array_equal(g.degrees, [2.0, 2.0])

    def test_two_points(self):
        e = math.exp(-2.0)
        g = gram_matrix(GAUSS, [[0.0], [2.0]])
        assert_allclose(g.values, [[1.0, e], [e, 1.0]], rtol=1e-15)
        assert_allclose(g.degrees, [1 + e, 1 + e], rtol=1e-15)

    def test_empty_input(self):
        with pytest.raises(EmptyDatasetError):
            gram_matrix(GAUSS, np.zeros((0, 3)))

    def test_read_only(self):
        g = gram_matrix(GAUSS, np.eye(3))
        with pytest.raises(ValueError):
            g.values[0, 0] = 2.0

    @settings(max_examples=60, deadline=None)
    @given(points())
    def test_invariants(self, X):
        for spec in (KernelSpec("gaussian", 1.7), LINEAR):
            g = gram_matrix(spec, X)
            K = g.values
            assert_array_equal(K, K.T)
            scale = max(1.0, np.abs(K).max())
            assert np.linalg.eigvalsh(K).min() >= -1e-8 * X.shape[0] * scale
            assert_allclose(g.degrees, [math.fsum(row) for row in K], rtol=1e-12,
                            atol=1e-12 * scale)
            assert_allclose(cross_kernel(spec, X, X), K, rtol=1e-12, atol=1e-12 * scale)
        g = gram_matrix(KernelSpec("gaussian", 0.9), X)
        assert_array_equal(np.diagonal(g.values), 1.0)
        assert np.all(g.values <= np.diagonal(g.values)[:, None])


class TestCrossKernel:
    def test_row_of_gram(self):
        X = np.array([[0.0, 1.0], [2.0, -1.0], [0.5, 0.5]])
        row = cross_kernel(GAUSS, X, X[:1])
        assert_allclose(row[0], gram_matrix(GAUSS, X).values[0], rtol=1e-15)

    def test_midpoint(self):
        e = math.exp(-0.5)
        assert_allclose(cross_kernel(GAUSS, [[0.0], [2.0]], [[1.0]]), [[e, e]], rtol=1e-15)

    def test_shape_is_m_by_n(self):
        assert cross_kernel(GAUSS, np.zeros((5, 2)), np.zeros((3, 2))).shape == (3, 5)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            cross_kernel(GAUSS, np.zeros((2, 2)), np.zeros((2, 3)))

    def test_self_kernel(self):
        Z = np.array([[1.0, 2.0], [3.0, 0.0]])
        assert_array_equal(self_kernel(GAUSS, Z), [1.0, 1.0])
        assert_array_equal(self_kernel(LINEAR, Z), [5.0, 9.0])

    def test_chunked_matches_direct(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(300, 40))
        Z = rng.normal(size=(700, 40))
        K = cross_kernel(KernelSpec("gaussian", 6.0), X, Z)
        d2 = ((Z[:, None, :] - X[None, :, :]) ** 2).sum(-1)
        assert_allclose(K, np.exp(-d2 / 72.0), rtol=1e-12)
