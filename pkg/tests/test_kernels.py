import math

import numpy as np
import pytest

from condalign import _gram_numpy
from condalign.errors import ShapeError
from condalign.kernels import (
    DEFAULT_BANDWIDTHS,
    KernelSpec,
    LabeledBatch,
    gaussian_mixture_kernel,
    gram,
    gram_gradient,
    label_gram,
)

# (1/5) * sum_m exp(-1 / (2 sigma_m^2)) over the default bandwidths,
# evaluated by a separate script
MIXTURE_AT_UNIT_DIST = 0.720298528031084

SINGLE = KernelSpec(bandwidths=(1.0,), weights=(1.0,))


class TestKernelSpec:
    def test_default_is_uniform_five_kernel(self):
        spec = KernelSpec()
        assert spec.bandwidths == DEFAULT_BANDWIDTHS
        assert spec.weights == (0.2,) * 5
        assert spec.reg_lambda == 1e-3

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(bandwidths=()),
            dict(bandwidths=(1.0, -1.0)),
            dict(bandwidths=(1.0, 0.0)),
            dict(bandwidths=(1.0,), weights=(0.5, 0.5)),
            dict(bandwidths=(1.0, 2.0), weights=(0.7, 0.2)),
            dict(bandwidths=(1.0, 2.0), weights=(1.2, -0.2)),
            dict(reg_lambda=0.0),
            dict(reg_lambda=-1e-3),
        ],
    )
    def test_invalid_specs(self, kwargs):
        with pytest.raises(ValueError):
            KernelSpec(**kwargs)


class TestScalarKernel:
    def test_zero_distance(self):
        x = np.array([0.3, -0.7, 2.0])
        assert gaussian_mixture_kernel(x, x, KernelSpec()) == 1.0

    def test_single_bandwidth(self):
        value = gaussian_mixture_kernel([0.0], [1.0], SINGLE)
        assert value == pytest.approx(math.exp(-0.5), abs=1e-12)

    def test_default_mixture_value(self):
        value = gaussian_mixture_kernel([0.0], [1.0], KernelSpec())
        assert value == pytest.approx(MIXTURE_AT_UNIT_DIST, abs=1e-15)

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            gaussian_mixture_kernel([0.0], [0.0, 1.0], KernelSpec())


class TestGram:
    def test_unit_diagonal(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((7, 3))
        k = gram(a, a, KernelSpec())
        assert np.array_equal(np.diag(k), np.ones(7))

    def test_single_pair_matches_scalar(self):
        a = np.array([[0.1, 0.2, 0.3]])
        b = np.array([[-0.4, 0.0, 1.0]])
        spec = KernelSpec()
        k = gram(a, b, spec)
        assert k.shape == (1, 1)
        assert k[0, 0] == pytest.approx(gaussian_mixture_kernel(a[0], b[0], spec), abs=1e-15)

    def test_entrywise_scalar_oracle(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(-1, 1, (4, 2))
        b = rng.uniform(-1, 1, (3, 2))
        spec = KernelSpec()
        k = gram(a, b, spec)
        for i in range(4):
            for j in range(3):
                assert k[i, j] == pytest.approx(
                    gaussian_mixture_kernel(a[i], b[j], spec), abs=1e-13
                )

    @pytest.mark.parametrize("seed", range(10))
    def test_symmetric_psd_bounded(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(-2, 2, (int(rng.integers(2, 10)), int(rng.integers(1, 5))))
        k = gram(a, a, KernelSpec())
        assert np.array_equal(k, k.T)
        assert k.min() >= 0.0 and k.max() <= 1.0
        assert np.linalg.eigvalsh(k).min() >= -1e-10

    def test_feature_dim_mismatch(self):
        with pytest.raises(ShapeError):
            gram(np.ones((2, 3)), np.ones((2, 4)), KernelSpec())

    def test_backends_agree(self):
        numba_impl = pytest.importorskip("condalign._gram_numba")
        rng = np.random.default_rng(9)
        a = rng.standard_normal((6, 4))
        b = rng.standard_normal((5, 4))
        coeff = rng.standard_normal((6, 5))
        bws, ws = KernelSpec().arrays()
        k_np = _gram_numpy.mixture_gram(a, b, bws, ws)
        k_nb = numba_impl.mixture_gram(a, b, bws, ws)
        assert np.allclose(k_np, k_nb, rtol=1e-12, atol=1e-14)
        g_np = _gram_numpy.mixture_gram_gradient(a, b, bws, ws, coeff)
        g_nb = numba_impl.mixture_gram_gradient(a, b, bws, ws, coeff)
        assert np.allclose(g_np, g_nb, rtol=1e-10, atol=1e-13)


class TestLabelGram:
    def test_identical_single_pair(self):
        y = np.array([[0.0, 1.0]])
        assert np.array_equal(label_gram(y, y), np.array([[1.0]]))

    def test_two_class_example(self):
        ya = np.array([[1.0, 0.0], [0.0, 1.0]])  # classes 0, 1
        yb = np.array([[0.0, 1.0], [0.0, 1.0]])  # classes 1, 1
        assert np.array_equal(label_gram(ya, yb), np.array([[0.0, 0.0], [1.0, 1.0]]))

    @pytest.mark.parametrize("seed", range(5))
    def test_matmul_oracle(self, seed):
        rng = np.random.default_rng(seed)
        ya = np.eye(4)[rng.integers(0, 4, 6)]
        yb = np.eye(4)[rng.integers(0, 4, 5)]
        assert np.array_equal(label_gram(ya, yb), ya @ yb.T)

    def test_block_indicator(self):
        rng = np.random.default_rng(17)
        y = np.eye(3)[rng.integers(0, 3, 8)]
        l = label_gram(y, y)
        classes = y.argmax(axis=1)
        expected = (classes[:, None] == classes[None, :]).astype(float)
        assert np.array_equal(l, expected)

    def test_class_count_mismatch(self):
        with pytest.raises(ShapeError):
            label_gram(np.eye(2), np.eye(3))


def fd_gram_objective(a, b, spec, coeff, h=1e-5):
    def objective():
        bws, ws = spec.arrays()
        sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        k = sum(w * np.exp(-sq / (2 * s * s)) for w, s in zip(ws, bws))
        return float(np.sum(coeff * k))

    grad = np.zeros_like(a)
    flat, gf = a.ravel(), grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = objective()
        flat[i] = orig - h
        fm = objective()
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * h)
    return grad


class TestGramGradient:
    def test_same_batch_identity_coeff_is_zero(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((5, 3))
        g = gram_gradient(a, a, KernelSpec(), np.eye(5))
        assert np.array_equal(g, np.zeros((5, 3)))

    def test_single_pair_value(self):
        g = gram_gradient(
            np.array([[0.0]]), np.array([[1.0]]), SINGLE, np.array([[1.0]])
        )
        assert g[0, 0] == pytest.approx(math.exp(-0.5), abs=1e-12)

    @pytest.mark.parametrize("seed", range(50))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        na, nb = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        d = int(rng.integers(1, 4))
        a = rng.uniform(-1, 1, (na, d))
        b = rng.uniform(-1, 1, (nb, d))
        coeff = rng.uniform(-1, 1, (na, nb))
        spec = KernelSpec()
        analytic = gram_gradient(a, b, spec, coeff)
        numeric = fd_gram_objective(a, b, spec, coeff)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
        assert np.max(np.abs(analytic - numeric) / denom) < 1e-6

    def test_coeff_shape_mismatch(self):
        with pytest.raises(ShapeError):
            gram_gradient(np.ones((2, 2)), np.ones((3, 2)), KernelSpec(), np.ones((2, 2)))


class TestLabeledBatch:
    def test_valid(self):
        b = LabeledBatch(np.zeros((2, 3)), np.eye(2))
        assert b.size == 2

    def test_row_mismatch(self):
        with pytest.raises(ShapeError):
            LabeledBatch(np.zeros((2, 3)), np.eye(3))

    def test_not_one_hot(self):
        with pytest.raises(ValueError):
            LabeledBatch(np.zeros((2, 3)), np.full((2, 2), 0.5))
