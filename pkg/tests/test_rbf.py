"""Gaussian radial-basis head: output mapping, evaluation, derivatives."""
import numpy as np
import pytest

from deepsurrogate.nn.network import DenseNetwork, init_dense
from deepsurrogate.nn.rbf import RbfExpansion, SCALE_FLOOR, rbf_eval, \
    rbf_eval_batch, rbf_head, split_head_outputs

from conftest import assert_rel_close

DOMAIN = ((0.0, 200.0), (0.0, 20.0))


def direct_sum(expansion, x):
    """Independent sum-of-Gaussians oracle."""
    total = 0.0
    for c, mu, s in zip(expansion.coeffs, expansion.means, expansion.scales):
        z = ((np.asarray(x) - mu) / s) ** 2
        total += c * np.exp(-z.sum())
    return total


def zero_head(K, input_dim=2):
    return DenseNetwork(weights=[np.zeros((5 * K, input_dim))],
                        biases=[np.zeros(5 * K)])


def test_zero_network_expansion_is_zero_everywhere():
    exp = rbf_head(zero_head(3), theta=np.zeros(2), K=3)
    np.testing.assert_array_equal(exp.coeffs, np.zeros(3))
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.uniform([0.0, 0.0], [200.0, 20.0])
        assert rbf_eval(exp, x, coords=()).value == 0.0


def test_k1_hand_outputs_peak_value():
    # raw layout [c, mu_raw(2), s_raw(2)]; value at the mean is the
    # coefficient (Gaussian peak)
    net = zero_head(1)
    net.biases[0][:] = [2.5, -0.3, 0.4, 0.0, 0.0]
    exp = rbf_head(net, theta=np.zeros(2), K=1)
    expected_mean = np.array([100.0 + 100.0 * -0.3, 10.0 + 10.0 * 0.4])
    np.testing.assert_allclose(exp.means[0], expected_mean, rtol=1e-15)
    jet = rbf_eval(exp, expected_mean, coords=())
    np.testing.assert_allclose(jet.value, 2.5, rtol=1e-15)


def test_random_head_matches_direct_sum_oracle():
    rng = np.random.default_rng(1)
    net = init_dense([3, 8, 5 * 4], seed=5)
    for _ in range(5):
        theta = rng.normal(size=3)
        exp = rbf_head(net, theta, K=4)
        x = rng.uniform([0.0, 0.0], [200.0, 20.0])
        assert_rel_close(rbf_eval(exp, x, coords=()).value,
                         direct_sum(exp, x), 1e-12, "expansion value")


def test_head_output_dim_must_be_5k():
    with pytest.raises(ValueError):
        rbf_head(init_dense([2, 7], seed=0), theta=np.zeros(2), K=1)
    with pytest.raises(ValueError):
        split_head_outputs(np.zeros(12))


def test_scales_always_positive():
    rng = np.random.default_rng(2)
    for _ in range(20):
        raw = rng.uniform(-50.0, 50.0, 5 * 6)
        _, _, scales = split_head_outputs(raw)
        assert np.all(scales >= SCALE_FLOOR)


def test_expansion_rejects_nonpositive_scales():
    with pytest.raises(ValueError):
        RbfExpansion(coeffs=[1.0], means=[[0.0, 0.0]], scales=[[1.0, 0.0]])


def test_empty_expansion_evaluates_to_zero():
    exp = RbfExpansion(coeffs=np.zeros(0), means=np.zeros((0, 2)),
                       scales=np.zeros((0, 2)))
    jet = rbf_eval(exp, [3.0, 4.0], coords=(0, 1))
    assert jet.value == 0.0
    np.testing.assert_array_equal(jet.grad, [0.0, 0.0])


def test_single_gaussian_extremum_at_mean():
    exp = RbfExpansion(coeffs=[1.7], means=[[50.0, 5.0]], scales=[[4.0, 2.0]])
    jet = rbf_eval(exp, [50.0, 5.0], coords=(0, 1))
    np.testing.assert_allclose(jet.value, 1.7, rtol=1e-15)
    np.testing.assert_array_equal(jet.grad, [0.0, 0.0])
    assert np.all(jet.hess_diag < 0)
    # closed form at the peak: d2/dx_c2 = -2 c / s_c^2
    np.testing.assert_allclose(jet.hess_diag,
                               [-2.0 * 1.7 / 16.0, -2.0 * 1.7 / 4.0],
                               rtol=1e-12)


def test_rbf_derivatives_match_finite_differences():
    rng = np.random.default_rng(3)
    h = 1e-4
    for _ in range(5):
        K = int(rng.integers(1, 6))
        exp = RbfExpansion(coeffs=rng.normal(size=K),
                           means=rng.uniform([0, 0], [200, 20], (K, 2)),
                           scales=rng.uniform(1.0, 30.0, (K, 2)))
        x = rng.uniform([10.0, 1.0], [180.0, 18.0])
        jet = rbf_eval(exp, x, coords=(0, 1))
        for c in (0, 1):
            e = np.zeros(2)
            e[c] = h
            fd1 = (direct_sum(exp, x + e) - direct_sum(exp, x - e)) / (2 * h)
            fd2 = (direct_sum(exp, x + e) - 2 * direct_sum(exp, x)
                   + direct_sum(exp, x - e)) / h ** 2
            assert_rel_close(jet.grad[c], fd1, 1e-6, f"grad[{c}]")
            assert_rel_close(jet.hess_diag[c], fd2, 1e-6, f"hess[{c}]")


def test_batched_expansions_match_per_point_loop():
    rng = np.random.default_rng(4)
    n, K = 6, 3
    coeffs = rng.normal(size=(n, K))
    means = rng.uniform([0, 0], [200, 20], (n, K, 2))
    scales = rng.uniform(1.0, 30.0, (n, K, 2))
    X = rng.uniform([0, 0], [200, 20], (n, 2))
    value, grad, hess = rbf_eval_batch(coeffs, means, scales, X, (0,), (1,))
    for i in range(n):
        exp = RbfExpansion(coeffs=coeffs[i], means=means[i], scales=scales[i])
        jet = rbf_eval(exp, X[i], coords=(0, 1))
        np.testing.assert_allclose(value[i], jet.value, rtol=1e-13)
        np.testing.assert_allclose(grad[0][i], jet.grad[0], rtol=1e-12,
                                   atol=1e-13)
        np.testing.assert_allclose(hess[1][i], jet.hess_diag[1], rtol=1e-12,
                                   atol=1e-13)
