"""Reverse-mode tape: every operator's gradient against finite differences."""
import numpy as np
import pytest

from deepsurrogate.nn import autodiff as ad

from conftest import assert_rel_close


def check_gradients(expr, shapes, seed, positive=False, h=1e-6):
    """Compare ad.gradient of expr(leaves...) against central differences.

    expr must accept numpy arrays (returning a float) or Tensors (returning
    a scalar Tensor); that dual dispatch is the property under test.
    """
    rng = np.random.default_rng(seed)
    values = [rng.uniform(0.5 if positive else -1.5, 1.5, s) for s in shapes]
    leaves = [ad.Tensor(v.copy()) for v in values]
    loss = expr(*leaves)
    grads = ad.gradient(loss, leaves)
    for i, v in enumerate(values):
        def f(flat, i=i):
            args = [a.copy() for a in values]
            args[i] = flat.reshape(values[i].shape)
            return float(expr(*args))

        fd = np.empty(v.size)
        flat = v.ravel().copy()
        for j in range(v.size):
            e = np.zeros(v.size)
            e[j] = h
            fd[j] = (f(flat + e) - f(flat - e)) / (2.0 * h)
        assert grads[i].shape == v.shape
        assert_rel_close(grads[i].ravel(), fd, 2e-6, f"leaf {i}")
    return float(ad.value_of(loss))


def test_add_mul_tanh_exp_gradients():
    def expr(a, b):
        c = a * b + 2.0 * a - 0.5
        d = ad.tanh(c) + ad.exp(-ad.square(b))
        return ad.vsum(d * c) / 7.0

    check_gradients(expr, [(3, 2), (2,)], seed=0)


def test_matmul_transpose_reshape_getitem_gradients():
    def expr(A, B, c):
        prod = (A @ B).T
        sliced = prod[1:, :2]
        flat = sliced.reshape(-1)
        return ad.vsum(ad.square(flat + c)) + ad.vmean(prod)

    check_gradients(expr, [(3, 4), (4, 3), (4,)], seed=1)


def test_div_pow_sqrt_log_softplus_gradients():
    def expr(a, b):
        c = a / (b + 3.0)
        d = ad.sqrt(a) + ad.log(b) + a ** 3
        return ad.vsum(c * d) + ad.vsum(ad.softplus(a - b))

    check_gradients(expr, [(4,), (4,)], seed=2, positive=True)


def test_rsub_rtruediv_neg_gradients():
    def expr(a):
        return ad.vsum((1.0 - a) * (2.0 / a) + (-a))

    check_gradients(expr, [(5,)], seed=3, positive=True)


def test_axis_reductions_gradients():
    def expr(a):
        col = ad.vsum(a, axis=0)
        row = ad.vmean(a, axis=1)
        return ad.vsum(ad.square(col)) + ad.vsum(row * row)

    check_gradients(expr, [(3, 4)], seed=4)


def test_sum_keepdims_gradient():
    def expr(a):
        if isinstance(a, ad.Tensor):
            s = a.sum(axis=1, keepdims=True)
        else:
            s = a.sum(axis=1, keepdims=True)
        return ad.vsum(ad.square(a - s))

    check_gradients(expr, [(3, 4)], seed=5)


def test_repeated_leaf_use_accumulates():
    def expr(a):
        return ad.vsum(ad.square(a)) + 3.0 * ad.vsum(a)

    rng = np.random.default_rng(6)
    v = rng.normal(size=7)
    leaf = ad.Tensor(v.copy())
    (grad,) = ad.gradient(expr(leaf), [leaf])
    np.testing.assert_allclose(grad, 2.0 * v + 3.0, rtol=1e-14)


def test_broadcast_unbroadcast_shapes():
    def expr(a, b):
        return ad.vsum(ad.square(a + b))

    rng = np.random.default_rng(7)
    a = ad.Tensor(rng.normal(size=(4, 3)))
    b = ad.Tensor(rng.normal(size=(3,)))
    ga, gb = ad.gradient(expr(a, b), [a, b])
    assert ga.shape == (4, 3)
    assert gb.shape == (3,)
    np.testing.assert_allclose(gb, ga.sum(axis=0), rtol=1e-14)


def test_deep_graph_iterative_backward():
    # a 5000-node chain must not hit the interpreter recursion limit
    x = ad.Tensor(np.array(1.0))
    y = x
    for _ in range(5000):
        y = y + 0.001
    (g,) = ad.gradient(y, [x])
    np.testing.assert_allclose(g, 1.0, rtol=0)


def test_value_of_passthrough():
    arr = np.arange(3.0)
    assert ad.value_of(arr) is arr
    t = ad.Tensor(arr.copy())
    np.testing.assert_array_equal(ad.value_of(t), arr)


def test_helpers_dispatch_on_numpy():
    x = np.array([0.5, 1.5])
    np.testing.assert_allclose(ad.tanh(x), np.tanh(x), rtol=1e-15)
    np.testing.assert_allclose(ad.exp(x), np.exp(x), rtol=1e-15)
    np.testing.assert_allclose(ad.sqrt(x), np.sqrt(x), rtol=1e-15)
    np.testing.assert_allclose(ad.square(x), x * x, rtol=1e-15)
    np.testing.assert_allclose(ad.softplus(x), np.log1p(np.exp(-np.abs(x)))
                               + np.maximum(x, 0.0), rtol=1e-14)
    assert ad.vsum(x) == pytest.approx(2.0)
    assert ad.vmean(x) == pytest.approx(1.0)


def test_gradient_requires_scalar_loss():
    t = ad.Tensor(np.ones(3))
    with pytest.raises(ValueError):
        ad.gradient(t, [t])
