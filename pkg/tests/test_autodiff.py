import numpy as np
import pytest

from surrodyn import autodiff as ad
from surrodyn.errors import DimensionError
from surrodyn.network import DenseNetwork


def fd_gradient(f, x0, h=1e-5):
    g = np.empty_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        g.flat[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def test_square_derivative():
    theta = ad.leaf(np.array(3.0))
    loss = ad.mul(theta, theta)
    ad.backward(loss)
    assert theta.grad == pytest.approx(6.0, abs=1e-14)


def test_gradient_of_unused_parameter_is_zero():
    used = ad.leaf(np.array([2.0]))
    unused = ad.leaf(np.array([7.0]))
    loss = ad.sum_all(ad.mul(used, used))
    ad.backward(loss)
    assert unused.grad is None  # never touched by the recorded graph


def test_non_scalar_loss_rejected():
    x = ad.leaf(np.ones(3))
    with pytest.raises(DimensionError):
        ad.backward(ad.mul(x, x))


@pytest.mark.parametrize("seed", range(6))
def test_network_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = DenseNetwork([3, 6, 5, 2], "relu", seed=seed + 100)
    x = rng.normal(size=(4, 3))

    def value(flat):
        saved = net.flat.copy()
        net.flat[...] = flat
        out = net.forward(x)
        net.flat[...] = saved
        return float((out ** 2).sum())

    net.zero_grad()
    out = net.forward_node(ad.constant(x))
    ad.backward(ad.sum_all(ad.mul(out, out)))
    g_fd = fd_gradient(value, net.flat.copy())
    denom = np.maximum(np.maximum(np.abs(net.grad), np.abs(g_fd)), 1e-8)
    assert (np.abs(net.grad - g_fd) / denom).max() < 1e-4


def test_input_gradient_matches_finite_differences(rng):
    net = DenseNetwork([3, 5, 2], "leaky_relu", seed=3)
    x0 = rng.normal(size=(2, 3))

    def value(x):
        out = net.forward(x)
        return float((out ** 2).sum())

    leaf = ad.leaf(x0.copy())
    out = net.forward_node(leaf)
    ad.backward(ad.sum_all(ad.mul(out, out)))
    g_fd = fd_gradient(value, x0)
    denom = np.maximum(np.maximum(np.abs(leaf.grad), np.abs(g_fd)), 1e-8)
    assert (np.abs(leaf.grad - g_fd) / denom).max() < 1e-4


def test_backward_is_linear_in_the_loss(rng):
    net = DenseNetwork([2, 4, 1], "relu", seed=9)
    x = rng.normal(size=(3, 2))
    grads = []
    for scale in (1.0, 3.5):
        net.zero_grad()
        out = net.forward_node(ad.constant(x))
        loss = ad.mul(ad.sum_all(ad.mul(out, out)), ad.constant(scale))
        ad.backward(loss)
        grads.append(net.grad.copy())
    np.testing.assert_allclose(grads[1], 3.5 * grads[0], rtol=1e-12, atol=1e-15)


def test_matmul_and_transpose_backward(rng):
    a0 = rng.normal(size=(3, 4))
    b0 = rng.normal(size=(5, 4))

    def value(flat):
        a = flat[:12].reshape(3, 4)
        b = flat[12:].reshape(5, 4)
        return float((a @ b.T).sum())

    a = ad.leaf(a0.copy())
    b = ad.leaf(b0.copy())
    ad.backward(ad.sum_all(ad.matmul(a, ad.transpose(b))))
    flat0 = np.concatenate([a0.ravel(), b0.ravel()])
    g_fd = fd_gradient(value, flat0)
    np.testing.assert_allclose(a.grad.ravel(), g_fd[:12], rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(b.grad.ravel(), g_fd[12:], rtol=1e-6, atol=1e-9)


def test_concat_routes_gradients(rng):
    a = ad.leaf(rng.normal(size=(2, 3)))
    b = ad.leaf(rng.normal(size=(2, 2)))
    cat = ad.concat_cols([a, b])
    weights = np.arange(10.0).reshape(2, 5)
    ad.backward(ad.sum_all(ad.mul(cat, ad.constant(weights))))
    np.testing.assert_array_equal(a.grad, weights[:, :3])
    np.testing.assert_array_equal(b.grad, weights[:, 3:])


def test_sqrt_guard_at_zero():
    x = ad.leaf(np.array([0.0, 4.0]))
    root = ad.sqrt(x)
    ad.backward(ad.sum_all(root))
    np.testing.assert_allclose(root.value, [0.0, 2.0])
    np.testing.assert_allclose(x.grad, [0.0, 0.25])


def test_clip_masks_gradient():
    x = ad.leaf(np.array([-1.0, 0.5, 2.0]))
    ad.backward(ad.sum_all(ad.clip(x, 0.0, 1.0)))
    np.testing.assert_array_equal(x.grad, [0.0, 1.0, 0.0])


def test_shared_subgraph_accumulates():
    x = ad.leaf(np.array(2.0))
    y = ad.add(ad.mul(x, x), x)  # x^2 + x
    ad.backward(y)
    assert x.grad == pytest.approx(5.0)
