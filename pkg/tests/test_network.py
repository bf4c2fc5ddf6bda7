import numpy as np
import pytest

from surrodyn.errors import DataFormatError, DimensionError
from surrodyn.network import DenseNetwork, init_weights, parameter_count


def test_zero_weights_give_zero_output():
    net = DenseNetwork([4, 3, 2], "relu")
    np.testing.assert_array_equal(net.forward(np.ones(4)), np.zeros(2))


def test_identity_single_layer():
    net = DenseNetwork([1, 1], "relu")
    net.weight(0)[...] = 1.0
    out = net.forward(np.array([3.0]))
    np.testing.assert_array_equal(out, [3.0])


def test_two_layer_hand_computed():
    net = DenseNetwork([2, 2, 1], "relu")
    w0 = np.array([[1.0, -2.0], [0.5, 1.0]])
    b0 = np.array([0.1, -0.2])
    w1 = np.array([[2.0], [3.0]])
    b1 = np.array([0.25])
    net.weight(0)[...] = w0
    net.bias(0)[...] = b0
    net.weight(1)[...] = w1
    net.bias(1)[...] = b1
    x = np.array([1.0, 2.0])
    hidden = np.maximum(x @ w0 + b0, 0.0)
    expected = hidden @ w1 + b1
    np.testing.assert_allclose(net.forward(x), expected, rtol=1e-15)


def test_parameter_count_formula():
    assert parameter_count([2, 4, 1]) == 17
    assert DenseNetwork([2, 4, 1]).n_params == 17


def test_same_seed_bit_identical():
    a = init_weights([5, 7, 3], seed=42)
    b = init_weights([5, 7, 3], seed=42)
    assert np.array_equal(a.flat, b.flat)
    c = init_weights([5, 7, 3], seed=43)
    assert not np.array_equal(a.flat, c.flat)


def test_init_variance_scales_with_fan_in():
    net = init_weights([100, 100, 1], seed=0)
    w = net.weight(0).ravel()  # 10^4 draws at fan-in 100
    target = 1.0 / (3 * 100)
    assert abs(w.var() - target) / target < 0.2
    assert np.all(net.bias(0) == 0.0)


def test_dimension_validation():
    with pytest.raises(DimensionError):
        DenseNetwork([4])
    with pytest.raises(DimensionError):
        DenseNetwork([4, 0, 2])
    net = DenseNetwork([4, 2])
    with pytest.raises(DimensionError):
        net.forward(np.ones(3))


def test_output_layer_has_no_activation():
    net = DenseNetwork([1, 1], "relu")
    net.weight(0)[...] = 1.0
    out = net.forward(np.array([-5.0]))
    np.testing.assert_array_equal(out, [-5.0])


def test_checkpoint_roundtrip(tmp_path):
    net = init_weights([3, 5, 2], seed=11)
    net.save(tmp_path / "ckpt")
    loaded = DenseNetwork.load(tmp_path / "ckpt")
    assert loaded.layer_dims == net.layer_dims
    assert loaded.activation == net.activation
    assert np.array_equal(loaded.flat, net.flat)


def test_checkpoint_truncated_rejected(tmp_path):
    net = init_weights([3, 5, 2], seed=11)
    net.save(tmp_path / "ckpt")
    raw = (tmp_path / "ckpt.bin").read_bytes()
    (tmp_path / "ckpt.bin").write_bytes(raw[:-8])
    with pytest.raises(DataFormatError):
        DenseNetwork.load(tmp_path / "ckpt")


def test_rows_and_batched_agree(rng):
    net = init_weights([6, 9, 4], seed=2)
    x = rng.normal(size=(12, 6))
    np.testing.assert_allclose(net.forward_rows(x), net.forward(x),
                               rtol=1e-12, atol=1e-13)


def test_rows_independent_of_batch(rng):
    net = init_weights([6, 9, 4], seed=2)
    x = rng.normal(size=(12, 6))
    full = net.forward_rows(x)
    part = net.forward_rows(x[:5].copy())
    assert np.array_equal(full[:5], part)
