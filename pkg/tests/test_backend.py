"""Cross-lane agreement between the jitted and pure-numpy kernels."""

import numpy as np
import pytest

from surrodyn import backend
from surrodyn import kernels_numba as knb
from surrodyn import kernels_numpy as knp


def test_selected_backend_is_known():
    assert backend.BACKEND in ("numba", "numpy")


@pytest.mark.parametrize("act", [0, 1, 2])
def test_dense_forward_matches(rng, act):
    x = rng.normal(size=(7, 5))
    w = rng.normal(size=(5, 6))
    b = rng.normal(size=6)
    pre_a, out_a = knp.dense_forward(x, w, b, act, 0.01)
    pre_b, out_b = knb.dense_forward(x, w, b, act, 0.01)
    np.testing.assert_allclose(pre_a, pre_b, rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(out_a, out_b, rtol=1e-13, atol=1e-14)


@pytest.mark.parametrize("act", [0, 1, 2])
def test_dense_backward_matches(rng, act):
    x = rng.normal(size=(7, 5))
    w = rng.normal(size=(5, 6))
    b = rng.normal(size=6)
    pre, _ = knp.dense_forward(x, w, b, act, 0.01)
    dout = rng.normal(size=(7, 6))
    res_a = knp.dense_backward(dout, x, w, pre, act, 0.01)
    res_b = knb.dense_backward(dout, x, w, pre, act, 0.01)
    for a, b_ in zip(res_a, res_b):
        np.testing.assert_allclose(a, b_, rtol=1e-12, atol=1e-13)


def test_dense_rows_matches_batched(rng):
    x = rng.normal(size=(9, 5))
    w = rng.normal(size=(5, 4))
    b = rng.normal(size=4)
    rows_np = knp.dense_rows(x, w, b, 1, 0.01)
    rows_nb = knb.dense_rows(x, w, b, 1, 0.01)
    _, batched = knp.dense_forward(x, w, b, 1, 0.01)
    np.testing.assert_allclose(rows_np, batched, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(rows_nb, batched, rtol=1e-12, atol=1e-14)


def test_dense_rows_row_independence(rng):
    # a row's result must not depend on which other rows are in the batch
    x = rng.normal(size=(20, 6))
    w = rng.normal(size=(6, 5))
    b = rng.normal(size=5)
    for kernels in (knp, knb):
        full = kernels.dense_rows(x, w, b, 1, 0.01)
        half = kernels.dense_rows(x[:7].copy(), w, b, 1, 0.01)
        assert np.array_equal(full[:7], half)


def test_ld_assemble_matches_and_grid_independent(rng):
    bp = rng.normal(size=(6, 8))
    tau = rng.normal(size=(30, 8))
    out_np = knp.ld_assemble(bp, tau)
    out_nb = knb.ld_assemble(bp, tau)
    np.testing.assert_allclose(out_np, bp @ tau.T, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(out_np, out_nb, rtol=1e-13, atol=1e-15)
    for kernels in (knp, knb):
        full = kernels.ld_assemble(bp, tau)
        part = kernels.ld_assemble(bp, tau[:11].copy())
        assert np.array_equal(full[:, :11], part)


def test_optimizer_kernels_match(rng):
    g = rng.normal(size=50)
    state = {}
    for name, kernels in (("np", knp), ("nb", knb)):
        p = np.linspace(-1, 1, 50)
        m = np.zeros(50)
        v = np.zeros(50)
        for t in (1, 2, 3):
            kernels.adam_update(p, g, m, v, t, 1e-2, 0.9, 0.999, 1e-8)
        kernels.sgd_update(p, g, 0.1)
        state[name] = p
    np.testing.assert_allclose(state["np"], state["nb"], rtol=1e-13, atol=1e-15)


def test_fourier_and_sweep_match(rng):
    ts = rng.uniform(0, 2, size=40)
    f_np = knp.fourier_features(ts, 5, np.pi)
    f_nb = knb.fourier_features(ts, 5, np.pi)
    np.testing.assert_allclose(f_np, f_nb, rtol=1e-14, atol=1e-15)
    s_np = knp.sweep_values(ts, 5.0, 1.0, 10.0, 2.0)
    s_nb = knb.sweep_values(ts, 5.0, 1.0, 10.0, 2.0)
    np.testing.assert_allclose(s_np, s_nb, rtol=1e-13, atol=1e-14)


def test_integrators_match():
    args = (50.0, 5.0, 1e4, 5.0, 1.0, 10.0, 2.0, 0.01, 200, 10)
    x_a, v_a, a_a, s_a, _ = knp.duffing_rk4(*args)
    x_b, v_b, a_b, s_b, _ = knb.duffing_rk4(*args)
    assert s_a == s_b == 0
    np.testing.assert_allclose(x_a, x_b, rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(a_a, a_b, rtol=1e-10, atol=1e-12)

    minv = np.eye(2)
    k = np.array([[200.0, -100.0], [-100.0, 100.0]])
    c = 0.05 * k
    load = np.array([1.0, 0.0])
    args2 = (minv, k, c, load, 5.0, 1.0, 10.0, 2.0, 0.01, 200, 10)
    acc_a, *_rest_a, st_a, _ = knp.lin2dof_rk4(*args2)
    acc_b, *_rest_b, st_b, _ = knb.lin2dof_rk4(*args2)
    assert st_a == st_b == 0
    np.testing.assert_allclose(acc_a, acc_b, rtol=1e-10, atol=1e-12)
