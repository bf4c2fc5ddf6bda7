import numpy as np
import pytest

from surrodyn import autodiff as ad
from surrodyn.errors import ConfigError, DimensionError
from surrodyn.models import (
    MlpBaseline,
    ParametricDeepONet,
    PositionalEncoder,
    VanillaDeepONet,
    default_config,
    encode_time,
    load_model,
    save_model,
)
from surrodyn.network import DenseNetwork

from .conftest import build_toy_pdon


class TestPositionalEncoder:
    def test_t0_alternates_one_zero(self):
        enc = PositionalEncoder(k=3, length=2.0)
        np.testing.assert_array_equal(enc.encode(0.0), [1, 0, 1, 0, 1, 0])

    def test_half_period_first_order(self):
        enc = PositionalEncoder(k=1, length=2.0)
        vec = enc.encode(1.0)
        assert vec[0] == pytest.approx(-1.0, abs=1e-15)
        assert vec[1] == pytest.approx(0.0, abs=1e-12)

    def test_periodicity(self):
        enc = PositionalEncoder(k=4, length=2.0)
        ts = np.linspace(0.0, 2.0, 17)
        np.testing.assert_allclose(enc.encode_grid(ts), enc.encode_grid(ts + 2.0),
                                   rtol=0, atol=1e-12)

    def test_output_dimension_and_bounds(self):
        enc = PositionalEncoder(k=10, length=2.0)
        feats = enc.encode_grid(np.linspace(-5, 5, 101))
        assert feats.shape == (101, 20)
        assert np.all(np.abs(feats) <= 1.0)

    def test_encode_time_alias(self):
        enc = PositionalEncoder(k=2, length=4.0)
        np.testing.assert_array_equal(encode_time(enc, 0.3), enc.encode(0.3))


class TestParametricDeepONet:
    def test_all_ones_parameter_net_reduces_to_branch_trunk_dot(self, rng):
        model = build_toy_pdon(seed=0)
        model.param_net.flat[...] = 0.0
        model.param_net.bias(model.param_net.n_layers - 1)[...] = 1.0
        f = rng.normal(size=16)
        mu = np.array([0.3, 0.7])
        t_grid = model.default_grid()
        got = model.predict(f, mu, t_grid)[0, 0]
        b = model.branch.forward(f)
        tau = model.trunk.forward(model.encoder.encode_grid(t_grid))
        np.testing.assert_allclose(got, tau @ b, rtol=1e-12, atol=1e-13)

    def test_zero_trunk_gives_zero_response(self, rng):
        model = build_toy_pdon(seed=0)
        model.trunk.flat[...] = 0.0
        out = model.predict(rng.normal(size=16), np.array([0.5, 0.5]))
        assert np.all(out == 0.0)

    def test_grid_equals_pointwise_evaluation(self, rng):
        model = build_toy_pdon(seed=3)
        f = rng.normal(size=(2, 16))
        mu = rng.uniform(size=(2, 2))
        t_grid = model.default_grid()
        batch = model.predict(f, mu, t_grid)
        for j in (0, 5, 15):
            single = model.predict(f, mu, np.array([t_grid[j]]))
            assert np.array_equal(batch[:, :, j], single[:, :, 0])

    def test_training_node_matches_predict(self, rng):
        model = build_toy_pdon(seed=4, decoder=True)
        f = rng.normal(size=(3, 16))
        mu = rng.uniform(size=(3, 2))
        t_feats = model.trunk_features(model.default_grid())
        node = model.training_node(f, mu, t_feats)
        pred = model.predict(f, mu)
        np.testing.assert_allclose(node.value, pred.reshape(3, -1),
                                   rtol=1e-10, atol=1e-12)

    def test_ld_trilinearity(self, rng):
        model = build_toy_pdon(seed=5)
        f = rng.normal(size=16)
        mu = np.array([0.2, 0.9])
        base = model.predict(f, mu)
        last = model.branch.n_layers - 1
        model.branch.weight(last)[...] *= 2.5
        model.branch.bias(last)[...] *= 2.5
        scaled = model.predict(f, mu)
        np.testing.assert_allclose(scaled, 2.5 * base, rtol=1e-12, atol=1e-14)

    def test_resolution_invariance_at_coincident_points(self, rng):
        model = build_toy_pdon(seed=6)
        f = rng.normal(size=(2, 16))
        mu = rng.uniform(size=(2, 2))
        coarse = model.default_grid()
        fine = np.arange(2 * len(coarse)) * (model.coord_span / (2 * len(coarse)))
        pred_c = model.predict(f, mu, coarse)
        pred_f = model.predict(f, mu, fine)
        assert np.array_equal(pred_f[:, :, ::2], pred_c)

    def test_gradient_wrt_mu_matches_finite_differences(self, rng):
        model = build_toy_pdon(seed=7)
        f = rng.normal(size=(1, 16))
        mu0 = np.array([[0.4, 0.6]])
        t_feats = model.trunk_features(model.default_grid())

        def value(mu_flat):
            out = model.predict(f, mu_flat.reshape(1, 2))
            return float((out ** 2).sum())

        leaf = ad.leaf(mu0.copy())
        out = model.training_node(f, leaf, t_feats)
        ad.backward(ad.sum_all(ad.mul(out, out)))
        h = 1e-6
        for d in range(2):
            mp = mu0.ravel().copy()
            mm = mu0.ravel().copy()
            mp[d] += h
            mm[d] -= h
            fd = (value(mp) - value(mm)) / (2 * h)
            assert abs(leaf.grad[0, d] - fd) / max(abs(fd), 1e-8) < 1e-4

    def test_nd_rejects_other_resolutions(self, rng):
        model = build_toy_pdon(seed=8, decoder=True)
        f = rng.normal(size=16)
        mu = np.array([0.5, 0.5])
        with pytest.raises(DimensionError):
            model.predict(f, mu, np.linspace(0, 2, 32))

    def test_wrong_force_length_rejected(self):
        model = build_toy_pdon(seed=9)
        with pytest.raises(DimensionError):
            model.predict(np.ones(15), np.array([0.5, 0.5]))

    def test_latent_width_mismatch_rejected(self):
        enc = PositionalEncoder(k=2, length=2.0)
        with pytest.raises(DimensionError):
            ParametricDeepONet(
                branch=DenseNetwork([16, 8, 8]),
                param_net=DenseNetwork([2, 8, 7]),
                trunk=DenseNetwork([4, 8, 8]),
                encoder=enc,
            )

    def test_multichannel_output_uses_extended_coordinates(self, rng):
        model = build_toy_pdon(seed=10, channels=2)
        f = rng.normal(size=(3, 16))
        mu = rng.uniform(size=(3, 2))
        t_grid = model.default_grid()
        out = model.predict(f, mu, t_grid)
        assert out.shape == (3, 2, 16)
        coords = model.extended_coords(t_grid)
        np.testing.assert_allclose(coords[16:], t_grid + model.coord_span,
                                   rtol=0, atol=0)
        # channel j must equal the decode at the offset coordinates
        bp = model.branch.forward(f) * model.param_net.forward(mu)
        for j in range(2):
            feats = model.encoder.encode_grid(t_grid + j * model.coord_span)
            tau = model.trunk.forward_rows(feats)
            from surrodyn.backend import kernels as K
            expected = K.ld_assemble(np.ascontiguousarray(bp), tau)
            assert np.array_equal(out[:, j, :], expected)


class TestVanilla:
    def build(self, seed=0):
        return VanillaDeepONet(
            branch=DenseNetwork([18, 8, 6], "relu", seed=seed),
            trunk=DenseNetwork([1, 8, 6], "relu", seed=seed + 1),
            dim_mu=2, resolution=16, coord_span=2.0,
        )

    def test_zero_branch_zero_response(self, rng):
        model = self.build()
        model.branch.flat[...] = 0.0
        out = model.predict(rng.normal(size=16), np.array([0.1, 0.2]))
        assert np.all(out == 0.0)

    def test_width_one_latent_is_scalar_product(self, rng):
        model = VanillaDeepONet(
            branch=DenseNetwork([18, 4, 1], "relu", seed=2),
            trunk=DenseNetwork([1, 4, 1], "relu", seed=3),
            dim_mu=2, resolution=16, coord_span=2.0,
        )
        f = rng.normal(size=16)
        mu = np.array([0.3, 0.4])
        t_grid = model.default_grid()
        out = model.predict(f, mu, t_grid)[0, 0]
        b = model.branch.forward(np.concatenate([f, mu]))[0]
        tau = model.trunk.forward_rows(t_grid[:, None].copy())[:, 0]
        np.testing.assert_allclose(out, b * tau, rtol=1e-12, atol=1e-14)

    def test_hand_set_width_two_dot_product(self, rng):
        model = VanillaDeepONet(
            branch=DenseNetwork([18, 2], "relu", seed=0),
            trunk=DenseNetwork([1, 2], "relu", seed=0),
            dim_mu=2, resolution=16, coord_span=2.0,
        )
        model.branch.weight(0)[...] = rng.normal(size=(18, 2))
        model.branch.bias(0)[...] = [0.1, -0.3]
        model.trunk.weight(0)[...] = [[2.0, -1.0]]
        model.trunk.bias(0)[...] = [0.0, 0.5]
        f = rng.normal(size=16)
        mu = np.array([0.6, 0.2])
        t = np.array([0.75])
        out = model.predict(f, mu, t)[0, 0, 0]
        b = np.concatenate([f, mu]) @ model.branch.weight(0) + model.branch.bias(0)
        tau = np.array([0.75 * 2.0 + 0.0, 0.75 * -1.0 + 0.5])
        assert out == pytest.approx(float(b @ tau), rel=1e-13)


class TestMlp:
    def test_zero_net_zero_response(self, rng):
        model = MlpBaseline(DenseNetwork([18, 6, 16], "relu"), dim_mu=2,
                            resolution=16)
        out = model.predict(rng.normal(size=16), np.array([0.5, 0.5]))
        assert np.all(out == 0.0)

    def test_case1_configuration_shape(self):
        cfg = default_config("mlp", "case1")
        assert cfg.mlp_dims == (202, 400, 400, 200)
        model = cfg.build(seed=0)
        out = model.predict(np.zeros(200), np.array([0.5, 0.5]))
        assert out.shape == (1, 1, 200)

    def test_hand_set_tiny_net(self, rng):
        model = MlpBaseline(DenseNetwork([18, 16], "relu"), dim_mu=2,
                            resolution=16)
        w = rng.normal(size=(18, 16))
        model.net.weight(0)[...] = w
        model.net.bias(0)[...] = 0.25
        f = rng.normal(size=16)
        mu = np.array([0.2, 0.8])
        expected = np.concatenate([f, mu]) @ w + 0.25
        np.testing.assert_allclose(model.predict(f, mu)[0, 0], expected,
                                   rtol=1e-13)


class TestDefaultConfigs:
    def test_parametric_nd_case1(self):
        cfg = default_config("pdon_nd", "case1")
        assert cfg.branch_dims == (200, 300, 300)
        assert cfg.param_dims == (2, 300, 300)
        assert cfg.trunk_dims == (20, 300, 300)
        assert cfg.pe_k == 10

    def test_parametric_ld_case1_depth5_width200(self):
        cfg = default_config("pdon_ld", "1b")
        for dims in (cfg.branch_dims, cfg.param_dims, cfg.trunk_dims):
            assert len(dims) == 5
            assert all(d == 200 for d in dims[1:])

    def test_vanilla_case1(self):
        cfg = default_config("vanilla", "case1")
        assert cfg.branch_dims[0] == 202
        assert cfg.trunk_dims[0] == 1
        assert cfg.branch_dims[-1] == cfg.trunk_dims[-1]

    def test_mdof_configuration(self):
        cfg = default_config("pdon_ld", "mdof")
        assert cfg.pe_k == 50
        assert cfg.trunk_dims[0] == 100
        assert cfg.channels == 4

    def test_unknown_pair_rejected(self):
        with pytest.raises(ConfigError):
            default_config("pdon_nd", "case9")
        with pytest.raises(ConfigError):
            default_config("cnn", "case1")

    def test_parameter_count_audit(self):
        def count(dims):
            return sum(i * o + o for i, o in zip(dims[:-1], dims[1:]))

        nd = default_config("pdon_nd", "case1")
        expected_nd = (count(nd.branch_dims) + count(nd.param_dims)
                       + count(nd.trunk_dims) + count(nd.decoder_dims))
        assert nd.build(seed=0).param_count == expected_nd

        ld = default_config("pdon_ld", "case1").build(seed=0)
        assert ld.param_count == 406_800  # matches the published table

        mlp = default_config("mlp", "case1").build(seed=0)
        assert mlp.param_count == 321_800  # matches the published table

        van = default_config("vanilla", "case1").build(seed=0)
        assert van.param_count == 603_300  # published 603,301 includes a scalar bias


class TestCheckpoints:
    @pytest.mark.parametrize("decoder", [False, True])
    def test_pdon_roundtrip(self, tmp_path, rng, decoder):
        model = build_toy_pdon(seed=1, decoder=decoder)
        save_model(model, tmp_path / "m")
        loaded = load_model(tmp_path / "m")
        f = rng.normal(size=(2, 16))
        mu = rng.uniform(size=(2, 2))
        assert np.array_equal(loaded.predict(f, mu), model.predict(f, mu))
        assert loaded.decoder_kind == model.decoder_kind

    def test_vanilla_and_mlp_roundtrip(self, tmp_path, rng):
        van = VanillaDeepONet(
            branch=DenseNetwork([18, 8, 6], "relu", seed=4),
            trunk=DenseNetwork([1, 8, 6], "relu", seed=5),
            dim_mu=2, resolution=16, coord_span=2.0,
        )
        mlp = MlpBaseline(DenseNetwork([18, 6, 16], "relu", seed=6),
                          dim_mu=2, resolution=16)
        f = rng.normal(size=(2, 16))
        mu = rng.uniform(size=(2, 2))
        for name, model in (("van", van), ("mlp", mlp)):
            save_model(model, tmp_path / name)
            loaded = load_model(tmp_path / name)
            assert np.array_equal(loaded.predict(f, mu), model.predict(f, mu))
