"""Operator surrogates: periodic time encoding, branch/parameter/trunk
architectures with linear or nonlinear decoding, and the dense baseline.

Prediction always evaluates the trunk row-at-a-time, so querying a refined
time grid reproduces the coarse-grid values bit-for-bit at coincident points
(the resolution-invariance the linear decoder is built around).  Training
uses the batched kernels via the autodiff tape.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .backend import kernels as K
from .errors import ConfigError, DataFormatError, DimensionError
from .network import DenseNetwork

MODEL_FORMAT_TAG = "surrodyn-model-v1"


@dataclass(frozen=True)
class PositionalEncoder:
    """Integer-periodic feature map t -> [cos(w t), sin(w t), ..., cos(k w t), sin(k w t)].

    w = 2*pi/length; the output has 2k entries bounded in [-1, 1] and is
    periodic with period ``length``.
    """

    k: int
    length: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("spectrum order k must be >= 1")
        if self.length <= 0:
            raise ValueError("coordinate-domain length must be positive")

    @property
    def omega(self) -> float:
        return 2.0 * np.pi / self.length

    @property
    def out_dim(self) -> int:
        return 2 * self.k

    def encode(self, t: float) -> np.ndarray:
        return K.fourier_features(np.array([float(t)]), self.k, self.omega)[0]

    def encode_grid(self, ts: np.ndarray) -> np.ndarray:
        return K.fourier_features(np.ascontiguousarray(ts, dtype=np.float64),
                                  self.k, self.omega)


def encode_time(encoder: PositionalEncoder, t: float) -> np.ndarray:
    return encoder.encode(t)


def _as_batch(x, width: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise DimensionError(f"{what} must have width {width}, got shape {x.shape}")
    return np.ascontiguousarray(x)


class ParametricDeepONet:
    """Branch/parameter/trunk operator with a linear or nonlinear decoder.

    The linear decode of a query point t is sum_k b_k(f) p_k(mu) tau_k(gamma(t));
    the nonlinear variant post-processes the full length-r decoded vector with
    a dense network (fixed resolution).  For multi-channel systems the trunk
    coordinates are extended channel-by-channel with linearly increasing
    offsets and the output is reshaped to (channels, r).
    """

    arch = "pdon"

    def __init__(self, branch: DenseNetwork, param_net: DenseNetwork,
                 trunk: DenseNetwork, encoder: PositionalEncoder,
                 decoder: DenseNetwork | None = None, channels: int = 1,
                 resolution: int = 200, coord_span: float = 2.0):
        n = branch.layer_dims[-1]
        if param_net.layer_dims[-1] != n or trunk.layer_dims[-1] != n:
            raise DimensionError(
                "branch, parameter and trunk nets must share the latent width"
            )
        if trunk.layer_dims[0] != encoder.out_dim:
            raise DimensionError(
                f"trunk input {trunk.layer_dims[0]} != encoder output {encoder.out_dim}"
            )
        if decoder is not None:
            if channels != 1:
                raise ConfigError("the nonlinear decoder supports single-channel output")
            if decoder.layer_dims[0] != resolution or decoder.layer_dims[-1] != resolution:
                raise DimensionError(
                    "decoder must map a length-r decoded vector to length r"
                )
        self.branch = branch
        self.param_net = param_net
        self.trunk = trunk
        self.encoder = encoder
        self.decoder = decoder
        self.channels = channels
        self.resolution = resolution
        self.coord_span = coord_span

    @property
    def latent(self) -> int:
        return self.branch.layer_dims[-1]

    @property
    def dim_mu(self) -> int:
        return self.param_net.layer_dims[0]

    @property
    def decoder_kind(self) -> str:
        return "ld" if self.decoder is None else "nd"

    def nets(self) -> list[DenseNetwork]:
        out = [self.branch, self.param_net, self.trunk]
        if self.decoder is not None:
            out.append(self.decoder)
        return out

    @property
    def param_count(self) -> int:
        return sum(net.n_params for net in self.nets())

    def default_grid(self) -> np.ndarray:
        return np.arange(self.resolution) * (self.coord_span / self.resolution)

    def extended_coords(self, t_grid: np.ndarray) -> np.ndarray:
        """Channel-extended trunk coordinates with linearly increasing offsets."""
        if self.channels == 1:
            return np.asarray(t_grid, dtype=np.float64)
        return np.concatenate(
            [np.asarray(t_grid) + j * self.coord_span for j in range(self.channels)]
        )

    def trunk_features(self, t_grid: np.ndarray) -> np.ndarray:
        return self.encoder.encode_grid(self.extended_coords(t_grid))

    def _check_query(self, t_grid: np.ndarray) -> np.ndarray:
        t_grid = np.asarray(t_grid, dtype=np.float64)
        if t_grid.size == 0:
            raise DimensionError("query grid is empty")
        if self.decoder is not None and t_grid.size != self.resolution:
            raise DimensionError(
                "the nonlinear decoder is resolution-bound: queried "
                f"{t_grid.size} points, trained at {self.resolution}"
            )
        return t_grid

    def training_node(self, forces: np.ndarray, mu, t_feats: np.ndarray) -> ad.Node:
        """Tape forward on precomputed trunk features; mu may be a graph leaf."""
        mu_node = mu if isinstance(mu, ad.Node) else ad.constant(mu)
        b = self.branch.forward_node(ad.constant(forces))
        p = self.param_net.forward_node(mu_node)
        tau = self.trunk.forward_node(ad.constant(t_feats))
        ld = ad.matmul(ad.mul(b, p), ad.transpose(tau))
        if self.decoder is not None:
            return self.decoder.forward_node(ld)
        return ld

    def predict(self, forces, mus, t_grid=None) -> np.ndarray:
        """Deterministic evaluation, shape (samples, channels, len(t_grid))."""
        forces = _as_batch(forces, self.branch.layer_dims[0], "force")
        mus = _as_batch(mus, self.dim_mu, "parameters")
        if forces.shape[0] != mus.shape[0]:
            raise DimensionError("force and parameter batches disagree in length")
        t_grid = self.default_grid() if t_grid is None else self._check_query(t_grid)
        b = self.branch.forward(forces)
        p = self.param_net.forward(mus)
        tau = self.trunk.forward_rows(self.trunk_features(t_grid))
        out = K.ld_assemble(np.ascontiguousarray(b * p), tau)
        if self.decoder is not None:
            out = self.decoder.forward_rows(out)
        return out.reshape(forces.shape[0], self.channels, t_grid.size)

    def meta(self) -> dict:
        return {
            "arch": self.arch,
            "decoder": self.decoder_kind,
            "latent": self.latent,
            "channels": self.channels,
            "resolution": self.resolution,
            "coord_span": self.coord_span,
            "pe": {"k": self.encoder.k, "length": self.encoder.length},
        }


class VanillaDeepONet:
    """Single branch/trunk pair; the branch reads concat(force, parameters)."""

    arch = "vanilla"

    def __init__(self, branch: DenseNetwork, trunk: DenseNetwork,
                 encoder: PositionalEncoder | None = None,
                 dim_mu: int = 2, resolution: int = 200, coord_span: float = 2.0):
        if branch.layer_dims[-1] != trunk.layer_dims[-1]:
            raise DimensionError("branch and trunk must share the latent width")
        expected_in = 2 * encoder.k if encoder is not None else 1
        if trunk.layer_dims[0] != expected_in:
            raise DimensionError(
                f"trunk input {trunk.layer_dims[0]} incompatible with encoder"
            )
        if branch.layer_dims[0] != resolution + dim_mu:
            raise DimensionError("branch input must be resolution + dim_mu")
        self.branch = branch
        self.trunk = trunk
        self.encoder = encoder
        self.dim_mu = dim_mu
        self.resolution = resolution
        self.coord_span = coord_span
        self.channels = 1
        self.decoder = None

    @property
    def latent(self) -> int:
        return self.branch.layer_dims[-1]

    def nets(self) -> list[DenseNetwork]:
        return [self.branch, self.trunk]

    @property
    def param_count(self) -> int:
        return sum(net.n_params for net in self.nets())

    def default_grid(self) -> np.ndarray:
        return np.arange(self.resolution) * (self.coord_span / self.resolution)

    def trunk_features(self, t_grid: np.ndarray) -> np.ndarray:
        t_grid = np.ascontiguousarray(t_grid, dtype=np.float64)
        if self.encoder is None:
            return t_grid[:, None].copy()
        return self.encoder.encode_grid(t_grid)

    def training_node(self, forces: np.ndarray, mu, t_feats: np.ndarray) -> ad.Node:
        mu_node = mu if isinstance(mu, ad.Node) else ad.constant(mu)
        x = ad.concat_cols([ad.constant(forces), mu_node])
        b = self.branch.forward_node(x)
        tau = self.trunk.forward_node(ad.constant(t_feats))
        return ad.matmul(b, ad.transpose(tau))

    def predict(self, forces, mus, t_grid=None) -> np.ndarray:
        forces = _as_batch(forces, self.resolution, "force")
        mus = _as_batch(mus, self.dim_mu, "parameters")
        if forces.shape[0] != mus.shape[0]:
            raise DimensionError("force and parameter batches disagree in length")
        if t_grid is None:
            t_grid = self.default_grid()
        t_grid = np.asarray(t_grid, dtype=np.float64)
        if t_grid.size == 0:
            raise DimensionError("query grid is empty")
        b = self.branch.forward(np.concatenate([forces, mus], axis=1))
        tau = self.trunk.forward_rows(self.trunk_features(t_grid))
        out = K.ld_assemble(np.ascontiguousarray(b), tau)
        return out.reshape(forces.shape[0], 1, t_grid.size)

    def meta(self) -> dict:
        pe = None if self.encoder is None else {
            "k": self.encoder.k, "length": self.encoder.length,
        }
        return {
            "arch": self.arch,
            "dim_mu": self.dim_mu,
            "latent": self.latent,
            "channels": 1,
            "resolution": self.resolution,
            "coord_span": self.coord_span,
            "pe": pe,
        }


class MlpBaseline:
    """Plain dense map from concat(force, parameters) to the flattened response."""

    arch = "mlp"

    def __init__(self, net: DenseNetwork, dim_mu: int = 2, channels: int = 1,
                 resolution: int = 200, coord_span: float = 2.0):
        if net.layer_dims[0] != resolution + dim_mu:
            raise DimensionError("input width must be resolution + dim_mu")
        if net.layer_dims[-1] != channels * resolution:
            raise DimensionError("output width must be channels * resolution")
        self.net = net
        self.dim_mu = dim_mu
        self.channels = channels
        self.resolution = resolution
        self.coord_span = coord_span
        self.decoder = None

    def nets(self) -> list[DenseNetwork]:
        return [self.net]

    @property
    def param_count(self) -> int:
        return self.net.n_params

    def default_grid(self) -> np.ndarray:
        return np.arange(self.resolution) * (self.coord_span / self.resolution)

    def trunk_features(self, t_grid: np.ndarray) -> np.ndarray | None:
        return None

    def training_node(self, forces: np.ndarray, mu, t_feats=None) -> ad.Node:
        mu_node = mu if isinstance(mu, ad.Node) else ad.constant(mu)
        x = ad.concat_cols([ad.constant(forces), mu_node])
        return self.net.forward_node(x)

    def predict(self, forces, mus, t_grid=None) -> np.ndarray:
        forces = _as_batch(forces, self.resolution, "force")
        mus = _as_batch(mus, self.dim_mu, "parameters")
        if t_grid is not None and np.asarray(t_grid).size != self.resolution:
            raise DimensionError("the dense baseline only emits the training grid")
        out = self.net.forward_rows(np.concatenate([forces, mus], axis=1))
        return out.reshape(forces.shape[0], self.channels, self.resolution)

    def meta(self) -> dict:
        return {
            "arch": self.arch,
            "dim_mu": self.dim_mu,
            "channels": self.channels,
            "resolution": self.resolution,
            "coord_span": self.coord_span,
            "pe": None,
        }


@dataclass(frozen=True)
class ModelConfig:
    """Layer dimensions and encoder settings for a (architecture, case) pair."""

    arch: str
    branch_dims: tuple[int, ...] = ()
    param_dims: tuple[int, ...] = ()
    trunk_dims: tuple[int, ...] = ()
    decoder_dims: tuple[int, ...] | None = None
    mlp_dims: tuple[int, ...] = ()
    pe_k: int | None = None
    pe_length: float | None = None
    channels: int = 1
    resolution: int = 200
    coord_span: float = 2.0
    dim_mu: int = 2

    def build(self, seed: int = 0):
        return build_model(self, seed)


_CASE1 = {
    "pdon_nd": ModelConfig(
        arch="pdon_nd",
        branch_dims=(200, 300, 300),
        param_dims=(2, 300, 300),
        trunk_dims=(20, 300, 300),
        decoder_dims=(200, 64, 200),
        pe_k=10, pe_length=2.0,
    ),
    "pdon_ld": ModelConfig(
        arch="pdon_ld",
        branch_dims=(200, 200, 200, 200, 200),
        param_dims=(2, 200, 200, 200, 200),
        trunk_dims=(20, 200, 200, 200, 200),
        pe_k=10, pe_length=2.0,
    ),
    "vanilla": ModelConfig(
        arch="vanilla",
        branch_dims=(202, 300, 300, 300, 300),
        trunk_dims=(1, 300, 300, 300, 300),
    ),
    "mlp": ModelConfig(
        arch="mlp",
        mlp_dims=(202, 400, 400, 200),
    ),
}

_MDOF = {
    "pdon_ld": ModelConfig(
        arch="pdon_ld",
        branch_dims=(200, 300, 300, 300, 300),
        param_dims=(6, 300, 300, 300, 300),
        trunk_dims=(100, 300, 300, 300, 300),
        pe_k=50, pe_length=8.0,
        channels=4, dim_mu=6,
    ),
}


def default_config(arch: str, case: str) -> ModelConfig:
    """Tuned layer dimensions per architecture and validation case."""
    case_key = case.lower()
    if case_key in ("1a", "1b", "1c", "1d", "case1"):
        table = _CASE1
    elif case_key in ("mdof", "case2"):
        table = _MDOF
    else:
        raise ConfigError(f"unknown case {case!r}")
    if arch not in table:
        raise ConfigError(f"no tuned configuration for ({arch!r}, {case!r})")
    return table[arch]


def build_model(cfg: ModelConfig, seed: int = 0):
    """Construct a model with per-subnet seeds derived from one master seed."""
    child = [int(s) for s in np.random.SeedSequence(seed).generate_state(4)]
    if cfg.arch in ("pdon_nd", "pdon_ld"):
        encoder = PositionalEncoder(k=cfg.pe_k, length=cfg.pe_length)
        decoder = None
        if cfg.arch == "pdon_nd":
            decoder = DenseNetwork(cfg.decoder_dims, "relu", seed=child[3])
        return ParametricDeepONet(
            branch=DenseNetwork(cfg.branch_dims, "relu", seed=child[0]),
            param_net=DenseNetwork(cfg.param_dims, "relu", seed=child[1]),
            trunk=DenseNetwork(cfg.trunk_dims, "relu", seed=child[2]),
            encoder=encoder,
            decoder=decoder,
            channels=cfg.channels,
            resolution=cfg.resolution,
            coord_span=cfg.coord_span,
        )
    if cfg.arch == "vanilla":
        encoder = None
        if cfg.pe_k is not None:
            encoder = PositionalEncoder(k=cfg.pe_k, length=cfg.pe_length)
        return VanillaDeepONet(
            branch=DenseNetwork(cfg.branch_dims, "relu", seed=child[0]),
            trunk=DenseNetwork(cfg.trunk_dims, "relu", seed=child[2]),
            encoder=encoder,
            dim_mu=cfg.dim_mu,
            resolution=cfg.resolution,
            coord_span=cfg.coord_span,
        )
    if cfg.arch == "mlp":
        return MlpBaseline(
            net=DenseNetwork(cfg.mlp_dims, "relu", seed=child[0]),
            dim_mu=cfg.dim_mu,
            channels=cfg.channels,
            resolution=cfg.resolution,
            coord_span=cfg.coord_span,
        )
    raise ConfigError(f"unknown architecture {cfg.arch!r}")


def save_model(model, path: str | Path) -> None:
    """Write <path>/model.json plus <path>/weights.bin (all nets concatenated)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    nets = model.nets()
    names = _net_names(model)
    sections = []
    offset = 0
    for name, net in zip(names, nets):
        sections.append({"name": name, "offset": offset, **net.descriptor()})
        offset += net.n_params
    doc = {"format": MODEL_FORMAT_TAG, "meta": model.meta(), "nets": sections}
    (path / "model.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    (path / "weights.bin").write_bytes(
        np.concatenate([net.flat for net in nets]).astype("<f8").tobytes()
    )


def _net_names(model) -> list[str]:
    if isinstance(model, ParametricDeepONet):
        names = ["branch", "param_net", "trunk"]
        if model.decoder is not None:
            names.append("decoder")
        return names
    if isinstance(model, VanillaDeepONet):
        return ["branch", "trunk"]
    if isinstance(model, MlpBaseline):
        return ["net"]
    raise ConfigError(f"cannot checkpoint {type(model).__name__}")


def load_model(path: str | Path):
    path = Path(path)
    try:
        doc = json.loads((path / "model.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read model checkpoint: {exc}") from exc
    if doc.get("format") != MODEL_FORMAT_TAG:
        raise DataFormatError(f"unexpected model format {doc.get('format')!r}")
    meta = doc["meta"]
    nets = {}
    raw = (path / "weights.bin").read_bytes()
    flat = np.frombuffer(raw, dtype="<f8")
    total = sum(sec["n_params"] for sec in doc["nets"])
    if flat.size != total:
        raise DataFormatError(
            f"weights.bin holds {flat.size} floats, descriptors say {total}"
        )
    for sec in doc["nets"]:
        net = DenseNetwork(sec["layer_dims"], sec["activation"])
        net.seed = sec.get("seed")
        net.flat[...] = flat[sec["offset"]:sec["offset"] + sec["n_params"]]
        nets[sec["name"]] = net
    arch = meta["arch"]
    if arch == "pdon":
        encoder = PositionalEncoder(**meta["pe"])
        return ParametricDeepONet(
            branch=nets["branch"], param_net=nets["param_net"], trunk=nets["trunk"],
            encoder=encoder, decoder=nets.get("decoder"),
            channels=meta["channels"], resolution=meta["resolution"],
            coord_span=meta["coord_span"],
        )
    if arch == "vanilla":
        encoder = PositionalEncoder(**meta["pe"]) if meta["pe"] else None
        return VanillaDeepONet(
            branch=nets["branch"], trunk=nets["trunk"], encoder=encoder,
            dim_mu=meta["dim_mu"], resolution=meta["resolution"],
            coord_span=meta["coord_span"],
        )
    if arch == "mlp":
        return MlpBaseline(
            net=nets["net"], dim_mu=meta["dim_mu"], channels=meta["channels"],
            resolution=meta["resolution"], coord_span=meta["coord_span"],
        )
    raise DataFormatError(f"unknown architecture {arch!r} in checkpoint")
