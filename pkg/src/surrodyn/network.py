"""Dense feed-forward networks over a single flat float64 parameter buffer.

Layout: per layer, the (in x out) weight matrix row-major, then the bias.
Hidden layers get the configured activation; the output layer is linear.
Frozen networks (``trainable=False``) are safe for concurrent read-only
evaluation; anything that mutates weights is single-writer.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .backend import kernels as K
from .errors import DataFormatError, DimensionError

ACTIVATION_CODES = {"identity": K.IDENTITY, "relu": K.RELU, "leaky_relu": K.LEAKY_RELU}

LEAKY_SLOPE = 0.01


def parameter_count(layer_dims) -> int:
    return int(sum(i * o + o for i, o in zip(layer_dims[:-1], layer_dims[1:])))


class DenseNetwork:
    def __init__(self, layer_dims, activation: str = "relu", seed: int | None = None):
        layer_dims = [int(d) for d in layer_dims]
        if len(layer_dims) < 2:
            raise DimensionError("a network needs at least an input and an output dim")
        if any(d < 1 for d in layer_dims):
            raise DimensionError(f"layer dims must be positive, got {layer_dims}")
        if activation not in ACTIVATION_CODES:
            raise ValueError(f"unknown activation {activation!r}")
        self.layer_dims = layer_dims
        self.activation = activation
        self.act_code = ACTIVATION_CODES[activation]
        self.seed = seed
        self.trainable = True
        self.flat = np.zeros(parameter_count(layer_dims), dtype=np.float64)
        self.grad = np.zeros_like(self.flat)
        self._w_views: list[np.ndarray] = []
        self._b_views: list[np.ndarray] = []
        self._wg_views: list[np.ndarray] = []
        self._bg_views: list[np.ndarray] = []
        off = 0
        for din, dout in zip(layer_dims[:-1], layer_dims[1:]):
            self._w_views.append(self.flat[off:off + din * dout].reshape(din, dout))
            self._wg_views.append(self.grad[off:off + din * dout].reshape(din, dout))
            off += din * dout
            self._b_views.append(self.flat[off:off + dout])
            self._bg_views.append(self.grad[off:off + dout])
            off += dout
        if seed is not None:
            self.initialize(seed)

    @property
    def n_params(self) -> int:
        return self.flat.size

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    def weight(self, layer: int) -> np.ndarray:
        return self._w_views[layer]

    def bias(self, layer: int) -> np.ndarray:
        return self._b_views[layer]

    def weight_grad(self, layer: int) -> np.ndarray:
        return self._wg_views[layer]

    def bias_grad(self, layer: int) -> np.ndarray:
        return self._bg_views[layer]

    def initialize(self, seed: int) -> None:
        """Fan-in-scaled uniform weights U(-1/sqrt(fan_in), +1/sqrt(fan_in)), zero biases."""
        rng = np.random.default_rng(seed)
        self.seed = seed
        for layer in range(self.n_layers):
            w = self._w_views[layer]
            bound = 1.0 / np.sqrt(w.shape[0])
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            self._b_views[layer][...] = 0.0

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def _layer_act(self, layer: int) -> int:
        return self.act_code if layer < self.n_layers - 1 else K.IDENTITY

    def forward(self, x) -> np.ndarray:
        """Batched evaluation: (in,) -> (out,) or (B, in) -> (B, out)."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.layer_dims[0]:
            raise DimensionError(
                f"expected input width {self.layer_dims[0]}, got {x.shape[1]}"
            )
        x = np.ascontiguousarray(x)
        for layer in range(self.n_layers):
            _, x = K.dense_forward(
                x, self._w_views[layer], self._b_views[layer],
                self._layer_act(layer), LEAKY_SLOPE,
            )
        return x[0] if squeeze else x

    def forward_rows(self, x: np.ndarray) -> np.ndarray:
        """Row-at-a-time evaluation; each output row is independent of the batch."""
        if x.shape[1] != self.layer_dims[0]:
            raise DimensionError(
                f"expected input width {self.layer_dims[0]}, got {x.shape[1]}"
            )
        x = np.ascontiguousarray(x, dtype=np.float64)
        for layer in range(self.n_layers):
            x = K.dense_rows(
                x, self._w_views[layer], self._b_views[layer],
                self._layer_act(layer), LEAKY_SLOPE,
            )
        return x

    def forward_node(self, x: ad.Node) -> ad.Node:
        for layer in range(self.n_layers):
            x = ad.dense(x, self, layer, self._layer_act(layer), LEAKY_SLOPE)
        return x

    def copy_weights(self) -> np.ndarray:
        return self.flat.copy()

    def set_weights(self, flat: np.ndarray) -> None:
        if flat.shape != self.flat.shape:
            raise DimensionError(
                f"weight vector has {flat.size} entries, network needs {self.flat.size}"
            )
        self.flat[...] = flat

    def descriptor(self) -> dict:
        return {
            "layer_dims": self.layer_dims,
            "activation": self.activation,
            "seed": self.seed,
            "n_params": self.n_params,
        }

    def save(self, prefix: str | Path) -> None:
        """Write <prefix>.json (descriptor) and <prefix>.bin (LE float64 flat)."""
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        prefix.with_suffix(".json").write_text(
            json.dumps(self.descriptor(), sort_keys=True, indent=1) + "\n"
        )
        prefix.with_suffix(".bin").write_bytes(self.flat.astype("<f8").tobytes())

    @classmethod
    def load(cls, prefix: str | Path) -> "DenseNetwork":
        prefix = Path(prefix)
        try:
            desc = json.loads(prefix.with_suffix(".json").read_text())
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"malformed network descriptor: {exc}") from exc
        net = cls(desc["layer_dims"], desc["activation"])
        net.seed = desc.get("seed")
        raw = prefix.with_suffix(".bin").read_bytes()
        if len(raw) != net.n_params * 8:
            raise DataFormatError(
                f"weight file holds {len(raw) // 8} floats, descriptor says {net.n_params}"
            )
        net.flat[...] = np.frombuffer(raw, dtype="<f8")
        return net


def init_weights(layer_dims, seed: int, activation: str = "relu") -> DenseNetwork:
    """Construct and seed a network (spec-level convenience)."""
    return DenseNetwork(layer_dims, activation, seed=seed)
