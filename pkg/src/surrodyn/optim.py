"""Adam and SGD over flat parameter buffers.

Both act on any object exposing ``flat`` and ``grad`` 1-D float64 views (dense
networks, or ``FlatParams`` wrapping a raw array such as the parameter
estimates optimized during inversion).  A step with any non-finite gradient is
rejected outright: parameters, moments and the step counter stay untouched.
"""

from __future__ import annotations

import numpy as np

from .backend import kernels as K
from .errors import NonFiniteGradient


class FlatParams:
    """Adapter giving a raw array the (flat, grad) optimizer interface."""

    def __init__(self, values: np.ndarray):
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.flat = self.values.reshape(-1)
        self.grad = np.zeros_like(self.flat)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


class SGD:
    kind = "sgd"

    def __init__(self, blocks, lr: float):
        if lr < 0:
            raise ValueError("learning rate must be nonnegative")
        self.blocks = list(blocks)
        self.lr = lr
        self.step_count = 0

    def _check_finite(self) -> None:
        for blk in self.blocks:
            if not np.isfinite(blk.grad).all():
                raise NonFiniteGradient(
                    "optimizer step rejected: non-finite gradient entries"
                )

    def step(self) -> None:
        self._check_finite()
        for blk in self.blocks:
            K.sgd_update(blk.flat, blk.grad, self.lr)
        self.step_count += 1

    def zero_grad(self) -> None:
        for blk in self.blocks:
            blk.grad[...] = 0.0


class Adam(SGD):
    kind = "adam"

    def __init__(self, blocks, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(blocks, lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(blk.flat) for blk in self.blocks]
        self.v = [np.zeros_like(blk.flat) for blk in self.blocks]

    def step(self) -> None:
        self._check_finite()
        t = self.step_count + 1
        for blk, m, v in zip(self.blocks, self.m, self.v):
            K.adam_update(blk.flat, blk.grad, m, v, t, self.lr,
                          self.beta1, self.beta2, self.eps)
        self.step_count = t


def make_optimizer(kind: str, blocks, lr: float):
    if kind == "adam":
        return Adam(blocks, lr=lr)
    if kind == "sgd":
        return SGD(blocks, lr=lr)
    raise ValueError(f"unknown optimizer kind {kind!r}")
