"""Supervised training of the forward surrogate, NRMSE metric and evaluation.

The training loss applies the normalized error per sample and averages over
the batch; the evaluation metric pools squared errors over the whole dataset
before normalizing.  Best-checkpoint selection uses the pooled train-set
metric recomputed with frozen weights at the evaluation cadence, so restoring
the best weights reproduces the recorded value exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .dataset import Dataset
from .errors import DimensionError, TrainingDiverged
from .optim import make_optimizer


def nrmse(pred: np.ndarray, truth: np.ndarray) -> float:
    """Pooled normalized RMS error: sqrt(sum (pred-truth)^2 / sum truth^2)."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise DimensionError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    denom = float((truth ** 2).sum())
    if denom == 0.0:
        raise ValueError("reference signal is identically zero")
    return float(np.sqrt(((pred - truth) ** 2).sum() / denom))


def per_sample_nrmse(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """NRMSE of each leading-axis sample separately."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise DimensionError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    p = pred.reshape(pred.shape[0], -1)
    t = truth.reshape(truth.shape[0], -1)
    denom = (t ** 2).sum(axis=1)
    if np.any(denom == 0.0):
        raise ValueError("a reference sample is identically zero")
    return np.sqrt(((p - t) ** 2).sum(axis=1) / denom)


def batch_loss_node(pred: ad.Node, truth: np.ndarray) -> ad.Node:
    """Mean over the batch of per-sample normalized errors (the training loss)."""
    denom = np.sqrt((truth ** 2).sum(axis=1))
    if np.any(denom == 0.0):
        raise ValueError("a reference sample is identically zero")
    diff = ad.sub(pred, ad.constant(truth))
    num = ad.sqrt(ad.sum_axis1(ad.mul(diff, diff)))
    return ad.mean_all(ad.mul(num, ad.constant(1.0 / denom)))


@dataclass
class TrainConfig:
    epochs: int = 10_000
    batch_size: int = 64
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    eval_every: int = 10
    plateau_patience: int | None = None  # evaluations without improvement

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be >= 1")
        if self.lr < 0:
            raise ValueError("learning rate must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs, "batch_size": self.batch_size, "lr": self.lr,
            "optimizer": self.optimizer, "seed": self.seed,
            "eval_every": self.eval_every, "plateau_patience": self.plateau_patience,
        }


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)   # one per epoch
    eval_epochs: list[int] = field(default_factory=list)
    train_eval: list[float] = field(default_factory=list)   # pooled, frozen weights
    test_nrmse: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_train_eval: float = float("inf")

    def write_csv(self, path: str | Path) -> None:
        evaluated = dict(zip(self.eval_epochs,
                             zip(self.train_eval, self.test_nrmse)))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "train_eval", "test_nrmse"])
            for i, loss in enumerate(self.train_loss, start=1):
                tr_s = te_s = ""
                if i in evaluated:
                    tr, te = evaluated[i]
                    tr_s = repr(tr)
                    te_s = "" if np.isnan(te) else repr(te)
                w.writerow([i, repr(loss), tr_s, te_s])


@dataclass(frozen=True)
class EvalResult:
    aggregate: float
    per_sample: np.ndarray


def evaluate(model, ds: Dataset) -> EvalResult:
    """Deterministic dataset metric; aggregate pools all samples and channels."""
    if ds.n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    preds = model.predict(ds.forces, ds.mu_normalized, ds.t_grid)
    return EvalResult(
        aggregate=nrmse(preds, ds.responses),
        per_sample=per_sample_nrmse(preds, ds.responses),
    )


def train_forward(model, ds_train: Dataset, cfg: TrainConfig,
                  ds_test: Dataset | None = None) -> TrainHistory:
    """Mini-batch training; leaves the model holding its best-metric weights."""
    if ds_train.r != model.resolution or ds_train.channels != model.channels:
        raise DimensionError("model resolution/channels do not match the dataset")
    rng = np.random.default_rng(cfg.seed)
    nets = model.nets()
    opt = make_optimizer(cfg.optimizer, nets, cfg.lr)
    t_feats = model.trunk_features(ds_train.t_grid)
    forces = ds_train.forces
    mu = ds_train.mu_normalized
    truth = ds_train.responses_flat
    n = ds_train.n
    history = TrainHistory()
    best_weights: list[np.ndarray] | None = None
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        running = 0.0
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            for net in nets:
                net.zero_grad()
            pred = model.training_node(forces[idx], mu[idx], t_feats)
            loss = batch_loss_node(pred, truth[idx])
            value = float(loss.value)
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"loss became non-finite at epoch {epoch}, batch {n_batches}",
                    epoch=epoch, batch=n_batches,
                )
            ad.backward(loss)
            opt.step()
            running += value
            n_batches += 1
        history.train_loss.append(running / n_batches)
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            train_metric = evaluate(model, ds_train).aggregate
            test_metric = evaluate(model, ds_test).aggregate if ds_test else float("nan")
            history.eval_epochs.append(epoch)
            history.train_eval.append(train_metric)
            history.test_nrmse.append(test_metric)
            if train_metric < history.best_train_eval:
                history.best_train_eval = train_metric
                history.best_epoch = epoch
                best_weights = [net.copy_weights() for net in nets]
                stale = 0
            else:
                stale += 1
                if cfg.plateau_patience is not None and stale >= cfg.plateau_patience:
                    break
    if best_weights is not None:
        for net, w in zip(nets, best_weights):
            net.set_weights(w)
    return history
