"""Two-stage parameter estimation on a frozen forward surrogate.

Stage one starts from uniform random draws inside the parameter bounds and
descends the surrogate's prediction loss with respect to the (normalized)
parameters, clipping iterates to the bounds; the best-loss iterate of each
restart is kept.  Stage two trains a small refinement network mapping
(current estimate, loss gradient) to an additive update, supervised by the
combined parameter + response loss with the surrogate held fixed.

Everything here treats the surrogate as read-only: its weights are marked
non-trainable for the duration of a call and restored afterwards.
"""

from __future__ import annotations

import csv
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .dataset import Dataset, Normalization
from .errors import DimensionError, EstimationFailed, TrainingDiverged
from .models import ParametricDeepONet
from .network import DenseNetwork
from .optim import FlatParams, make_optimizer


@dataclass
class InitConfig:
    epochs: int = 5000
    restarts: int = 5
    lr: float = 1e-2
    lr_end: float | None = 1e-4  # geometric decay target; None keeps lr constant
    optimizer: str = "adam"
    seed: int = 0
    bounds_lo: np.ndarray | None = None  # physical units; dataset bounds if None
    bounds_hi: np.ndarray | None = None

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("need at least one restart")
        if self.epochs < 1:
            raise ValueError("need at least one epoch")
        if self.lr <= 0 or (self.lr_end is not None and self.lr_end <= 0):
            raise ValueError("learning rates must be positive")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs, "restarts": self.restarts, "lr": self.lr,
            "lr_end": self.lr_end, "optimizer": self.optimizer, "seed": self.seed,
        }


@contextmanager
def frozen(model):
    nets = model.nets()
    saved = [net.trainable for net in nets]
    for net in nets:
        net.trainable = False
    try:
        yield model
    finally:
        for net, state in zip(nets, saved):
            net.trainable = state


class FrozenPredictor:
    """Tape builder over a frozen surrogate, reusing everything mu-independent.

    For the parametric operator the branch and trunk outputs are precomputed
    once; other architectures fall back to the generic training graph.
    """

    def __init__(self, model, forces: np.ndarray):
        self.model = model
        self.forces = np.ascontiguousarray(forces, dtype=np.float64)
        self.t_feats = model.trunk_features(model.default_grid())
        if isinstance(model, ParametricDeepONet):
            self._branch_out = model.branch.forward(self.forces)
            tau = model.trunk.forward(self.t_feats)
            self._tau_t = np.ascontiguousarray(tau.T)
            self._mode = "pdon"
        else:
            self._mode = "generic"

    def predict_node(self, mu_node: ad.Node, idx: np.ndarray | None = None) -> ad.Node:
        """Graph from normalized-mu node to the flattened response prediction."""
        if self._mode == "pdon":
            b = self._branch_out if idx is None else self._branch_out[idx]
            p = self.model.param_net.forward_node(mu_node)
            ld = ad.matmul(ad.mul(ad.constant(b), p), ad.constant(self._tau_t))
            if self.model.decoder is not None:
                return self.model.decoder.forward_node(ld)
            return ld
        forces = self.forces if idx is None else self.forces[idx]
        return self.model.training_node(forces, mu_node, self.t_feats)


def _per_sample_loss_node(pred: ad.Node, truth: np.ndarray,
                          inv_norms: np.ndarray) -> ad.Node:
    diff = ad.sub(pred, ad.constant(truth))
    num = ad.sqrt(ad.sum_axis1(ad.mul(diff, diff)))
    return ad.mul(num, ad.constant(inv_norms))


def loss_grad_wrt_mu(predictor: FrozenPredictor, z: np.ndarray, truth: np.ndarray,
                     inv_norms: np.ndarray, idx: np.ndarray | None = None
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample loss values and gradients w.r.t. the normalized parameters."""
    mu_leaf = ad.leaf(z)
    losses = _per_sample_loss_node(predictor.predict_node(mu_leaf, idx), truth,
                                   inv_norms)
    total = ad.sum_all(losses)
    ad.backward(total)
    grad = mu_leaf.grad if mu_leaf.grad is not None else np.zeros_like(z)
    return losses.value, grad


@dataclass
class InitResult:
    mu_restarts: np.ndarray   # (samples, restarts, dim), physical units
    loss_restarts: np.ndarray  # (samples, restarts)
    mu_best: np.ndarray       # (samples, dim)
    loss_best: np.ndarray     # (samples,)
    mu_mean: np.ndarray
    mu_std: np.ndarray


def _response_norms(responses: np.ndarray) -> np.ndarray:
    flat = responses.reshape(responses.shape[0], -1)
    norms = np.sqrt((flat ** 2).sum(axis=1))
    if np.any(norms == 0.0):
        raise ValueError("a target response is identically zero")
    return norms


def _normalized_bounds(norm: Normalization, cfg: InitConfig) -> tuple[np.ndarray, np.ndarray]:
    lo = norm.mu_lo if cfg.bounds_lo is None else np.asarray(cfg.bounds_lo, float)
    hi = norm.mu_hi if cfg.bounds_hi is None else np.asarray(cfg.bounds_hi, float)
    return norm.normalize_mu(lo), norm.normalize_mu(hi)


def gradient_init(model, forces: np.ndarray, responses: np.ndarray,
                  norm: Normalization, cfg: InitConfig,
                  initial: np.ndarray | None = None) -> InitResult:
    """Multi-restart descent of the frozen surrogate's prediction loss."""
    forces = np.atleast_2d(np.asarray(forces, dtype=np.float64))
    responses = np.asarray(responses, dtype=np.float64)
    if responses.ndim == 2:
        responses = responses[:, None, :]
    n_samples = forces.shape[0]
    if responses.shape[0] != n_samples:
        raise DimensionError("forces and responses disagree in sample count")
    dim = model.dim_mu
    reps = cfg.restarts
    rows = n_samples * reps
    truth = np.repeat(responses.reshape(n_samples, -1), reps, axis=0)
    inv_norms = 1.0 / np.repeat(_response_norms(responses), reps)
    zlo, zhi = _normalized_bounds(norm, cfg)

    rng = np.random.default_rng(cfg.seed)
    if initial is not None:
        z0 = norm.normalize_mu(np.asarray(initial, dtype=np.float64))
        z = np.repeat(np.atleast_2d(z0), reps, axis=0).copy()
    else:
        z = rng.uniform(zlo, zhi, size=(rows, dim))

    with frozen(model):
        predictor = FrozenPredictor(model, np.repeat(forces, reps, axis=0))
        params = FlatParams(z)
        z = params.values
        opt = make_optimizer(cfg.optimizer, [params], cfg.lr)
        best_loss = np.full(rows, np.inf)
        best_z = z.copy()
        decay = (
            (cfg.lr_end / cfg.lr) ** (1.0 / max(cfg.epochs - 1, 1))
            if cfg.lr_end is not None else 1.0
        )
        for it in range(cfg.epochs):
            losses, grad = loss_grad_wrt_mu(predictor, z, truth, inv_norms)
            alive = np.isfinite(losses)
            improved = alive & (losses < best_loss)
            best_loss[improved] = losses[improved]
            best_z[improved] = z[improved]
            grad[~alive] = 0.0
            grad[~np.isfinite(grad)] = 0.0
            params.grad[...] = grad.reshape(-1)
            opt.lr = cfg.lr * decay ** it
            opt.step()
            np.clip(z, zlo, zhi, out=z)
        losses, _ = loss_grad_wrt_mu(predictor, z, truth, inv_norms)
        alive = np.isfinite(losses)
        improved = alive & (losses < best_loss)
        best_loss[improved] = losses[improved]
        best_z[improved] = z[improved]

    loss_restarts = best_loss.reshape(n_samples, reps)
    if not np.isfinite(loss_restarts).any(axis=1).all():
        raise EstimationFailed("every restart diverged for at least one sample")
    mu_restarts = norm.denormalize_mu(best_z.reshape(n_samples, reps, dim))
    pick = loss_restarts.argmin(axis=1)
    rows_idx = np.arange(n_samples)
    return InitResult(
        mu_restarts=mu_restarts,
        loss_restarts=loss_restarts,
        mu_best=mu_restarts[rows_idx, pick],
        loss_best=loss_restarts[rows_idx, pick],
        mu_mean=mu_restarts.mean(axis=1),
        mu_std=mu_restarts.std(axis=1),
    )


def grid_search(model, forces: np.ndarray, responses: np.ndarray,
                norm: Normalization, n_grid: int = 200,
                chunk: int = 4096) -> np.ndarray:
    """Exhaustive loss minimization over an n_grid^dim lattice (physical units)."""
    forces = np.atleast_2d(np.asarray(forces, dtype=np.float64))
    responses = np.asarray(responses, dtype=np.float64)
    if responses.ndim == 2:
        responses = responses[:, None, :]
    dim = model.dim_mu
    axes = [np.linspace(0.0, 1.0, n_grid) for _ in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    z_grid = np.stack([m.ravel() for m in mesh], axis=1)
    n_samples = forces.shape[0]
    truth = responses.reshape(n_samples, -1)
    best = np.empty((n_samples, dim))
    with frozen(model):
        if isinstance(model, ParametricDeepONet):
            b_all = model.branch.forward(forces)
            tau_t = np.ascontiguousarray(
                model.trunk.forward(model.trunk_features(model.default_grid())).T
            )
            p_grid = model.param_net.forward(z_grid)
            for s in range(n_samples):
                best_val = np.inf
                best_row = 0
                for start in range(0, z_grid.shape[0], chunk):
                    bp = b_all[s] * p_grid[start:start + chunk]
                    pred = bp @ tau_t
                    if model.decoder is not None:
                        pred = model.decoder.forward(pred)
                    err = ((pred - truth[s]) ** 2).sum(axis=1)
                    row = int(err.argmin())
                    if err[row] < best_val:
                        best_val = float(err[row])
                        best_row = start + row
                best[s] = z_grid[best_row]
        else:
            for s in range(n_samples):
                best_val = np.inf
                best_row = 0
                for start in range(0, z_grid.shape[0], chunk):
                    zc = z_grid[start:start + chunk]
                    f_rep = np.tile(forces[s], (zc.shape[0], 1))
                    pred = model.predict(f_rep, zc).reshape(zc.shape[0], -1)
                    err = ((pred - truth[s]) ** 2).sum(axis=1)
                    row = int(err.argmin())
                    if err[row] < best_val:
                        best_val = float(err[row])
                        best_row = start + row
                best[s] = z_grid[best_row]
    return norm.denormalize_mu(best)


@dataclass
class RefineConfig:
    epochs: int = 300
    iterations: int = 1  # update steps per sample (J)
    lr: float = 1e-3
    batch_size: int = 64
    optimizer: str = "adam"
    seed: int = 0
    clip_grad_input: bool = True

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs, "iterations": self.iterations, "lr": self.lr,
            "batch_size": self.batch_size, "optimizer": self.optimizer,
            "seed": self.seed, "clip_grad_input": self.clip_grad_input,
        }


class RefinementNet:
    """Dense net from (estimate, loss gradient) to an additive update."""

    def __init__(self, dim_mu: int = 2, hidden=(64, 64), seed: int = 0,
                 net: DenseNetwork | None = None, iterations: int = 1):
        if net is None:
            net = DenseNetwork([2 * dim_mu, *hidden, dim_mu], "relu", seed=seed)
        if net.layer_dims[0] != 2 * net.layer_dims[-1]:
            raise DimensionError(
                "refinement net input must be twice its output dimension"
            )
        self.net = net
        self.dim_mu = net.layer_dims[-1]
        self.iterations = iterations

    def zero_output(self) -> None:
        """Force the update to be identically zero (identity refinement)."""
        self.net.weight(self.net.n_layers - 1)[...] = 0.0
        self.net.bias(self.net.n_layers - 1)[...] = 0.0


def _clip_rows_to_unit(g: np.ndarray) -> np.ndarray:
    norms = np.sqrt((g ** 2).sum(axis=1, keepdims=True))
    return g / np.maximum(norms, 1.0)


def _refined_node(predictor: FrozenPredictor, refiner: RefinementNet,
                  z0: np.ndarray, truth: np.ndarray, inv_norms: np.ndarray,
                  cfg_iters: int, clip_grad: bool, zlo, zhi,
                  idx: np.ndarray | None = None) -> ad.Node:
    """Graph of J refinement steps; gradient inputs are treated as constants."""
    z_node = ad.constant(z0)
    for _ in range(cfg_iters):
        _, g = loss_grad_wrt_mu(predictor, z_node.value, truth, inv_norms, idx)
        if clip_grad:
            g = _clip_rows_to_unit(g)
        delta = refiner.net.forward_node(ad.concat_cols([z_node, ad.constant(g)]))
        z_node = _clip_box(ad.add(z_node, delta), zlo, zhi)
    return z_node


def _clip_box(node: ad.Node, lo: np.ndarray, hi: np.ndarray) -> ad.Node:
    inside = (node.value >= lo) & (node.value <= hi)

    def backward_fn(g: np.ndarray) -> None:
        node.accumulate(np.where(inside, g, 0.0))

    return ad.Node(np.clip(node.value, lo, hi), (node,),
                   backward_fn if node.needs_grad else None, node.needs_grad)


def refine_values(predictor: FrozenPredictor, refiner: RefinementNet,
                  z0: np.ndarray, truth: np.ndarray, inv_norms: np.ndarray,
                  iterations: int, clip_grad: bool, zlo, zhi,
                  idx: np.ndarray | None = None) -> np.ndarray:
    """Tape-free application of J refinement steps."""
    z = z0.copy()
    for _ in range(iterations):
        _, g = loss_grad_wrt_mu(predictor, z, truth, inv_norms, idx)
        if clip_grad:
            g = _clip_rows_to_unit(g)
        delta = refiner.net.forward(np.concatenate([z, g], axis=1))
        z = np.clip(z + delta, zlo, zhi)
    return z


@dataclass
class RefineHistory:
    epoch_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_loss: float = float("inf")


def combined_loss_values(predictor: FrozenPredictor, z_hat: np.ndarray,
                         z_true: np.ndarray, truth: np.ndarray,
                         inv_norms: np.ndarray) -> float:
    """Parameter NRMSE plus forward NRMSE, both per-sample then averaged."""
    mu_err = np.sqrt(((z_hat - z_true) ** 2).sum(axis=1))
    mu_ref = np.sqrt((z_true ** 2).sum(axis=1))
    inv = float((mu_err / mu_ref).mean())
    losses, _ = loss_grad_wrt_mu(predictor, z_hat, truth, inv_norms)
    return inv + float(losses.mean())


def train_refinement(model, ds_train: Dataset, init: InitResult,
                     refiner: RefinementNet, cfg: RefineConfig) -> RefineHistory:
    """Supervised training of the refinement net over frozen-surrogate rollouts."""
    norm = ds_train.normalization
    z_star = norm.normalize_mu(init.mu_best)
    z_true = norm.normalize_mu(ds_train.mus)
    if np.any(np.sqrt((z_true ** 2).sum(axis=1)) == 0.0):
        raise ValueError("a normalized parameter vector is zero; loss undefined")
    truth = ds_train.responses_flat
    inv_norms = 1.0 / _response_norms(ds_train.responses)
    zlo = np.zeros(refiner.dim_mu)
    zhi = np.ones(refiner.dim_mu)
    rng = np.random.default_rng(cfg.seed)
    history = RefineHistory()
    best_weights = None
    with frozen(model):
        predictor = FrozenPredictor(model, ds_train.forces)
        opt = make_optimizer(cfg.optimizer, [refiner.net], cfg.lr)
        mu_ref = np.sqrt((z_true ** 2).sum(axis=1))
        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(ds_train.n)
            running = 0.0
            n_batches = 0
            for start in range(0, ds_train.n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                refiner.net.zero_grad()
                z_hat = _refined_node(
                    predictor, refiner, z_star[idx], truth[idx], inv_norms[idx],
                    cfg.iterations, cfg.clip_grad_input, zlo, zhi, idx,
                )
                diff = ad.sub(z_hat, ad.constant(z_true[idx]))
                inv_loss = ad.mean_all(ad.mul(
                    ad.sqrt(ad.sum_axis1(ad.mul(diff, diff))),
                    ad.constant(1.0 / mu_ref[idx]),
                ))
                fwd_loss = ad.mean_all(_per_sample_loss_node(
                    predictor.predict_node(z_hat, idx), truth[idx], inv_norms[idx],
                ))
                loss = ad.add(inv_loss, fwd_loss)
                value = float(loss.value)
                if not np.isfinite(value):
                    raise TrainingDiverged(
                        f"refinement loss non-finite at epoch {epoch}",
                        epoch=epoch, batch=n_batches,
                    )
                ad.backward(loss)
                opt.step()
                running += value
                n_batches += 1
            mean_loss = running / n_batches
            history.epoch_loss.append(mean_loss)
            if mean_loss < history.best_loss:
                history.best_loss = mean_loss
                history.best_epoch = epoch
                best_weights = refiner.net.copy_weights()
    if best_weights is not None:
        refiner.net.set_weights(best_weights)
    return history


@dataclass
class EstimationResult:
    mu_true: np.ndarray | None       # (samples, dim) when known
    init: InitResult
    refined_restarts: np.ndarray     # (samples, restarts, dim)
    refined_best: np.ndarray         # (samples, dim)
    refined_mean: np.ndarray
    refined_std: np.ndarray
    final_loss: np.ndarray           # forward loss at refined_best

    def write_csv(self, path: str | Path) -> None:
        dim = self.init.mu_best.shape[1]
        cols = ["sample_id"]
        cols += [f"true_mu{d + 1}" for d in range(dim)]
        for stage in ("init", "refined"):
            cols += [f"{stage}_mu{d + 1}" for d in range(dim)]
            cols += [f"{stage}_mu{d + 1}_mean" for d in range(dim)]
            cols += [f"{stage}_mu{d + 1}_std" for d in range(dim)]
        cols += ["init_loss", "final_loss"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for i in range(self.init.mu_best.shape[0]):
                row: list = [i]
                row += list(self.mu_true[i]) if self.mu_true is not None else [""] * dim
                row += list(self.init.mu_best[i])
                row += list(self.init.mu_mean[i])
                row += list(self.init.mu_std[i])
                row += list(self.refined_best[i])
                row += list(self.refined_mean[i])
                row += list(self.refined_std[i])
                row += [self.init.loss_best[i], self.final_loss[i]]
                w.writerow([x if isinstance(x, (int, str)) else repr(float(x))
                            for x in row])


def estimate(model, refiner: RefinementNet, forces: np.ndarray,
             responses: np.ndarray, norm: Normalization, cfg: InitConfig,
             refine_cfg: RefineConfig | None = None,
             mu_true: np.ndarray | None = None,
             init: InitResult | None = None) -> EstimationResult:
    """Gradient initialization followed by refinement of every restart."""
    refine_cfg = refine_cfg or RefineConfig(iterations=refiner.iterations)
    if init is None:
        init = gradient_init(model, forces, responses, norm, cfg)
    forces = np.atleast_2d(np.asarray(forces, dtype=np.float64))
    responses = np.asarray(responses, dtype=np.float64)
    if responses.ndim == 2:
        responses = responses[:, None, :]
    n_samples, reps, dim = init.mu_restarts.shape
    truth = responses.reshape(n_samples, -1)
    inv_norms = 1.0 / _response_norms(responses)
    zlo = np.zeros(dim)
    zhi = np.ones(dim)
    with frozen(model):
        predictor = FrozenPredictor(model, forces)
        refined = np.empty_like(init.mu_restarts)
        for rep in range(reps):
            z0 = norm.normalize_mu(init.mu_restarts[:, rep])
            z_hat = refine_values(predictor, refiner, z0, truth, inv_norms,
                                  refine_cfg.iterations,
                                  refine_cfg.clip_grad_input, zlo, zhi)
            refined[:, rep] = norm.denormalize_mu(z_hat)
        z_best = norm.normalize_mu(init.mu_best)
        z_best_ref = refine_values(predictor, refiner, z_best, truth, inv_norms,
                                   refine_cfg.iterations,
                                   refine_cfg.clip_grad_input, zlo, zhi)
        final_losses, _ = loss_grad_wrt_mu(predictor, z_best_ref, truth, inv_norms)
    return EstimationResult(
        mu_true=mu_true,
        init=init,
        refined_restarts=refined,
        refined_best=norm.denormalize_mu(z_best_ref),
        refined_mean=refined.mean(axis=1),
        refined_std=refined.std(axis=1),
        final_loss=final_losses,
    )


def parameter_nrmse(estimates: np.ndarray, truths: np.ndarray) -> np.ndarray:
    """Per-dimension pooled NRMSE of parameter estimates (physical units)."""
    estimates = np.asarray(estimates, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if estimates.shape != truths.shape:
        raise DimensionError("estimate and truth arrays must share a shape")
    denom = (truths ** 2).sum(axis=0)
    if np.any(denom == 0.0):
        raise ValueError("a parameter dimension is identically zero")
    return np.sqrt(((estimates - truths) ** 2).sum(axis=0) / denom)
