"""Latent-feature PCA maps and zero-shot super-resolution evaluation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .dynamics import DuffingParams, SimGrid, simulate_duffing
from .errors import ConfigError, DimensionError
from .models import ParametricDeepONet
from .sampling import ParameterDomain
from .training import nrmse


def first_principal_component(features: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Centered-covariance PC1: (scores, loading vector, explained-variance ratio).

    The loading sign is canonicalized so its first nonzero entry is positive.
    Degenerate (constant) features yield zero scores and ratio 0.
    """
    features = np.asarray(features, dtype=np.float64)
    centered = features - features.mean(axis=0)
    total = float((centered ** 2).sum())
    if total == 0.0:
        return np.zeros(features.shape[0]), np.zeros(features.shape[1]), 0.0
    cov = centered.T @ centered / max(features.shape[0] - 1, 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    lead = eigvecs[:, -1]
    nonzero = np.nonzero(np.abs(lead) > 1e-12)[0]
    if nonzero.size and lead[nonzero[0]] < 0:
        lead = -lead
    ratio = float(eigvals[-1] / eigvals.sum()) if eigvals.sum() > 0 else 0.0
    return centered @ lead, lead, ratio


@dataclass(frozen=True)
class PcaMap:
    mu_grid: np.ndarray          # (points, dim)
    scores: np.ndarray           # (points,)
    explained_variance: float

    def write_csv(self, path: str | Path) -> None:
        dim = self.mu_grid.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"mu{d + 1}" for d in range(dim)] + ["pc1_score"])
            for row, score in zip(self.mu_grid, self.scores):
                w.writerow([repr(float(v)) for v in row] + [repr(float(score))])


def latent_pca(model: ParametricDeepONet, domain: ParameterDomain,
               grid_n: int = 50) -> PcaMap:
    """First-PC score of the parameter-net features over a uniform mu grid."""
    if grid_n < 2:
        raise ValueError("need at least two grid points per dimension")
    axes = [np.linspace(lo, hi, grid_n) for lo, hi in domain.global_bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    mu_grid = np.stack([m.ravel() for m in mesh], axis=1)
    lo = domain.bounds_lo()
    hi = domain.bounds_hi()
    z = (mu_grid - lo) / (hi - lo)
    features = model.param_net.forward(z)
    scores, _, ratio = first_principal_component(features)
    return PcaMap(mu_grid=mu_grid, scores=scores, explained_variance=ratio)


def superres_eval(model, ds_test: Dataset, factors=(1, 2, 4)) -> dict[int, float]:
    """NRMSE at refined time grids against freshly simulated ground truth.

    Requires a resolution-invariant (linear-decoder) model; ground truth is
    re-integrated at each refined grid with the dataset's own settings.
    """
    if getattr(model, "decoder", None) is not None:
        raise ConfigError(
            "the nonlinear decoder is resolution-bound; super-resolution "
            "evaluation needs a linear-decoder model"
        )
    if ds_test.channels != 1:
        raise DimensionError("super-resolution evaluation expects single-channel data")
    results: dict[int, float] = {}
    mus = ds_test.mu_normalized
    for factor in factors:
        factor = int(factor)
        if factor < 1:
            raise ValueError("factors must be positive integers")
        fine = SimGrid(dt=ds_test.grid.dt / factor, r=ds_test.grid.r * factor,
                       substeps=ds_test.grid.substeps)
        preds = model.predict(ds_test.forces, mus, fine.times)
        truth = np.empty((ds_test.n, 1, fine.r))
        for i in range(ds_test.n):
            params = DuffingParams(ds_test.mus[i, 0], ds_test.mus[i, 1], ds_test.mu3)
            truth[i, 0] = simulate_duffing(params, ds_test.sweep, fine).a
        results[factor] = nrmse(preds, truth)
    return results


def write_superres_csv(results: dict[int, float], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["factor", "nrmse"])
        for factor in sorted(results):
            w.writerow([factor, repr(float(results[factor]))])
