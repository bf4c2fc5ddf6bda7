import numpy as np
import pytest

from surrodyn.dataset import Dataset, default_normalization, generate_dataset
from surrodyn.dynamics import SimGrid, SweepSpec
from surrodyn.models import ParametricDeepONet, PositionalEncoder
from surrodyn.network import DenseNetwork
from surrodyn.sampling import case_domain

# small-but-real problem used by the fast unit tests: same sweep as the paper
# setup, coarse grid so simulations and training stay in the millisecond range
TOY_SWEEP = SweepSpec(amplitude=5.0, f_low=1.0, f_up=10.0, duration=2.0)
TOY_GRID = SimGrid(dt=0.125, r=16, substeps=4)


def build_toy_pdon(seed=0, decoder=False, channels=1):
    enc = PositionalEncoder(k=2, length=2.0 * channels)
    nets = dict(
        branch=DenseNetwork([16, 8, 8], "relu", seed=seed),
        param_net=DenseNetwork([2, 8, 8], "relu", seed=seed + 1),
        trunk=DenseNetwork([4, 8, 8], "relu", seed=seed + 2),
    )
    dec = DenseNetwork([16, 6, 16], "relu", seed=seed + 3) if decoder else None
    return ParametricDeepONet(encoder=enc, decoder=dec, channels=channels,
                              resolution=16, coord_span=2.0, **nets)


@pytest.fixture(scope="session")
def toy_train() -> Dataset:
    return generate_dataset("1a", "train", 12, TOY_SWEEP, TOY_GRID, seed=5)


@pytest.fixture(scope="session")
def toy_test() -> Dataset:
    return generate_dataset("1a", "test", 8, TOY_SWEEP, TOY_GRID, seed=6)


@pytest.fixture()
def toy_norm():
    return default_normalization(case_domain("1a", "test"))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
