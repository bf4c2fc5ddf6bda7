"""Timing comparison of the jitted and pure-numpy kernel lanes.

Runs each hot kernel in both lanes on training-scale shapes plus one full
forward+backward+update step of the standard operator surrogate, and prints a
table of per-call times and speedups.  Invoke with

    python benchmarks/bench_backends.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from surrodyn import kernels_numba as nb_lane
from surrodyn import kernels_numpy as np_lane


def timeit(fn, repeats: int) -> float:
    fn()  # warmup / JIT compile
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def kernel_cases(rng):
    x = rng.normal(size=(64, 200))
    w = rng.normal(size=(200, 300))
    b = rng.normal(size=300)
    pre = rng.normal(size=(64, 300))
    dout = rng.normal(size=(64, 300))
    grid = rng.uniform(0, 2, size=800)
    bp = rng.normal(size=(200, 300))
    tau = rng.normal(size=(800, 300))
    p = rng.normal(size=400_000)
    g = rng.normal(size=400_000)
    m = np.zeros_like(p)
    v = np.zeros_like(p)

    def cases(k):
        return {
            "dense_forward 64x200->300": lambda: k.dense_forward(x, w, b, 1, 0.01),
            "dense_backward 64x200->300": lambda: k.dense_backward(dout, x, w, pre, 1, 0.01),
            "dense_rows 800x20->300": lambda: k.dense_rows(
                rng.normal(size=(800, 20)), rng.normal(size=(20, 300)),
                np.zeros(300), 1, 0.01),
            "ld_assemble 200x300 @ 800pts": lambda: k.ld_assemble(bp, tau),
            "adam_update 400k params": lambda: k.adam_update(
                p, g, m, v, 3, 1e-3, 0.9, 0.999, 1e-8),
            "fourier_features 800x(k=10)": lambda: k.fourier_features(grid, 10, np.pi),
            "duffing_rk4 r=200 sub=10": lambda: k.duffing_rk4(
                50.0, 5.0, 1e4, 5.0, 1.0, 10.0, 2.0, 0.01, 200, 10),
        }

    return cases


def run_training_step(repeats: int) -> None:
    """Measure one forward+backward+Adam step; meant to run in a fresh process
    with SURRODYN_BACKEND already set so the lane is baked in at import."""
    from surrodyn import autodiff as ad
    from surrodyn.backend import BACKEND
    from surrodyn.models import default_config
    from surrodyn.optim import Adam
    from surrodyn.training import batch_loss_node

    rng = np.random.default_rng(0)
    model = default_config("pdon_nd", "case1").build(seed=0)
    forces = rng.normal(size=(64, 200))
    mu = rng.uniform(size=(64, 2))
    truth = rng.normal(size=(64, 200))
    t_feats = model.trunk_features(model.default_grid())
    opt = Adam(model.nets(), lr=1e-3)

    def step():
        for net in model.nets():
            net.zero_grad()
        loss = batch_loss_node(model.training_node(forces, mu, t_feats), truth)
        ad.backward(loss)
        opt.step()

    t = timeit(step, repeats)
    print(f"full training step (batch 64, {BACKEND:>5}): {t * 1e3:8.2f} ms")


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--training-step", action="store_true",
                        help=argparse.SUPPRESS)  # subprocess entry
    args = parser.parse_args()

    if args.training_step:
        run_training_step(args.repeats)
        return

    rng = np.random.default_rng(42)
    cases = kernel_cases(rng)
    print(f"{'kernel':<32} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name in cases(np_lane):
        t_np = timeit(cases(np_lane)[name], args.repeats)
        t_nb = timeit(cases(nb_lane)[name], args.repeats)
        print(f"{name:<32} {t_np * 1e3:>9.3f} ms {t_nb * 1e3:>9.3f} ms "
              f"{t_np / t_nb:>8.1f}x")

    print()
    import os
    import subprocess
    import sys

    for lane in ("numpy", "numba"):
        env = dict(os.environ, SURRODYN_BACKEND=lane)
        subprocess.run(
            [sys.executable, __file__, "--training-step",
             "--repeats", str(max(args.repeats // 5, 5))],
            env=env, check=True,
        )


if __name__ == "__main__":
    main()
