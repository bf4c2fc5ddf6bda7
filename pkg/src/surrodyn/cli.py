"""Command-line pipeline: data generation, training, evaluation, inversion.

Every stage is deterministic given its flags and seed, and writes artifacts
under --out (relative paths are joined to $SURRODYN_OUTPUT_ROOT when set).
Exit codes: 0 success, 1 user/configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import latent_pca, superres_eval, write_superres_csv
from .dataset import Dataset, generate_dataset
from .dynamics import SimGrid, SweepSpec
from .errors import ConfigError, NumericalFault
from .inversion import (
    EstimationResult,
    InitConfig,
    InitResult,
    RefineConfig,
    RefinementNet,
    estimate,
    gradient_init,
    train_refinement,
)
from .models import default_config, load_model, save_model
from .network import DenseNetwork
from .sampling import case_domain
from .training import TrainConfig, evaluate, train_forward


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _out_path(raw: str) -> Path:
    path = Path(raw)
    root = os.environ.get("SURRODYN_OUTPUT_ROOT")
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


_CONFIG_SCHEMAS = {
    "train": {"epochs": int, "batch_size": int, "lr": float, "optimizer": str,
              "seed": int, "eval_every": int, "plateau_patience": int},
    "init": {"epochs": int, "restarts": int, "lr": float, "lr_end": float,
             "optimizer": str, "seed": int},
    "refine": {"epochs": int, "iterations": int, "lr": float, "batch_size": int,
               "optimizer": str, "seed": int, "clip_grad_input": bool},
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    allowed_top = {"case", "arch", "data", "out", "seed", *_CONFIG_SCHEMAS}
    for key in doc:
        if key not in allowed_top:
            raise ConfigError(f"unknown config key {key!r}")
    for section, schema in _CONFIG_SCHEMAS.items():
        sub = doc.get(section, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        for key, value in sub.items():
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in config section {section!r}")
            want = schema[key]
            ok = isinstance(value, want) or (want is float and isinstance(value, int))
            if not ok and value is not None:
                raise ConfigError(
                    f"config {section}.{key} should be {want.__name__}, "
                    f"got {type(value).__name__}"
                )
    if "data" in doc:
        if not isinstance(doc["data"], dict) or \
                not set(doc["data"]) <= {"train", "test"}:
            raise ConfigError("config 'data' accepts only 'train' and 'test' paths")
    return doc


def _merged(section: dict, args: argparse.Namespace, mapping: dict) -> dict:
    out = dict(section)
    for key, attr in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[key] = value
    return out


def _cmd_gen_data(args) -> int:
    sweep = SweepSpec(amplitude=args.amplitude, f_low=args.f_low,
                      f_up=args.f_up, duration=args.duration)
    grid = SimGrid(dt=args.dt, r=int(round(args.duration / args.dt)),
                   substeps=args.substeps)
    ds = generate_dataset(args.case, args.role, args.n, sweep, grid,
                          mu3=args.mu3, seed=args.seed)
    out = _out_path(args.out)
    ds.save(out)
    print(f"wrote {ds.n} samples to {out}")
    return 0


def _cmd_train_forward(args) -> int:
    doc = _load_config(args.config)
    train_path = args.train or doc.get("data", {}).get("train")
    if train_path is None:
        raise ConfigError("a training dataset is required (--train or config data.train)")
    test_path = args.test or doc.get("data", {}).get("test")
    arch = args.arch or doc.get("arch")
    if arch is None:
        raise ConfigError("an architecture is required (--arch or config arch)")
    case = args.case or doc.get("case", "case1")
    ds_train = Dataset.load(train_path)
    ds_test = Dataset.load(test_path) if test_path else None
    cfg = TrainConfig(**_merged(doc.get("train", {}), args, {
        "epochs": "epochs", "batch_size": "batch_size", "lr": "lr",
        "optimizer": "optimizer", "seed": "seed", "eval_every": "eval_every",
        "plateau_patience": "plateau",
    }))
    model = default_config(arch, case).build(seed=cfg.seed)
    history = train_forward(model, ds_train, cfg, ds_test)
    out = _out_path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "checkpoint")
    history.write_csv(out / "history.csv")
    (out / "train_config.json").write_text(
        json.dumps({"arch": arch, "case": case, **cfg.to_dict()},
                   sort_keys=True, indent=1) + "\n"
    )
    print(f"best train metric {history.best_train_eval:.6g} "
          f"at epoch {history.best_epoch}; artifacts in {out}")
    return 0


def _cmd_eval_forward(args) -> int:
    model = load_model(args.model)
    ds = Dataset.load(args.data)
    result = evaluate(model, ds)
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        fh.write("sample_id,nrmse\n")
        for i, v in enumerate(result.per_sample):
            fh.write(f"{i},{float(v)!r}\n")
        fh.write(f"aggregate,{result.aggregate!r}\n")
    print(f"aggregate NRMSE {result.aggregate:.6g} over {ds.n} samples -> {out}")
    return 0


def _init_config_from(args, doc) -> InitConfig:
    return InitConfig(**_merged(doc.get("init", {}), args, {
        "epochs": "epochs", "restarts": "restarts", "lr": "lr",
        "lr_end": "lr_end", "optimizer": "optimizer", "seed": "seed",
    }))


def _cmd_invert_init(args) -> int:
    doc = _load_config(args.config)
    model = load_model(args.model)
    ds = Dataset.load(args.data)
    cfg = _init_config_from(args, doc)
    result = gradient_init(model, ds.forces, ds.responses, ds.normalization, cfg)
    out = _out_path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.save(out / "init_restarts.npy", result.mu_restarts)
    np.save(out / "init_losses.npy", result.loss_restarts)
    dummy = EstimationResult(
        mu_true=ds.mus, init=result,
        refined_restarts=result.mu_restarts,
        refined_best=result.mu_best,
        refined_mean=result.mu_mean,
        refined_std=result.mu_std,
        final_loss=result.loss_best,
    )
    dummy.write_csv(out / "init_estimates.csv")
    print(f"initialized {ds.n} samples x {cfg.restarts} restarts -> {out}")
    return 0


def _load_init(path: Path) -> InitResult:
    mu = np.load(path / "init_restarts.npy")
    losses = np.load(path / "init_losses.npy")
    pick = losses.argmin(axis=1)
    rows = np.arange(mu.shape[0])
    return InitResult(
        mu_restarts=mu, loss_restarts=losses,
        mu_best=mu[rows, pick], loss_best=losses[rows, pick],
        mu_mean=mu.mean(axis=1), mu_std=mu.std(axis=1),
    )


def save_refiner(refiner: RefinementNet, prefix: str | Path) -> None:
    refiner.net.save(prefix)
    meta = json.loads(Path(prefix).with_suffix(".json").read_text())
    meta["iterations"] = refiner.iterations
    Path(prefix).with_suffix(".json").write_text(
        json.dumps(meta, sort_keys=True, indent=1) + "\n"
    )


def load_refiner(prefix: str | Path) -> RefinementNet:
    net = DenseNetwork.load(prefix)
    meta = json.loads(Path(prefix).with_suffix(".json").read_text())
    return RefinementNet(net=net, iterations=int(meta.get("iterations", 1)))


def _cmd_train_refine(args) -> int:
    doc = _load_config(args.config)
    model = load_model(args.model)
    ds = Dataset.load(args.train)
    init = _load_init(Path(args.init))
    cfg = RefineConfig(**_merged(doc.get("refine", {}), args, {
        "epochs": "epochs", "iterations": "iterations", "lr": "lr",
        "batch_size": "batch_size", "seed": "seed",
    }))
    refiner = RefinementNet(dim_mu=ds.dim_mu, seed=cfg.seed,
                            iterations=cfg.iterations)
    history = train_refinement(model, ds, init, refiner, cfg)
    out = _out_path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_refiner(refiner, out / "refiner")
    with open(out / "refine_history.csv", "w", newline="") as fh:
        fh.write("epoch,loss\n")
        for i, v in enumerate(history.epoch_loss, start=1):
            fh.write(f"{i},{v!r}\n")
    print(f"best refinement loss {history.best_loss:.6g} "
          f"at epoch {history.best_epoch} -> {out}")
    return 0


def _cmd_estimate(args) -> int:
    doc = _load_config(args.config)
    model = load_model(args.model)
    ds = Dataset.load(args.data)
    refiner = load_refiner(args.refiner)
    cfg = _init_config_from(args, doc)
    result = estimate(model, refiner, ds.forces, ds.responses,
                      ds.normalization, cfg, mu_true=ds.mus)
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    result.write_csv(out)
    print(f"estimated {ds.n} samples -> {out}")
    return 0


def _cmd_superres(args) -> int:
    model = load_model(args.model)
    ds = Dataset.load(args.data)
    factors = [int(f) for f in args.factors.split(",") if f]
    results = superres_eval(model, ds, factors)
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_superres_csv(results, out)
    summary = ", ".join(f"x{k}={v:.6g}" for k, v in sorted(results.items()))
    print(f"super-resolution NRMSE {summary} -> {out}")
    return 0


def _cmd_latent_pca(args) -> int:
    model = load_model(args.model)
    domain = case_domain(args.case, "test")
    pca = latent_pca(model, domain, grid_n=args.grid_n)
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pca.write_csv(out)
    print(f"PC1 explained-variance ratio {pca.explained_variance:.6g} -> {out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="surrodyn",
                     description="surrogate forward/inverse modeling pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="simulate an LHS-sampled dataset")
    p.add_argument("--case", required=True, choices=["1a", "1b", "1c", "1d"])
    p.add_argument("--role", required=True, choices=["train", "test"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--mu3", type=float, default=1e4)
    p.add_argument("--amplitude", type=float, default=5.0)
    p.add_argument("--f-low", type=float, default=1.0)
    p.add_argument("--f-up", type=float, default=10.0)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--substeps", type=int, default=10)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train-forward", help="train a forward surrogate")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--arch", choices=["pdon_nd", "pdon_ld", "vanilla", "mlp"])
    p.add_argument("--case")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--optimizer", choices=["adam", "sgd"])
    p.add_argument("--seed", type=int)
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--plateau", type=int)
    p.set_defaults(func=_cmd_train_forward)

    p = sub.add_parser("eval-forward", help="evaluate a checkpoint on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval_forward)

    p = sub.add_parser("invert-init", help="gradient-based parameter initialization")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-end", type=float, dest="lr_end")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_invert_init)

    p = sub.add_parser("train-refine", help="train the refinement network")
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--init", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_train_refine)

    p = sub.add_parser("estimate", help="two-stage parameter estimation")
    p.add_argument("--model", required=True)
    p.add_argument("--refiner", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-end", type=float, dest="lr_end")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("superres", help="zero-shot super-resolution evaluation")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--factors", default="1,2,4")
    p.set_defaults(func=_cmd_superres)

    p = sub.add_parser("latent-pca", help="parameter-net PC1 map over the domain")
    p.add_argument("--model", required=True)
    p.add_argument("--case", default="1a")
    p.add_argument("--grid-n", type=int, default=50, dest="grid_n")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_latent_pca)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFault as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
