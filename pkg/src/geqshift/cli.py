"""Command-line interface: split generation, training, prediction,
cross-validation and the built-in verification suite.

Exit codes: 0 success, 1 selfcheck failure, 2 input validation error,
3 numerical abort, 4 checkpoint/artifact mismatch.

Run configuration is a JSON file::

    {
      "mode": "GeqShift",            # optional ablation preset, see MODES
      "data": "dataset.jsonl",
      "splits": "splits.json",
      "test_n_conformers": 100,
      "model": { ... ModelConfig keys ... },
      "train": { ... TrainConfig keys ... }
    }

Command-line flags override file keys. Ablation presets fix
(l_max, n_conformers_train, n_conformers_test):

    GeqShift      (2, 100, 100)    GeqShift_inv  (0, 100, 100)
    1T            (2, 100,   1)    1T_inv        (0, 100,   1)
    1TT           (2,   1,   1)    1TT_inv       (0,   1,   1)
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .evaluation import evaluate_external, run_cv
from .model import (
    CheckpointError,
    GeqShiftModel,
    ModelConfig,
    load_checkpoint,
    predict_ensemble,
    save_checkpoint,
)
from .molgraph import (
    DatasetError,
    load_dataset,
    load_splits,
    save_splits,
    stratified_kfold,
)
from .nn import ConfigurationError
from .selfcheck import run_selfcheck
from .training import NumericalAbort, TrainConfig, train

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SELFCHECK = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_ARTIFACT = 4

# (l_max, n_conformers_train, n_conformers_test)
MODES = {
    "GeqShift": (2, 100, 100),
    "GeqShift_inv": (0, 100, 100),
    "1T": (2, 100, 1),
    "1T_inv": (0, 100, 1),
    "1TT": (2, 1, 1),
    "1TT_inv": (0, 1, 1),
}


class CliError(ValueError):
    pass


def load_run_config(path=None, mode=None, seed=None, overrides=None):
    """Resolve (ModelConfig, TrainConfig, extras) from a JSON config file,
    an ablation preset and flag overrides, in increasing precedence."""
    raw = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise CliError(f"{path}: config must be a JSON object")
    model_kw = dict(raw.get("model", {}))
    train_kw = dict(raw.get("train", {}))
    extras = {
        "data": raw.get("data"),
        "splits": raw.get("splits"),
        "test_n_conformers": raw.get("test_n_conformers"),
    }
    mode = mode or raw.get("mode")
    if mode is not None:
        if mode not in MODES:
            raise CliError(f"unknown mode {mode!r}; choose from {sorted(MODES)}")
        l_max, n_train, n_test = MODES[mode]
        model_kw["l_max"] = l_max
        train_kw["n_conformers_train"] = n_train
        extras["test_n_conformers"] = n_test
    if seed is not None:
        model_kw["seed"] = seed
        train_kw["seed"] = seed
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in extras:
            extras[key] = value
        else:
            raise CliError(f"unknown override {key!r}")
    try:
        model_config = ModelConfig.from_dict(model_kw)
        train_config = TrainConfig(**train_kw)
    except TypeError as exc:
        raise CliError(f"bad config key: {exc}") from exc
    return model_config, train_config, extras


def cmd_splits(args):
    records = load_dataset(args.data)
    splits = stratified_kfold(records, k=args.k, seed=args.seed)
    save_splits(splits, args.seed, args.out)
    print(f"wrote {len(splits)} folds for {len(records)} records to {args.out}")
    return EXIT_OK


def cmd_train(args):
    model_config, train_config, extras = load_run_config(
        args.config, args.mode, args.seed, {"data": args.data, "splits": args.splits}
    )
    if extras["data"] is None:
        raise CliError("no dataset given (config 'data' key or --data)")
    records = load_dataset(extras["data"])
    if args.fold is not None:
        if extras["splits"] is None:
            raise CliError("--fold requires a splits file")
        splits = load_splits(extras["splits"])
        if not 0 <= args.fold < len(splits):
            raise CliError(f"fold {args.fold} out of range (k={len(splits)})")
        train_ids = set(splits[args.fold][0])
        records = [r for r in records if r.id in train_ids]
    os.makedirs(args.out, exist_ok=True)
    params, standardization, _ = train(
        records, train_config, model_config, os.path.join(args.out, "train_log.csv")
    )
    ckpt = os.path.join(args.out, "checkpoint")
    save_checkpoint(ckpt, model_config, params, standardization)
    print(f"trained on {len(records)} molecules; checkpoint at {ckpt}")
    return EXIT_OK


def cmd_predict(args):
    records = load_dataset(args.molecules)
    loaded = [load_checkpoint(p) for p in args.checkpoints]
    config = loaded[0][0]

    def arch(cfg):
        d = cfg.to_dict()
        d.pop("seed")  # seeds legitimately differ across averaged models
        return d

    for path, (cfg, _, _) in zip(args.checkpoints[1:], loaded[1:]):
        if arch(cfg) != arch(config):
            raise CheckpointError(f"checkpoint {path}: model architecture differs")
    model = GeqShiftModel(config)
    label_of = {}
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["molecule_id", "atom_index", "nucleus", "pred_mean_ppm",
             "pred_std_ppm", "true_ppm", "error_ppm"]
        )
        for rec in records:
            subset = list(range(min(args.n_conformers, len(rec.conformers))))
            means = []
            stds = None
            for _, params, standardization in loaded:
                result = predict_ensemble(
                    rec, params, config, standardization, subset, model=model
                )
                means.append(result["mean"])
                stds = result["std"]
            mean = np.mean(np.stack(means), axis=0)
            std = stds if len(loaded) == 1 else np.std(
                np.stack(means), axis=0
            )
            label_of = {
                (l.atom_index, l.nucleus): l.shift_ppm for l in rec.labels
            }
            for atom in rec.atoms:
                for c, nuc in enumerate(config.nuclei):
                    true = label_of.get((atom.index, nuc))
                    pred = float(mean[atom.index, c])
                    writer.writerow(
                        [
                            rec.id,
                            atom.index,
                            nuc,
                            repr(pred),
                            repr(float(std[atom.index, c])),
                            "" if true is None else repr(true),
                            "" if true is None else repr(pred - true),
                        ]
                    )
    print(f"wrote predictions for {len(records)} molecules to {args.out}")
    return EXIT_OK


def cmd_cv(args):
    model_config, train_config, extras = load_run_config(
        args.config,
        args.mode,
        args.seed,
        {
            "data": args.data,
            "splits": args.splits,
            "test_n_conformers": args.test_n_conformers,
        },
    )
    if extras["data"] is None:
        raise CliError("no dataset given (config 'data' key or --data)")
    records = load_dataset(extras["data"])
    if extras["splits"] is not None:
        splits = load_splits(extras["splits"])
    else:
        splits = stratified_kfold(records, k=args.k, seed=train_config.seed)
    n_test = extras["test_n_conformers"] or 100
    result = run_cv(
        records, splits, model_config, train_config, n_test,
        out_dir=args.out, parallel_folds=args.parallel_folds,
    )
    for key, cell in sorted(result["aggregate"].items()):
        print(
            f"{key}: MAE {cell['mae_mean']:.3f} ({cell['mae_std']:.3f})  "
            f"RMSE {cell['rmse_mean']:.3f} ({cell['rmse_std']:.3f})  n={cell['n_total']}"
        )
    print(f"report written to {args.out}/report.json")
    return EXIT_OK


def cmd_selfcheck(args):
    return EXIT_OK if run_selfcheck() else EXIT_SELFCHECK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="geqshift",
        description="Equivariant graph attention prediction of carbohydrate "
        "NMR chemical shifts from conformer ensembles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("splits", help="generate stratified k-fold split file")
    p.add_argument("--data", required=True, help="dataset JSONL path")
    p.add_argument("--k", type=int, default=10, help="number of folds")
    p.add_argument("--seed", type=int, default=0, help="shuffling seed")
    p.add_argument("--out", required=True, help="output splits JSON path")
    p.set_defaults(func=cmd_splits)

    p = sub.add_parser("train", help="train one model (optionally one CV fold)")
    p.add_argument("--config", help="run-config JSON file")
    p.add_argument("--mode", choices=sorted(MODES), help="ablation preset")
    p.add_argument("--data", help="dataset JSONL (overrides config)")
    p.add_argument("--splits", help="splits JSON (needed with --fold)")
    p.add_argument("--fold", type=int, help="train on this fold's train split")
    p.add_argument("--seed", type=int, help="model + training seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="ensemble (multi-model) shift prediction")
    p.add_argument("--checkpoints", nargs="+", required=True)
    p.add_argument("--molecules", required=True, help="input JSONL")
    p.add_argument("--n-conformers", type=int, default=100)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="full cross-validation run")
    p.add_argument("--config", help="run-config JSON file")
    p.add_argument("--mode", choices=sorted(MODES), help="ablation preset")
    p.add_argument("--data", help="dataset JSONL (overrides config)")
    p.add_argument("--splits", help="precomputed splits JSON")
    p.add_argument("--k", type=int, default=10, help="folds when no splits file")
    p.add_argument("--test-n-conformers", type=int, dest="test_n_conformers")
    p.add_argument("--seed", type=int, help="model + training seed")
    p.add_argument("--parallel-folds", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("selfcheck", help="run built-in verification suite")
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CheckpointError,) as exc:
        log.error("%s", exc)
        return EXIT_ARTIFACT
    except NumericalAbort as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL
    except (CliError, DatasetError, ConfigurationError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
