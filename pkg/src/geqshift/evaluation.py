"""Cross-validation orchestration, per-nucleus/per-class error metrics and
machine-readable exports (scatter, histograms, ensemble shift distributions).

Output directory layout of a CV run::

    fold_<i>/checkpoint          trained model container
    fold_<i>/predictions.csv     test-set prediction rows of that fold
    fold_<i>/train_log.csv       training curve
    predictions.csv              all prediction rows
    report.json                  per-fold cells + fold mean/std aggregate
    errors_C.csv, errors_H.csv   error histograms (0.1 / 0.01 ppm bins)
    error_summary.json           signed-error mean/std per nucleus
    ensemble_values/<mol_id>.csv per-conformer predicted shifts
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .model import (
    GeqShiftModel,
    ModelConfig,
    load_checkpoint,
    predict_ensemble,
    predict_multi_model,
    save_checkpoint,
)
from .training import TrainConfig, train, write_log

log = logging.getLogger(__name__)

__all__ = [
    "PredictionRow",
    "FoldReport",
    "metrics",
    "run_cv",
    "export_error_data",
    "evaluate_external",
    "rows_to_csv",
    "rows_from_csv",
]

HISTOGRAM_BIN_PPM = {"C": 0.1, "H": 0.01}

ROW_FIELDS = [
    "fold",
    "molecule_id",
    "saccharide_class",
    "atom_index",
    "nucleus",
    "true_ppm",
    "pred_mean_ppm",
    "pred_std_ppm",
]


@dataclass(frozen=True)
class PredictionRow:
    molecule_id: str
    saccharide_class: str
    atom_index: int
    nucleus: str
    true_ppm: float
    pred_mean_ppm: float
    pred_std_ppm: float
    fold: int


@dataclass(frozen=True)
class FoldReport:
    """Per-fold MAE/RMSE per (nucleus, saccharide class) cell."""

    fold: int
    cells: dict  # "C/mono" -> {"mae": float, "rmse": float, "n": int}

    def __post_init__(self):
        for key, cell in self.cells.items():
            # mean |x| <= sqrt(mean x^2); tiny slack for float rounding
            if cell["mae"] > cell["rmse"] + 1e-12:
                raise ValueError(f"fold {self.fold} cell {key}: MAE > RMSE")


def metrics(rows) -> dict:
    """MAE/RMSE/count per (nucleus, class) cell, keyed ``"C/mono"``; class
    ``all`` pools every class of a nucleus."""
    groups = {}
    for r in rows:
        delta = r.pred_mean_ppm - r.true_ppm
        groups.setdefault((r.nucleus, r.saccharide_class), []).append(delta)
        groups.setdefault((r.nucleus, "all"), []).append(delta)
    out = {}
    for (nuc, cls), deltas in sorted(groups.items()):
        d = np.asarray(deltas)
        out[f"{nuc}/{cls}"] = {
            "mae": float(np.abs(d).mean()),
            "rmse": float(np.sqrt((d**2).mean())),
            "n": int(d.size),
        }
    return out


def rows_to_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROW_FIELDS)
        for r in rows:
            writer.writerow(
                [
                    r.fold,
                    r.molecule_id,
                    r.saccharide_class,
                    r.atom_index,
                    r.nucleus,
                    repr(r.true_ppm),
                    repr(r.pred_mean_ppm),
                    repr(r.pred_std_ppm),
                ]
            )


def rows_from_csv(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                PredictionRow(
                    molecule_id=rec["molecule_id"],
                    saccharide_class=rec["saccharide_class"],
                    atom_index=int(rec["atom_index"]),
                    nucleus=rec["nucleus"],
                    true_ppm=float(rec["true_ppm"]),
                    pred_mean_ppm=float(rec["pred_mean_ppm"]),
                    pred_std_ppm=float(rec["pred_std_ppm"]),
                    fold=int(rec["fold"]),
                )
            )
    return rows


def _prediction_rows(record, result, nuclei, fold):
    """Rows for every labeled nucleus of one test molecule."""
    col = {nuc: c for c, nuc in enumerate(nuclei)}
    rows = []
    for lab in record.labels:
        if lab.nucleus not in col:
            continue
        c = col[lab.nucleus]
        rows.append(
            PredictionRow(
                molecule_id=record.id,
                saccharide_class=record.saccharide_class,
                atom_index=lab.atom_index,
                nucleus=lab.nucleus,
                true_ppm=lab.shift_ppm,
                pred_mean_ppm=float(result["mean"][lab.atom_index, c]),
                pred_std_ppm=float(result["std"][lab.atom_index, c]),
                fold=fold,
            )
        )
    return rows


def _write_ensemble_values(record, result, nuclei, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["conformer_index", "atom_index", "nucleus", "pred_ppm"])
        labeled = sorted({(l.atom_index, l.nucleus) for l in record.labels})
        col = {nuc: c for c, nuc in enumerate(nuclei)}
        for k, ci in enumerate(result["conformer_indices"]):
            for ai, nuc in labeled:
                if nuc in col:
                    writer.writerow(
                        [ci, ai, nuc, repr(float(result["per_conformer"][k, ai, col[nuc]]))]
                    )


def _run_fold(args):
    (fold, records, train_ids, test_ids, model_config, train_config,
     test_n_conformers, out_dir) = args
    by_id = {r.id: r for r in records}
    missing = [i for i in train_ids + test_ids if i not in by_id]
    if missing:
        raise ValueError(f"fold {fold}: split references unknown ids {missing[:5]}")
    train_records = [by_id[i] for i in train_ids]
    fold_dir = None
    log_path = None
    if out_dir is not None:
        fold_dir = os.path.join(out_dir, f"fold_{fold}")
        os.makedirs(fold_dir, exist_ok=True)
        log_path = os.path.join(fold_dir, "train_log.csv")
    params, standardization, _ = train(train_records, train_config, model_config, log_path)
    if fold_dir is not None:
        save_checkpoint(
            os.path.join(fold_dir, "checkpoint"), model_config, params, standardization
        )
    model = GeqShiftModel(model_config)
    rows, ensemble = [], {}
    for mid in test_ids:
        rec = by_id[mid]
        subset = list(range(min(test_n_conformers, len(rec.conformers))))
        result = predict_ensemble(
            rec, params, model_config, standardization, subset, model=model
        )
        rows.extend(_prediction_rows(rec, result, model_config.nuclei, fold))
        ensemble[mid] = (rec, result)
    if fold_dir is not None:
        rows_to_csv(rows, os.path.join(fold_dir, "predictions.csv"))
        ens_dir = os.path.join(out_dir, "ensemble_values")
        os.makedirs(ens_dir, exist_ok=True)
        for mid, (rec, result) in ensemble.items():
            _write_ensemble_values(
                rec, result, model_config.nuclei, os.path.join(ens_dir, f"{mid}.csv")
            )
    return fold, rows


def _aggregate(fold_reports):
    """Fold mean and (population) std of each cell's MAE/RMSE."""
    keys = sorted({k for fr in fold_reports for k in fr.cells})
    agg = {}
    for key in keys:
        maes = [fr.cells[key]["mae"] for fr in fold_reports if key in fr.cells]
        rmses = [fr.cells[key]["rmse"] for fr in fold_reports if key in fr.cells]
        ns = [fr.cells[key]["n"] for fr in fold_reports if key in fr.cells]
        agg[key] = {
            "mae_mean": float(np.mean(maes)),
            "mae_std": float(np.std(maes)),
            "rmse_mean": float(np.mean(rmses)),
            "rmse_std": float(np.std(rmses)),
            "n_folds": len(maes),
            "n_total": int(sum(ns)),
        }
    return agg


def run_cv(records, splits, model_config: ModelConfig, train_config: TrainConfig,
           test_n_conformers: int, out_dir=None, parallel_folds: int = 1):
    """Train/evaluate every fold; returns
    {"fold_reports", "rows", "aggregate"} and, with ``out_dir``, writes the
    full artifact layout."""
    if test_n_conformers < 1:
        raise ValueError("test_n_conformers must be >= 1")
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    jobs = [
        (fold, records, train_ids, test_ids, model_config, train_config,
         test_n_conformers, out_dir)
        for fold, (train_ids, test_ids) in enumerate(splits)
    ]
    if parallel_folds > 1:
        with ProcessPoolExecutor(max_workers=parallel_folds) as pool:
            results = list(pool.map(_run_fold, jobs))
    else:
        results = [_run_fold(j) for j in jobs]
    results.sort(key=lambda t: t[0])
    fold_reports, all_rows = [], []
    for fold, rows in results:
        fold_reports.append(FoldReport(fold=fold, cells=metrics(rows)))
        all_rows.extend(rows)
    aggregate = _aggregate(fold_reports)
    report = {
        "k": len(splits),
        "test_n_conformers": test_n_conformers,
        "model_config": model_config.to_dict(),
        "folds": [asdict(fr) for fr in fold_reports],
        "aggregate": aggregate,
        "pooled": metrics(all_rows),
    }
    if out_dir is not None:
        rows_to_csv(all_rows, os.path.join(out_dir, "predictions.csv"))
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1, sort_keys=True)
        export_error_data(all_rows, out_dir)
    return {"fold_reports": fold_reports, "rows": all_rows, "aggregate": aggregate,
            "report": report}


def _histogram(errors, width):
    lo = math.floor(errors.min() / width)
    hi = math.floor(errors.max() / width) + 1
    edges = np.arange(lo, hi + 1) * width
    counts, _ = np.histogram(errors, bins=edges)
    return edges, counts


def export_error_data(rows, out_dir):
    """Scatter CSV, fixed-width error histograms and a signed-error summary.

    Histogram bin widths: 0.1 ppm for C, 0.01 ppm for H. Bin counts sum to
    the number of rows per nucleus.
    """
    os.makedirs(out_dir, exist_ok=True)
    rows = list(rows)
    if not rows:
        raise ValueError("no prediction rows to export")
    rows_to_csv(rows, os.path.join(out_dir, "predictions.csv"))
    summary = {}
    for nuc, width in HISTOGRAM_BIN_PPM.items():
        errors = np.array(
            [r.pred_mean_ppm - r.true_ppm for r in rows if r.nucleus == nuc]
        )
        if errors.size == 0:
            log.warning("no %s rows; skipping errors_%s.csv", nuc, nuc)
            continue
        edges, counts = _histogram(errors, width)
        with open(
            os.path.join(out_dir, f"errors_{nuc}.csv"), "w", newline="", encoding="utf-8"
        ) as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_left_ppm", "bin_right_ppm", "count"])
            for left, right, c in zip(edges[:-1], edges[1:], counts):
                writer.writerow([repr(float(left)), repr(float(right)), int(c)])
        summary[nuc] = {
            "n": int(errors.size),
            "error_mean": float(errors.mean()),
            "error_std": float(errors.std()),
            "mae": float(np.abs(errors).mean()),
            "rmse": float(np.sqrt((errors**2).mean())),
        }
    with open(os.path.join(out_dir, "error_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    return summary


def evaluate_external(record, checkpoint_paths, test_n_conformers=None):
    """Predict a labeled external molecule with one or more trained models.

    Returns (table, mae) where table rows are dicts with atom_index, nucleus,
    true_ppm, pred_ppm, delta_ppm and mae maps nucleus -> MAE.
    """
    if not checkpoint_paths:
        raise ValueError("at least one checkpoint required")
    loaded = [load_checkpoint(p) for p in checkpoint_paths]
    config = loaded[0][0]

    def arch(cfg):
        d = cfg.to_dict()
        d.pop("seed")  # seeds legitimately differ across averaged models
        return d

    for path, (cfg, _, _) in zip(checkpoint_paths[1:], loaded[1:]):
        if arch(cfg) != arch(config):
            raise ValueError(f"checkpoint {path}: model architecture differs")
    subset = None
    if test_n_conformers is not None:
        subset = list(range(min(test_n_conformers, len(record.conformers))))
    mean = predict_multi_model(
        record, [p for _, p, _ in loaded], config, [s for _, _, s in loaded], subset
    )
    col = {nuc: c for c, nuc in enumerate(config.nuclei)}
    table = []
    for lab in record.labels:
        if lab.nucleus not in col:
            continue
        pred = float(mean[lab.atom_index, col[lab.nucleus]])
        table.append(
            {
                "atom_index": lab.atom_index,
                "nucleus": lab.nucleus,
                "true_ppm": lab.shift_ppm,
                "pred_ppm": pred,
                "delta_ppm": pred - lab.shift_ppm,
            }
        )
    if not table:
        raise ValueError(f"record {record.id}: no labels for nuclei {config.nuclei}")
    mae = {}
    for nuc in config.nuclei:
        deltas = [abs(t["delta_ppm"]) for t in table if t["nucleus"] == nuc]
        if deltas:
            mae[nuc] = float(np.mean(deltas))
    return table, mae
