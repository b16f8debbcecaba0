"""Metrics, CV orchestration and export round-trips."""

import csv
import json

import numpy as np
import pytest

from geqshift.evaluation import (
    FoldReport,
    PredictionRow,
    evaluate_external,
    export_error_data,
    metrics,
    rows_from_csv,
    rows_to_csv,
    run_cv,
)
from geqshift.model import ModelConfig
from geqshift.molgraph import stratified_kfold
from geqshift.training import TrainConfig

from conftest import make_corpus, make_molecule

TINY = dict(
    n_layers=1, hidden_sig="8x0e+4x1o", node_emb_dim=8, edge_emb_dim=4,
    readout_scalar_dim=8, readout_hidden=8, weight_nn_hidden=8, seed=0,
)


def row(nuc="C", cls="mono", true=70.0, pred=71.0, fold=0, mol="m", atom=0):
    return PredictionRow(mol, cls, atom, nuc, true, pred, 0.0, fold)


def test_metrics_trivial_cases():
    perfect = [row(pred=70.0), row(pred=70.0, atom=1)]
    m = metrics(perfect)
    assert m["C/mono"] == {"mae": 0.0, "rmse": 0.0, "n": 2}
    pm1 = [row(pred=71.0), row(pred=69.0, atom=1)]
    m = metrics(pm1)
    assert m["C/mono"]["mae"] == pytest.approx(1.0)
    assert m["C/mono"]["rmse"] == pytest.approx(1.0)
    skew = [row(pred=70.0), row(pred=72.0, atom=1)]
    m = metrics(skew)
    assert m["C/mono"]["mae"] == pytest.approx(1.0)
    assert m["C/mono"]["rmse"] == pytest.approx(np.sqrt(2.0))
    assert m["C/mono"]["rmse"] > m["C/mono"]["mae"]  # strict Jensen gap


def test_metrics_order_invariant_and_pooled_all():
    rows = [row(cls="mono"), row(cls="di", atom=1), row(nuc="H", pred=70.5, atom=2)]
    a, b = metrics(rows), metrics(rows[::-1])
    assert a == b
    assert a["C/all"]["n"] == 2


def test_fold_report_rejects_mae_above_rmse():
    with pytest.raises(ValueError):
        FoldReport(0, {"C/mono": {"mae": 2.0, "rmse": 1.0, "n": 3}})


def test_rows_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(0)
    rows = [
        PredictionRow(f"m{i}", "di", i, "H", float(rng.normal(4, 1)),
                      float(rng.normal(4, 1)), float(abs(rng.normal())), i % 3)
        for i in range(20)
    ]
    path = tmp_path / "rows.csv"
    rows_to_csv(rows, path)
    assert rows_from_csv(path) == rows
    assert metrics(rows_from_csv(path)) == metrics(rows)


def test_export_error_data(tmp_path):
    rng = np.random.default_rng(1)
    rows = [
        PredictionRow(f"m{i}", "mono", i, nuc, 50.0, 50.0 + float(rng.normal(0, s)),
                      0.0, 0)
        for i in range(40)
        for nuc, s in [("C", 0.4), ("H", 0.05)]
    ]
    summary = export_error_data(rows, tmp_path)
    for nuc, width in [("C", 0.1), ("H", 0.01)]:
        with open(tmp_path / f"errors_{nuc}.csv") as fh:
            hist = list(csv.DictReader(fh))
        total = sum(int(h["count"]) for h in hist)
        assert total == 40  # conservation
        widths = [float(h["bin_right_ppm"]) - float(h["bin_left_ppm"]) for h in hist]
        np.testing.assert_allclose(widths, width, atol=1e-9)
        assert summary[nuc]["n"] == 40
    on_disk = json.loads((tmp_path / "error_summary.json").read_text())
    assert on_disk == summary


def test_export_skips_missing_nucleus(tmp_path):
    rows = [row(nuc="C")]
    export_error_data(rows, tmp_path)
    assert (tmp_path / "errors_C.csv").exists()
    assert not (tmp_path / "errors_H.csv").exists()


def _cv(tmp_path, parallel=1):
    records = make_corpus(4, classes=("mono", "di"), n_conformers=2, seed=2)
    splits = stratified_kfold(records, k=2, seed=0)
    mc = ModelConfig(**TINY)
    tc = TrainConfig(batch_size=4, n_conformers_train=2, seed=0)
    return records, run_cv(records, splits, mc, tc, test_n_conformers=2,
                           out_dir=tmp_path, parallel_folds=parallel)


def test_run_cv_coverage_and_artifacts(tmp_path):
    records, result = _cv(tmp_path)
    tested = sorted({r.molecule_id for r in result["rows"]})
    assert tested == sorted(r.id for r in records)
    per_fold = {}
    for r in result["rows"]:
        per_fold.setdefault(r.fold, set()).add(r.molecule_id)
    assert not per_fold[0] & per_fold[1]  # each molecule tested exactly once
    for fold in (0, 1):
        assert (tmp_path / f"fold_{fold}" / "checkpoint").exists()
        assert (tmp_path / f"fold_{fold}" / "predictions.csv").exists()
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "ensemble_values" / f"{records[0].id}.csv").exists()


def test_run_cv_report_matches_reexported_csv(tmp_path):
    _, result = _cv(tmp_path)
    rows = rows_from_csv(tmp_path / "predictions.csv")
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["pooled"] == metrics(rows)
    for fr in report["folds"]:
        fold_rows = [r for r in rows if r.fold == fr["fold"]]
        assert fr["cells"] == metrics(fold_rows)


def test_run_cv_aggregate_matches_hand_computation(tmp_path):
    _, result = _cv(tmp_path)
    frs = result["fold_reports"]
    key = "C/all"
    maes = [fr.cells[key]["mae"] for fr in frs]
    assert result["aggregate"][key]["mae_mean"] == pytest.approx(np.mean(maes))
    assert result["aggregate"][key]["mae_std"] == pytest.approx(np.std(maes))


def test_run_cv_parallel_matches_serial(tmp_path):
    _, serial = _cv(tmp_path / "s")
    _, par = _cv(tmp_path / "p", parallel=2)
    assert serial["report"] == par["report"]


def test_evaluate_external(tmp_path):
    _, result = _cv(tmp_path)
    rec = make_molecule("ext", n_conformers=2, seed=9)
    ckpts = [tmp_path / "fold_0" / "checkpoint", tmp_path / "fold_1" / "checkpoint"]
    table, mae = evaluate_external(rec, ckpts)
    assert len(table) == len(rec.labels)
    for nuc in ("C", "H"):
        deltas = [abs(t["delta_ppm"]) for t in table if t["nucleus"] == nuc]
        assert mae[nuc] == pytest.approx(np.mean(deltas))
    with pytest.raises(ValueError):
        evaluate_external(rec, [])
