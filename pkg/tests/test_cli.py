"""Command-line surface: exit codes, mode presets and artifact plumbing."""

import csv
import json

import pytest

from geqshift.cli import (
    EXIT_ARTIFACT,
    EXIT_OK,
    EXIT_VALIDATION,
    MODES,
    load_run_config,
    main,
)
from geqshift.molgraph import load_splits, save_dataset

from conftest import make_corpus

TINY_MODEL = dict(
    n_layers=1, hidden_sig="8x0e+4x1o", node_emb_dim=8, edge_emb_dim=4,
    readout_scalar_dim=8, readout_hidden=8, weight_nn_hidden=8,
)


@pytest.fixture
def workdir(tmp_path):
    records = make_corpus(4, classes=("mono", "di"), n_conformers=2, seed=0)
    data = tmp_path / "corpus.jsonl"
    save_dataset(records, data)
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "data": str(data),
        "test_n_conformers": 2,
        "model": TINY_MODEL,
        "train": {"batch_size": 4, "n_conformers_train": 2},
    }))
    return tmp_path, data, config


def test_mode_presets_match_table():
    assert MODES == {
        "GeqShift": (2, 100, 100),
        "GeqShift_inv": (0, 100, 100),
        "1T": (2, 100, 1),
        "1T_inv": (0, 100, 1),
        "1TT": (2, 1, 1),
        "1TT_inv": (0, 1, 1),
    }


def test_load_run_config_mode_and_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"n_layers": 2}, "train": {"batch_size": 8}}))
    mc, tc, extras = load_run_config(cfg, mode="1TT_inv", seed=5)
    assert mc.l_max == 0 and tc.n_conformers_train == 1
    assert extras["test_n_conformers"] == 1
    assert mc.seed == 5 and tc.seed == 5
    assert mc.n_layers == 2 and tc.batch_size == 8
    with pytest.raises(ValueError):
        load_run_config(None, mode="bogus")


def test_splits_command(workdir):
    tmp, data, _ = workdir
    out = tmp / "splits.json"
    assert main(["splits", "--data", str(data), "--k", "2", "--seed", "0",
                 "--out", str(out)]) == EXIT_OK
    splits = load_splits(out)
    assert len(splits) == 2
    # determinism: same seed, same file
    out2 = tmp / "splits2.json"
    main(["splits", "--data", str(data), "--k", "2", "--seed", "0", "--out", str(out2)])
    assert out.read_text() == out2.read_text()


def test_splits_k_too_large_exits_2(workdir):
    tmp, data, _ = workdir
    assert main(["splits", "--data", str(data), "--k", "50",
                 "--out", str(tmp / "x.json")]) == EXIT_VALIDATION


def test_cv_then_train_then_predict(workdir):
    tmp, data, config = workdir
    splits = tmp / "splits.json"
    main(["splits", "--data", str(data), "--k", "2", "--seed", "0", "--out", str(splits)])

    cv_out = tmp / "cv"
    assert main(["cv", "--config", str(config), "--splits", str(splits),
                 "--out", str(cv_out)]) == EXIT_OK
    report = json.loads((cv_out / "report.json").read_text())
    assert report["k"] == 2

    train_out = tmp / "trained"
    assert main(["train", "--config", str(config), "--splits", str(splits),
                 "--fold", "0", "--out", str(train_out)]) == EXIT_OK
    assert (train_out / "checkpoint").exists()
    assert (train_out / "train_log.csv").exists()

    preds = tmp / "preds.csv"
    assert main(["predict", "--checkpoints", str(train_out / "checkpoint"),
                 str(cv_out / "fold_0" / "checkpoint"),
                 "--molecules", str(data), "--n-conformers", "2",
                 "--out", str(preds)]) == EXIT_OK
    with open(preds) as fh:
        rows = list(csv.DictReader(fh))
    assert rows and {"pred_mean_ppm", "pred_std_ppm", "error_ppm"} <= set(rows[0])


def test_predict_single_conformer_std_zero(workdir):
    tmp, data, config = workdir
    train_out = tmp / "t"
    main(["train", "--config", str(config), "--out", str(train_out)])
    preds = tmp / "p.csv"
    assert main(["predict", "--checkpoints", str(train_out / "checkpoint"),
                 "--molecules", str(data), "--n-conformers", "1",
                 "--out", str(preds)]) == EXIT_OK
    with open(preds) as fh:
        assert all(float(r["pred_std_ppm"]) == 0.0 for r in csv.DictReader(fh))


def test_predict_architecture_mismatch_exits_4(workdir, tmp_path):
    tmp, data, config = workdir
    other_cfg = tmp / "other.json"
    model = dict(TINY_MODEL, n_layers=2)
    other_cfg.write_text(json.dumps({
        "data": str(data), "model": model,
        "train": {"batch_size": 4, "n_conformers_train": 2},
    }))
    a, b = tmp / "a", tmp / "b"
    main(["train", "--config", str(config), "--out", str(a)])
    main(["train", "--config", str(other_cfg), "--out", str(b)])
    assert main(["predict", "--checkpoints", str(a / "checkpoint"),
                 str(b / "checkpoint"), "--molecules", str(data),
                 "--out", str(tmp / "o.csv")]) == EXIT_ARTIFACT


def test_missing_dataset_exits_2(tmp_path):
    assert main(["train", "--data", str(tmp_path / "nope.jsonl"),
                 "--out", str(tmp_path / "o")]) == EXIT_VALIDATION


def test_selfcheck_passes():
    assert main(["selfcheck"]) == EXIT_OK
