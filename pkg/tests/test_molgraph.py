"""Dataset model, JSONL round-trips, graph construction and fold splitting."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geqshift.molgraph import (
    Atom,
    Bond,
    DatasetError,
    DegenerateGeometryError,
    MoleculeRecord,
    ShiftLabel,
    build_graph,
    load_dataset,
    load_splits,
    save_dataset,
    save_splits,
    stratified_kfold,
)

from conftest import make_corpus, make_molecule


def test_atom_bond_label_validation():
    with pytest.raises(DatasetError):
        Atom(0, 6, 5)  # too many protons
    with pytest.raises(DatasetError):
        Atom(0, 0, 1)
    with pytest.raises(DatasetError):
        Bond(2, 2)
    with pytest.raises(DatasetError):
        Bond(0, 1, "triple")
    with pytest.raises(DatasetError):
        ShiftLabel(0, "N", 100.0)
    with pytest.raises(DatasetError):
        ShiftLabel(0, "C", 300.0)  # outside plausibility window
    with pytest.raises(DatasetError):
        ShiftLabel(0, "H", 20.0)
    with pytest.raises(DatasetError):
        ShiftLabel(0, "H", 5.0, 0)


def test_record_validation():
    atoms = [Atom(0, 6, 1), Atom(1, 8, 0)]
    ok = MoleculeRecord("x", "mono", atoms, [Bond(0, 1)], [np.zeros((2, 3))],
                        [ShiftLabel(0, "C", 70.0)])
    assert ok.n_atoms == 2
    with pytest.raises(DatasetError):
        MoleculeRecord("x", "tetra", atoms, [], [np.zeros((2, 3))], [])
    with pytest.raises(DatasetError):
        MoleculeRecord("x", "mono", atoms, [], [], [])  # no conformers
    with pytest.raises(DatasetError):
        MoleculeRecord("x", "mono", atoms, [], [np.zeros((3, 3))], [])
    with pytest.raises(DatasetError):
        MoleculeRecord("x", "mono", atoms, [Bond(0, 5)], [np.zeros((2, 3))], [])
    with pytest.raises(DatasetError):
        MoleculeRecord("x", "mono", atoms, [], [np.zeros((2, 3))],
                       [ShiftLabel(7, "C", 70.0)])


def test_dataset_round_trip(tmp_path, small_corpus):
    path = tmp_path / "data.jsonl"
    save_dataset(small_corpus, path)
    back = load_dataset(path)
    assert len(back) == len(small_corpus)
    for a, b in zip(small_corpus, back):
        assert a.to_json_dict() == b.to_json_dict()


def test_load_rejects_duplicates_and_bad_json(tmp_path):
    rec = make_molecule("dup", seed=0)
    path = tmp_path / "bad.jsonl"
    line = json.dumps(rec.to_json_dict())
    path.write_text(line + "\n" + line + "\n")
    with pytest.raises(DatasetError, match="duplicate"):
        load_dataset(path)
    path.write_text("{not json\n")
    with pytest.raises(DatasetError, match="invalid JSON"):
        load_dataset(path)


def test_build_graph_edges_symmetric_and_within_cutoff(molecule):
    g = build_graph(molecule, 0, r_cut=4.0)
    pairs = set(zip(g.src.tolist(), g.dst.tolist()))
    assert all((j, i) in pairs for i, j in pairs)
    assert all(i != j for i, j in pairs)
    bonded = {(b.i, b.j) for b in molecule.bonds} | {(b.j, b.i) for b in molecule.bonds}
    for k in range(g.n_edges):
        e = (int(g.src[k]), int(g.dst[k]))
        assert g.dist[k] < 4.0 or e in bonded


def test_build_graph_bonds_kept_beyond_cutoff(molecule):
    g = build_graph(molecule, 0, r_cut=0.5)  # below any bond length
    pairs = set(zip(g.src.tolist(), g.dst.tolist()))
    for b in molecule.bonds:
        assert (b.i, b.j) in pairs and (b.j, b.i) in pairs


def test_build_graph_unit_vectors(molecule):
    g = build_graph(molecule, 0)
    np.testing.assert_allclose(np.linalg.norm(g.unit_vec, axis=1), 1.0, atol=1e-12)
    pos = molecule.conformers[0]
    k = 0
    expect = (pos[g.dst[k]] - pos[g.src[k]]) / g.dist[k]
    np.testing.assert_allclose(g.unit_vec[k], expect, atol=1e-12)


def test_build_graph_degenerate_geometry():
    atoms = [Atom(0, 6, 1), Atom(1, 6, 1)]
    rec = MoleculeRecord("deg", "mono", atoms, [Bond(0, 1)],
                         [np.zeros((2, 3))], [ShiftLabel(0, "C", 70.0)])
    with pytest.raises(DegenerateGeometryError):
        build_graph(rec, 0)


def test_build_graph_conformer_index_range(molecule):
    with pytest.raises(IndexError):
        build_graph(molecule, 5)


def test_graph_translation_invariant(molecule):
    g1 = build_graph(molecule, 0)
    shifted = MoleculeRecord(
        molecule.id, molecule.saccharide_class, molecule.atoms, molecule.bonds,
        [molecule.conformers[0] + np.array([10.0, -4.0, 2.0])], molecule.labels,
    )
    g2 = build_graph(shifted, 0)
    np.testing.assert_array_equal(g1.src, g2.src)
    np.testing.assert_allclose(g1.dist, g2.dist, atol=1e-9)
    np.testing.assert_allclose(g1.unit_vec, g2.unit_vec, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_stratified_kfold_properties(seed, k):
    records = make_corpus(6, classes=("mono", "di"), n_conformers=1, seed=1)
    splits = stratified_kfold(records, k=k, seed=seed)
    assert len(splits) == k
    all_ids = sorted(r.id for r in records)
    seen = []
    for train, test in splits:
        assert sorted(train + test) == all_ids
        assert not set(train) & set(test)
        seen.extend(test)
        for cls in ("mono", "di"):
            n_cls = sum(1 for t in test if t.startswith(cls))
            assert abs(n_cls - 6 / k) < 1  # near-equal per class
    assert sorted(seen) == all_ids  # each record tested exactly once


def test_stratified_kfold_deterministic_and_seed_sensitive():
    records = make_corpus(5, classes=("mono",), n_conformers=1, seed=2)
    a = stratified_kfold(records, k=5, seed=7)
    b = stratified_kfold(records, k=5, seed=7)
    c = stratified_kfold(records, k=5, seed=8)
    assert a == b
    assert a != c


def test_stratified_kfold_small_class_error():
    records = make_corpus(3, classes=("mono",), n_conformers=1, seed=3)
    with pytest.raises(ValueError, match="fewer than k"):
        stratified_kfold(records, k=10)


def test_splits_file_round_trip(tmp_path):
    records = make_corpus(4, classes=("mono", "di"), n_conformers=1, seed=4)
    splits = stratified_kfold(records, k=2, seed=0)
    path = tmp_path / "splits.json"
    save_splits(splits, 0, path)
    assert load_splits(path) == [(list(tr), list(te)) for tr, te in splits]
