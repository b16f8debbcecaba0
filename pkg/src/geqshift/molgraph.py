"""Molecular data model, dataset JSONL I/O, conformer graph construction and
stratified fold splitting.

Dataset format (UTF-8 JSON-Lines, one record per line)::

    {"id": str, "class": "mono"|"di"|"tri"|"poly", "smiles": str|null,
     "atoms": [{"z": int, "h": int}], "bonds": [[i, j, order]],
     "conformers": [[[x, y, z], ...]], "labels":
     [{"atom": int, "nucleus": "C"|"H", "shift": float, "n_eq": int}]}

Coordinates are in Angstrom, shifts in ppm. Hydrogens are not nodes: each
atom carries its attached-proton count, and H labels are stored pre-averaged
on the parent heavy atom with ``n_eq`` recording the proton count.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "Atom",
    "Bond",
    "ShiftLabel",
    "MoleculeRecord",
    "MolGraph",
    "DatasetError",
    "DegenerateGeometryError",
    "load_dataset",
    "save_dataset",
    "build_graph",
    "stratified_kfold",
    "save_splits",
    "load_splits",
]

SACCHARIDE_CLASSES = ("mono", "di", "tri", "poly")
BOND_ORDERS = ("none", "single", "double")
NUCLEI = ("C", "H")

# shift plausibility windows, ppm
SHIFT_RANGE = {"C": (0.0, 250.0), "H": (0.0, 15.0)}


class DatasetError(ValueError):
    pass


class DegenerateGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Atom:
    index: int
    element: int  # atomic number
    n_hydrogens: int

    def __post_init__(self):
        if not 0 <= self.n_hydrogens <= 4:
            raise DatasetError(
                f"atom {self.index}: hydrogen count {self.n_hydrogens} outside [0, 4]"
            )
        if self.element < 1:
            raise DatasetError(f"atom {self.index}: invalid atomic number {self.element}")


@dataclass(frozen=True)
class Bond:
    i: int
    j: int
    order: str = "single"

    def __post_init__(self):
        if self.i == self.j:
            raise DatasetError(f"self-bond on atom {self.i}")
        if self.order not in BOND_ORDERS:
            raise DatasetError(f"unknown bond order {self.order!r}")


@dataclass(frozen=True)
class ShiftLabel:
    atom_index: int
    nucleus: str  # "C" or "H"
    shift_ppm: float
    n_equivalent: int = 1

    def __post_init__(self):
        if self.nucleus not in NUCLEI:
            raise DatasetError(f"unknown nucleus {self.nucleus!r}")
        lo, hi = SHIFT_RANGE[self.nucleus]
        if not lo <= self.shift_ppm <= hi:
            raise DatasetError(
                f"{self.nucleus} shift {self.shift_ppm} ppm outside [{lo}, {hi}]"
            )
        if self.n_equivalent < 1:
            raise DatasetError("n_equivalent must be >= 1")


@dataclass
class MoleculeRecord:
    id: str
    saccharide_class: str
    atoms: list
    bonds: list
    conformers: list  # list of (N, 3) float arrays
    labels: list
    smiles: str | None = None

    def __post_init__(self):
        if self.saccharide_class not in SACCHARIDE_CLASSES:
            raise DatasetError(
                f"record {self.id}: unknown class {self.saccharide_class!r}"
            )
        n = len(self.atoms)
        if n == 0:
            raise DatasetError(f"record {self.id}: no atoms")
        if not self.conformers:
            raise DatasetError(f"record {self.id}: at least one conformer required")
        self.conformers = [np.asarray(c, dtype=np.float64) for c in self.conformers]
        for k, c in enumerate(self.conformers):
            if c.shape != (n, 3):
                raise DatasetError(
                    f"record {self.id}: conformer {k} has shape {c.shape}, "
                    f"expected ({n}, 3)"
                )
        for b in self.bonds:
            if not (0 <= b.i < n and 0 <= b.j < n):
                raise DatasetError(f"record {self.id}: bond ({b.i},{b.j}) out of range")
        for lab in self.labels:
            if not 0 <= lab.atom_index < n:
                raise DatasetError(
                    f"record {self.id}: label atom {lab.atom_index} out of range"
                )

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "class": self.saccharide_class,
            "smiles": self.smiles,
            "atoms": [{"z": a.element, "h": a.n_hydrogens} for a in self.atoms],
            "bonds": [[b.i, b.j, b.order] for b in self.bonds],
            "conformers": [c.tolist() for c in self.conformers],
            "labels": [
                {
                    "atom": lab.atom_index,
                    "nucleus": lab.nucleus,
                    "shift": lab.shift_ppm,
                    "n_eq": lab.n_equivalent,
                }
                for lab in self.labels
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MoleculeRecord":
        try:
            atoms = [
                Atom(index=i, element=int(a["z"]), n_hydrogens=int(a["h"]))
                for i, a in enumerate(d["atoms"])
            ]
            bonds = [Bond(int(i), int(j), str(order)) for i, j, order in d["bonds"]]
            labels = [
                ShiftLabel(
                    atom_index=int(v["atom"]),
                    nucleus=str(v["nucleus"]),
                    shift_ppm=float(v["shift"]),
                    n_equivalent=int(v.get("n_eq", 1)),
                )
                for v in d["labels"]
            ]
            return cls(
                id=str(d["id"]),
                saccharide_class=str(d["class"]),
                atoms=atoms,
                bonds=bonds,
                conformers=d["conformers"],
                labels=labels,
                smiles=d.get("smiles"),
            )
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"record {d.get('id', '?')}: {exc}") from exc


def load_dataset(path) -> list:
    """Read and validate a JSONL dataset; reports total label counts."""
    records, ids = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            rec = MoleculeRecord.from_json_dict(d)
            if rec.id in ids:
                raise DatasetError(f"{path}:{lineno}: duplicate record id {rec.id!r}")
            ids.add(rec.id)
            records.append(rec)
    n_c = sum(1 for r in records for lab in r.labels if lab.nucleus == "C")
    n_h = sum(1 for r in records for lab in r.labels if lab.nucleus == "H")
    if not records:
        log.warning("dataset %s is empty", path)
    else:
        log.info("loaded %d records, %d C13 + %d H1 labels", len(records), n_c, n_h)
    return records


def save_dataset(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict(), sort_keys=True) + "\n")


@dataclass
class MolGraph:
    """One conformer's realized graph: directed edges with geometry."""

    record_id: str
    atoms: list
    src: np.ndarray  # (E,)
    dst: np.ndarray  # (E,)
    dist: np.ndarray  # (E,)
    unit_vec: np.ndarray  # (E, 3), points from src to dst
    bond_code: np.ndarray  # (E,) index into BOND_ORDERS

    @property
    def n_nodes(self) -> int:
        return len(self.atoms)

    @property
    def n_edges(self) -> int:
        return len(self.src)


def build_graph(record: MoleculeRecord, conformer_index: int, r_cut: float = 6.0) -> MolGraph:
    """Edges between all heavy-atom pairs closer than ``r_cut``, plus bonded
    pairs regardless of distance; both directions stored."""
    if not 0 <= conformer_index < len(record.conformers):
        raise IndexError(
            f"record {record.id}: conformer {conformer_index} out of range"
        )
    if r_cut <= 0:
        raise ValueError("r_cut must be positive")
    pos = record.conformers[conformer_index]
    n = record.n_atoms
    diff = pos[None, :, :] - pos[:, None, :]  # diff[i, j] = r_j - r_i
    dist = np.linalg.norm(diff, axis=-1)
    bond_of = {}
    for b in record.bonds:
        code = BOND_ORDERS.index(b.order)
        bond_of[(b.i, b.j)] = code
        bond_of[(b.j, b.i)] = code
    within = dist < r_cut
    np.fill_diagonal(within, False)
    src_list, dst_list = np.nonzero(within)
    pairs = set(zip(src_list.tolist(), dst_list.tolist()))
    pairs.update(bond_of.keys())
    ordered = np.array(sorted(pairs), dtype=int).reshape(-1, 2)
    src, dst = ordered[:, 0], ordered[:, 1]
    d = dist[src, dst]
    if np.any(d < 1e-9):
        k = int(np.argmin(d))
        raise DegenerateGeometryError(
            f"record {record.id}: atoms {src[k]} and {dst[k]} coincide in "
            f"conformer {conformer_index}"
        )
    vec = diff[src, dst] / d[:, None]
    code = np.array([bond_of.get((i, j), 0) for i, j in zip(src, dst)], dtype=int)
    return MolGraph(
        record_id=record.id,
        atoms=record.atoms,
        src=src.astype(int),
        dst=dst.astype(int),
        dist=d,
        unit_vec=vec,
        bond_code=code,
    )


def stratified_kfold(records, k: int = 10, seed: int = 0):
    """Per-class near-equal partition into k folds; returns a list of
    (train_ids, test_ids) pairs, deterministic in ``seed``."""
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    by_class = {}
    for rec in records:
        by_class.setdefault(rec.saccharide_class, []).append(rec.id)
    test_sets = [[] for _ in range(k)]
    for cls in sorted(by_class):
        ids = sorted(by_class[cls])
        if len(ids) < k:
            raise ValueError(
                f"class {cls!r} has {len(ids)} records, fewer than k={k}"
            )
        perm = rng.permutation(len(ids))
        for pos, idx in enumerate(perm):
            test_sets[pos % k].append(ids[idx])
    all_ids = {rec.id for rec in records}
    splits = []
    for test in test_sets:
        test_sorted = sorted(test)
        train_sorted = sorted(all_ids.difference(test))
        splits.append((train_sorted, test_sorted))
    return splits


def save_splits(splits, seed: int, path):
    payload = {
        "seed": seed,
        "folds": [{"train": train, "test": test} for train, test in splits],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)


def load_splits(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return [(f["train"], f["test"]) for f in payload["folds"]]
