"""Shared synthetic-molecule factories for the test suite."""

import numpy as np
import pytest

from geqshift.molgraph import Atom, Bond, MoleculeRecord, ShiftLabel


def make_molecule(mol_id="mol", n_atoms=8, n_conformers=1, saccharide_class="mono",
                  seed=0, step=1.5, jitter=0.08, elements=(6, 6, 6, 8, 7)):
    """Random heavy-atom chain with smooth environment-dependent labels."""
    rng = np.random.default_rng(seed)
    zs = rng.choice(elements, size=n_atoms)
    hs = rng.integers(0, 3, size=n_atoms)
    atoms = [Atom(i, int(z), int(h)) for i, (z, h) in enumerate(zip(zs, hs))]
    bonds = [Bond(i, i + 1, "single") for i in range(n_atoms - 1)]
    base = np.zeros((n_atoms, 3))
    for i in range(1, n_atoms):
        d = rng.normal(size=3)
        base[i] = base[i - 1] + step * d / np.linalg.norm(d)
    conformers = [base + jitter * rng.normal(size=base.shape) for _ in range(n_conformers)]
    hetero = np.array(
        [sum(1 for j in (i - 1, i + 1) if 0 <= j < n_atoms and zs[j] != 6)
         for i in range(n_atoms)]
    )
    labels = []
    for i in range(n_atoms):
        if zs[i] == 6:
            shift = 60.0 + 12.0 * hetero[i] + 4.0 * hs[i] + rng.normal(0, 0.5)
            labels.append(ShiftLabel(i, "C", float(np.clip(shift, 0, 250))))
        if hs[i] > 0:
            shift = 3.5 + 0.6 * hetero[i] - 0.2 * hs[i] + rng.normal(0, 0.05)
            labels.append(ShiftLabel(i, "H", float(np.clip(shift, 0, 15)), int(hs[i])))
    return MoleculeRecord(mol_id, saccharide_class, atoms, bonds, conformers, labels)


def make_corpus(n_per_class, classes=("mono", "di", "tri"), n_conformers=2, seed=0,
                n_atoms_range=(5, 10)):
    rng = np.random.default_rng(seed)
    records = []
    for cls in classes:
        for k in range(n_per_class):
            n = int(rng.integers(*n_atoms_range))
            records.append(
                make_molecule(f"{cls}_{k:03d}", n, n_conformers, cls,
                              seed=int(rng.integers(1 << 31)))
            )
    return records


@pytest.fixture
def molecule():
    return make_molecule(seed=3)


@pytest.fixture
def small_corpus():
    return make_corpus(4, classes=("mono", "di"), n_conformers=2, seed=1)
