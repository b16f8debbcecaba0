"""Built-in verification suite: coupling-coefficient identities, spherical
harmonic oracles, end-to-end E(3) equivariance and finite-difference gradient
checks on a reduced model. Designed to finish in well under five minutes on
a laptop CPU.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .model import GeqShiftModel, ModelConfig
from .molgraph import Atom, Bond, MoleculeRecord, ShiftLabel, build_graph
from .so3 import (
    clebsch_gordan,
    random_rotation,
    real_spherical_harmonics,
    wigner_d,
)
from .training import gradients, mae_loss

__all__ = ["run_selfcheck", "CHECKS"]


def _check_cg_orthonormal():
    worst = 0.0
    for l1 in range(3):
        for l2 in range(3):
            for l3 in range(abs(l1 - l2), min(l1 + l2, 3) + 1):
                c = clebsch_gordan(l1, l2, l3).reshape(-1, 2 * l3 + 1)
                gram = c.T @ c
                worst = max(worst, float(np.abs(gram - gram[0, 0] * np.eye(2 * l3 + 1)).max()))
    return worst, 1e-12


def _check_cg_equivariance():
    rng = np.random.default_rng(7)
    worst = 0.0
    for l1, l2, l3 in [(1, 1, 0), (1, 1, 1), (1, 1, 2), (2, 1, 1), (2, 2, 2), (2, 1, 2)]:
        c = clebsch_gordan(l1, l2, l3)
        for _ in range(4):
            rot = random_rotation(rng)
            d1, d2, d3 = wigner_d(l1, rot), wigner_d(l2, rot), wigner_d(l3, rot)
            lhs = np.einsum("ia,jb,ijk->abk", d1, d2, c)
            rhs = np.einsum("abm,km->abk", c, d3)
            worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst, 1e-12


def _check_cg_structure():
    # the (1,1,0) coupling is the normalized dot product, (1,1,1) the cross
    rng = np.random.default_rng(11)
    u, v = rng.normal(size=3), rng.normal(size=3)
    c110 = clebsch_gordan(1, 1, 0)
    dot = float(np.einsum("i,j,ijk->k", u, v, c110)[0]) * np.sqrt(3.0)
    err = abs(abs(dot) - abs(float(u @ v)))
    c111 = clebsch_gordan(1, 1, 1)
    cross = np.einsum("i,j,ijk->k", u, v, c111) * np.sqrt(2.0)
    # basis order (y, z, x)
    ref = np.cross(u[[2, 0, 1]], v[[2, 0, 1]])[[1, 2, 0]]
    err = max(err, float(np.abs(np.abs(cross) - np.abs(ref)).max()))
    return err, 1e-12


def _check_sh_oracle():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(16):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        x, y, z = n
        sh = real_spherical_harmonics(2, n).data
        expect = np.array(
            [
                1.0,
                np.sqrt(3.0) * y,
                np.sqrt(3.0) * z,
                np.sqrt(3.0) * x,
                np.sqrt(15.0) * x * y,
                np.sqrt(15.0) * y * z,
                np.sqrt(5.0) / 2.0 * (3.0 * z * z - 1.0),
                np.sqrt(15.0) * x * z,
                np.sqrt(15.0) / 2.0 * (x * x - y * y),
            ]
        )
        worst = max(worst, float(np.abs(sh - expect).max()))
    return worst, 1e-12


def _check_sh_equivariance():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(6):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        rot = random_rotation(rng)
        sh = real_spherical_harmonics(2, n).data
        sh_rot = real_spherical_harmonics(2, rot @ n).data
        for l, sl in [(0, slice(0, 1)), (1, slice(1, 4)), (2, slice(4, 9))]:
            expect = wigner_d(l, rot) @ sh[sl]
            worst = max(worst, float(np.abs(sh_rot[sl] - expect).max()))
    return worst, 1e-12


def _tiny_molecule(seed=0, n_atoms=6):
    rng = np.random.default_rng(seed)
    atoms = [Atom(i, int(rng.choice([6, 7, 8])), int(rng.integers(0, 3))) for i in range(n_atoms)]
    bonds = [Bond(i, i + 1, "single") for i in range(n_atoms - 1)]
    pos = np.zeros((n_atoms, 3))
    for i in range(1, n_atoms):
        step = rng.normal(size=3)
        pos[i] = pos[i - 1] + 1.5 * step / np.linalg.norm(step)
    labels = [ShiftLabel(i, "C", float(rng.uniform(10, 110)))
              for i in range(n_atoms) if atoms[i].element == 6]
    labels += [ShiftLabel(i, "H", float(rng.uniform(1, 9)))
               for i in range(n_atoms) if atoms[i].n_hydrogens > 0]
    return MoleculeRecord(f"selfcheck{seed}", "mono", atoms, bonds, [pos], labels)


def _small_config():
    return ModelConfig(
        n_layers=2, hidden_sig="8x0e+4x1o+2x2e", node_emb_dim=16, edge_emb_dim=8,
        readout_scalar_dim=16, readout_hidden=32, weight_nn_hidden=16, seed=0,
    )


def _check_model_equivariance():
    config = _small_config()
    model = GeqShiftModel(config)
    params = model.init_params(0)
    rng = np.random.default_rng(13)
    worst = 0.0
    for seed in range(3):
        rec = _tiny_molecule(seed)
        base = model.forward(params, build_graph(rec, 0, config.r_cut)).data
        pos = rec.conformers[0]
        for inversion in (1.0, -1.0):
            rot = random_rotation(rng) * inversion
            shift = rng.normal(size=3)
            moved = MoleculeRecord(
                rec.id, rec.saccharide_class, rec.atoms, rec.bonds,
                [pos @ rot.T + shift], rec.labels,
            )
            out = model.forward(params, build_graph(moved, 0, config.r_cut)).data
            worst = max(worst, float(np.abs(out - base).max()))
    return worst, 1e-8


def _check_gradients():
    config = _small_config()
    model = GeqShiftModel(config)
    params = model.init_params(1)
    rec = _tiny_molecule(2)
    graph = build_graph(rec, 0, config.r_cut)
    rng = np.random.default_rng(17)
    targets = rng.normal(size=(rec.n_atoms, 2))
    mask = np.ones_like(targets, dtype=bool)
    _, grads = gradients(params, model, graph, targets, mask)

    def loss_at(p):
        pred = model.forward(p, graph)
        return float(mae_loss(pred, targets, mask).data)

    h = 1e-5
    worst = 0.0
    keys = sorted(params)
    for key in keys[:: max(1, len(keys) // 8)]:
        flat = params[key].ravel()
        for idx in rng.choice(flat.size, size=min(3, flat.size), replace=False):
            orig = flat[idx]
            flat[idx] = orig + h
            up = loss_at(params)
            flat[idx] = orig - h
            dn = loss_at(params)
            flat[idx] = orig
            fd = (up - dn) / (2 * h)
            ad = grads[key].ravel()[idx]
            scale = max(abs(fd), abs(ad), 1e-6)
            worst = max(worst, abs(fd - ad) / scale)
    return worst, 1e-4


CHECKS = [
    ("coupling coefficients orthonormal", _check_cg_orthonormal),
    ("coupling coefficients rotation-equivariant", _check_cg_equivariance),
    ("coupling coefficients dot/cross structure", _check_cg_structure),
    ("spherical harmonics match explicit polynomials", _check_sh_oracle),
    ("spherical harmonics rotation-equivariant", _check_sh_equivariance),
    ("model predictions E(3)-invariant", _check_model_equivariance),
    ("reverse-mode gradients match finite differences", _check_gradients),
]


def run_selfcheck(print_fn=print) -> bool:
    """Run all checks; prints one pass/fail line each, returns overall pass."""
    all_ok = True
    for name, fn in CHECKS:
        value, tol = fn()
        ok = value <= tol
        all_ok = all_ok and ok
        print_fn(f"[{'PASS' if ok else 'FAIL'}] {name}: {value:.3e} (tol {tol:.0e})")
    print_fn("selfcheck: " + ("all checks passed" if all_ok else "FAILURES detected"))
    return all_ok
