"""Loss, reverse-mode gradients, Adam, learning-rate schedules and the
conformer-ensemble dataset expansion.

Training modes follow the two published protocols:

* single-conformer mode (``n_conformers_train == 1``): plateau schedule with
  a stratified 5% validation split, lr x0.1 after 20 non-improving epochs,
  stop when lr < 1e-7 or after ``max_epochs``;
* ensemble mode: every (molecule, conformer) pair becomes one training item
  ("single large training dataset"), 3 epochs, lr 3e-4 x0.1 per epoch.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .model import GeqShiftModel, ModelConfig, Standardization
from .molgraph import MolGraph, build_graph

log = logging.getLogger(__name__)

__all__ = [
    "TrainConfig",
    "TrainItem",
    "AdamState",
    "NumericalAbort",
    "expand_dataset",
    "pack_batch",
    "mae_loss",
    "gradients",
    "adam_step",
    "plateau_lr",
    "PlateauTracker",
    "step_schedule",
    "train",
]


class NumericalAbort(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    n_conformers_train: int = 100
    # plateau schedule (single-conformer mode)
    patience: int = 20
    factor: float = 0.1
    val_frac: float = 0.05
    min_lr: float = 1e-7
    max_epochs: int = 500
    # step schedule (ensemble mode)
    step_epochs: int = 3
    clip_norm: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.batch_size <= 0 or self.lr <= 0:
            raise ValueError("batch_size and lr must be positive")
        if not 0.0 < self.val_frac < 0.5:
            raise ValueError("val_frac must lie in (0, 0.5)")

    @property
    def schedule(self) -> str:
        return "plateau" if self.n_conformers_train == 1 else "step"


@dataclass
class TrainItem:
    record_id: str
    conformer_index: int
    graph: MolGraph
    targets: np.ndarray  # (n_atoms, n_nuclei), standardized ppm
    mask: np.ndarray  # (n_atoms, n_nuclei) bool

    def __post_init__(self):
        if not self.mask.any():
            raise ValueError(f"item {self.record_id}: no labeled targets")


def _item_targets(record, config: ModelConfig, standardization: Standardization):
    n = record.n_atoms
    targets = np.zeros((n, len(config.nuclei)))
    mask = np.zeros((n, len(config.nuclei)), dtype=bool)
    col = {nuc: c for c, nuc in enumerate(config.nuclei)}
    for lab in record.labels:
        if lab.nucleus in col:
            c = col[lab.nucleus]
            targets[lab.atom_index, c] = standardization.standardize(
                lab.nucleus, lab.shift_ppm
            )
            mask[lab.atom_index, c] = True
    return targets, mask


def expand_dataset(records, n_conformers, config: ModelConfig, standardization: Standardization):
    """One TrainItem per (molecule, conformer) pair, first
    min(n_conformers, available) conformers of each record."""
    items = []
    for rec in records:
        if not rec.conformers:
            raise ValueError(f"record {rec.id}: no conformers")
        avail = len(rec.conformers)
        if avail < n_conformers:
            log.warning(
                "record %s: only %d of %d requested conformers", rec.id, avail, n_conformers
            )
        targets, mask = _item_targets(rec, config, standardization)
        if not mask.any():
            raise ValueError(f"record {rec.id}: no labels for nuclei {config.nuclei}")
        for ci in range(min(n_conformers, avail)):
            items.append(
                TrainItem(rec.id, ci, build_graph(rec, ci, config.r_cut), targets, mask)
            )
    return items


def pack_batch(items):
    """Disjoint-union graph over the batch with per-item node offsets."""
    atoms, src, dst, dist, vec, code = [], [], [], [], [], []
    targets, mask = [], []
    offset = 0
    for item in items:
        g = item.graph
        atoms.extend(g.atoms)
        src.append(g.src + offset)
        dst.append(g.dst + offset)
        dist.append(g.dist)
        vec.append(g.unit_vec)
        code.append(g.bond_code)
        targets.append(item.targets)
        mask.append(item.mask)
        offset += g.n_nodes
    graph = MolGraph(
        record_id="|".join(i.record_id for i in items),
        atoms=atoms,
        src=np.concatenate(src),
        dst=np.concatenate(dst),
        dist=np.concatenate(dist),
        unit_vec=np.concatenate(vec),
        bond_code=np.concatenate(code),
    )
    return graph, np.concatenate(targets), np.concatenate(mask)


def mae_loss(pred: Tensor, target: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean absolute error over masked (node, nucleus) entries."""
    n = int(mask.sum())
    if n == 0:
        raise ValueError("mask selects no entries")
    diff = (pred - Tensor(target)) * mask.astype(np.float64)
    return diff.abs().sum() * (1.0 / n)


def gradients(params: dict, model: GeqShiftModel, graph, targets, mask):
    """Reverse-mode gradients of the batch MAE w.r.t. every parameter array.

    Returns (loss_value, {name: gradient}); parameters that do not influence
    the loss get zero gradients.
    """
    p = {k: Tensor(v, requires_grad=True) for k, v in params.items()}
    pred = model.forward(p, graph)
    loss = mae_loss(pred, targets, mask)
    loss.backward()
    grads = {}
    for k, t in p.items():
        g = t.grad if t.grad is not None else np.zeros_like(t.data)
        if not np.isfinite(g).all():
            raise NumericalAbort(f"non-finite gradient in parameter {k!r}")
        grads[k] = g
    return float(loss.data), grads


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int
    lr: float

    @classmethod
    def fresh(cls, params: dict, lr: float):
        return cls(
            m={k: np.zeros_like(a) for k, a in params.items()},
            v={k: np.zeros_like(a) for k, a in params.items()},
            step=0,
            lr=lr,
        )


def adam_step(params, grads, state: AdamState, beta1=0.9, beta2=0.999, eps=1e-8,
              clip_norm=None):
    """Standard Adam with bias correction; updates params/state in place."""
    if set(params) != set(grads):
        raise ValueError("parameter and gradient key sets differ")
    if clip_norm is not None:
        total = np.sqrt(sum(float((g**2).sum()) for g in grads.values()))
        if total > clip_norm:
            scale = clip_norm / total
            grads = {k: g * scale for k, g in grads.items()}
    state.step += 1
    t = state.step
    for k in sorted(params):
        g = grads[k]
        state.m[k] = beta1 * state.m[k] + (1 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1 - beta2) * g * g
        mhat = state.m[k] / (1 - beta1**t)
        vhat = state.v[k] / (1 - beta2**t)
        params[k] = params[k] - state.lr * mhat / (np.sqrt(vhat) + eps)
    return params, state


def plateau_lr(history, lr0: float, patience: int = 20, factor: float = 0.1) -> float:
    """Learning rate after observing the given validation-MAE history."""
    lr, best, since = lr0, np.inf, 0
    for v in history:
        if v < best:
            best, since = v, 0
        else:
            since += 1
            if since >= patience:
                lr *= factor
                since = 0
    return lr


class PlateauTracker:
    """Stateful counterpart of ``plateau_lr`` for the training loop."""

    def __init__(self, lr0, patience=20, factor=0.1):
        self.lr = lr0
        self.patience = patience
        self.factor = factor
        self.best = np.inf
        self.since = 0

    def update(self, val_mae: float) -> float:
        if val_mae < self.best:
            self.best, self.since = val_mae, 0
        else:
            self.since += 1
            if self.since >= self.patience:
                self.lr *= self.factor
                self.since = 0
        return self.lr


def step_schedule(epoch: int, lr0: float = 3e-4, factor: float = 0.1, total_epochs: int = 3) -> float:
    if epoch >= total_epochs:
        raise ValueError(f"epoch {epoch} out of range; training runs {total_epochs} epochs")
    return lr0 * factor**epoch


def _stratified_val_split(records, val_frac, rng):
    by_class = {}
    for rec in records:
        by_class.setdefault(rec.saccharide_class, []).append(rec)
    val_ids = set()
    for cls in sorted(by_class):
        recs = sorted(by_class[cls], key=lambda r: r.id)
        n_val = max(1, round(val_frac * len(recs)))
        picks = rng.choice(len(recs), size=n_val, replace=False)
        val_ids.update(recs[i].id for i in picks)
    train = [r for r in records if r.id not in val_ids]
    val = [r for r in records if r.id in val_ids]
    return train, val


def _validation_mae(model, params, val_items):
    errs = []
    for item in val_items:
        pred = model.forward(params, item.graph).data
        errs.append(np.abs(pred - item.targets)[item.mask])
    allerr = np.concatenate(errs)
    return float(allerr.mean())


def train(train_records, train_config: TrainConfig, model_config: ModelConfig,
          log_path=None):
    """Train one model; returns (params, standardization, log_rows).

    Log rows are dicts with keys epoch, step, lr, train_loss, val_mae_C,
    val_mae_H (validation columns empty in ensemble mode).
    """
    tc, mc = train_config, model_config
    rng = np.random.default_rng(tc.seed)
    standardization = Standardization.from_labels(train_records, mc.nuclei)
    model = GeqShiftModel(mc)
    params = model.init_params(mc.seed)

    val_items = []
    if tc.schedule == "plateau":
        fit_records, val_records = _stratified_val_split(train_records, tc.val_frac, rng)
        val_items = expand_dataset(val_records, 1, mc, standardization)
    else:
        fit_records = train_records
    items = expand_dataset(fit_records, tc.n_conformers_train, mc, standardization)

    state = AdamState.fresh(params, tc.lr)
    tracker = PlateauTracker(tc.lr, tc.patience, tc.factor)
    rows = []
    step = 0
    n_epochs = tc.step_epochs if tc.schedule == "step" else tc.max_epochs
    for epoch in range(n_epochs):
        if tc.schedule == "step":
            state.lr = step_schedule(epoch, tc.lr, tc.factor, tc.step_epochs)
        order = rng.permutation(len(items))
        epoch_losses = []
        for start in range(0, len(items), tc.batch_size):
            batch = [items[i] for i in order[start : start + tc.batch_size]]
            graph, targets, mask = pack_batch(batch)
            loss, grads = gradients(params, model, graph, targets, mask)
            params, state = adam_step(
                params, grads, state, tc.beta1, tc.beta2, tc.eps, tc.clip_norm
            )
            epoch_losses.append(loss)
            step += 1
        row = {
            "epoch": epoch,
            "step": step,
            "lr": state.lr,
            "train_loss": float(np.mean(epoch_losses)),
            "val_mae_C": "",
            "val_mae_H": "",
        }
        if tc.schedule == "plateau":
            val_mae = _validation_mae(model, params, val_items)
            state.lr = tracker.update(val_mae)
            for c, nuc in enumerate(mc.nuclei):
                errs = [
                    np.abs(
                        standardization.destandardize(
                            nuc, model.forward(params, it.graph).data[:, c]
                        )
                        - standardization.destandardize(nuc, it.targets[:, c])
                    )[it.mask[:, c]]
                    for it in val_items
                ]
                errs = np.concatenate([e for e in errs if e.size])
                row[f"val_mae_{nuc}"] = float(errs.mean()) if errs.size else ""
        rows.append(row)
        log.info(
            "epoch %d: loss %.4f lr %.2e", epoch, row["train_loss"], state.lr
        )
        if tc.schedule == "plateau" and state.lr < tc.min_lr:
            break
    if log_path is not None:
        write_log(rows, log_path)
    return params, standardization, rows


def write_log(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["epoch", "step", "lr", "train_loss", "val_mae_C", "val_mae_H"]
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
