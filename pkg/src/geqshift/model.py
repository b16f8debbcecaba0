"""The GeqShift network: stacked E(3)-equivariant graph self-attention layers
with a scalar readout MLP, plus ensemble prediction and checkpoint I/O.

Per layer, for each directed edge (j -> i):

    q_i   = Linear(x_i)
    k_ij  = x_j  (x)_{NN_k(e_ij)}  Y(r_hat_ij)
    v_ij  = x_j  (x)_{NN_v(e_ij)}  Y(r_hat_ij)
    a_ij  = softmax_j( <q_i, k_ij> / sqrt(dim) )        (max-subtracted)
    x_i'  = sum_j a_ij * v_ij
    x_i   <- LN( NN(x_i') + x_i )

where NN is Linear -> gated SiLU -> Linear on geometric tensors. The literal
alternatives (aggregate the keys; build k/v from the destination node) are
kept behind the ``aggregate`` and ``qkv_source`` config switches.
"""

from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .autodiff import Tensor, concatenate, gather, segment_sum
from .irreps import GeometricTensor, Irreps, parse_irreps
from .molgraph import MolGraph, MoleculeRecord, build_graph, DegenerateGeometryError
from .nn import (
    ConfigurationError,
    EquivariantLayerNorm,
    Gate,
    Linear,
    ScalarMLP,
    WeightedTensorProduct,
)
from .so3 import real_spherical_harmonics

log = logging.getLogger(__name__)

__all__ = [
    "ModelConfig",
    "Standardization",
    "GeqShiftModel",
    "init_params",
    "save_checkpoint",
    "load_checkpoint",
    "predict_ensemble",
    "predict_multi_model",
    "CheckpointError",
]

CHECKPOINT_MAGIC = b"GQSC"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 7
    hidden_sig: str = "64x0e+32x1o+8x2e"
    node_emb_dim: int = 128
    edge_emb_dim: int = 32
    readout_scalar_dim: int = 128
    readout_hidden: int = 384
    r_cut: float = 6.0
    l_max: int = 2
    weight_nn_hidden: int = 64
    seed: int = 0
    elements: tuple = (6, 7, 8, 15, 16)  # C, N, O, P, S
    max_hydrogens: int = 4
    nucleus: str = "both"  # both | C | H
    aggregate: str = "values"  # values | keys (literal Eq. reading)
    qkv_source: str = "src"  # src | dst (literal reading uses dst)
    n_radial_basis: int = 0  # 0 = raw distance feature

    def __post_init__(self):
        if self.l_max not in (0, 1, 2):
            raise ConfigurationError(f"l_max must be 0, 1 or 2, got {self.l_max}")
        if self.node_emb_dim % 2:
            raise ConfigurationError("node_emb_dim must be even (two embeddings)")
        if self.nucleus not in ("both", "C", "H"):
            raise ConfigurationError(f"bad nucleus {self.nucleus!r}")
        if self.aggregate not in ("values", "keys"):
            raise ConfigurationError(f"bad aggregate {self.aggregate!r}")
        if self.qkv_source not in ("src", "dst"):
            raise ConfigurationError(f"bad qkv_source {self.qkv_source!r}")
        parse_irreps(self.hidden_sig)

    @property
    def nuclei(self) -> tuple:
        return ("C", "H") if self.nucleus == "both" else (self.nucleus,)

    @property
    def hidden_irreps(self) -> Irreps:
        """Hidden signature truncated at l_max; the invariant ablation keeps
        only the scalar channels."""
        full = parse_irreps(self.hidden_sig)
        return full.filter(lambda ir: ir.l <= self.l_max)

    @property
    def sh_irreps(self) -> Irreps:
        return Irreps([(1, (l, (-1) ** l)) for l in range(self.l_max + 1)])

    @property
    def edge_scalar_dim(self) -> int:
        extra = self.n_radial_basis if self.n_radial_basis > 0 else 1
        return self.edge_emb_dim - 1 + extra

    def to_dict(self) -> dict:
        d = asdict(self)
        d["elements"] = list(self.elements)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "elements" in d:
            d["elements"] = tuple(d["elements"])
        return cls(**d)


@dataclass(frozen=True)
class Standardization:
    """Per-nucleus z-score constants, computed from training labels only."""

    mean: dict
    std: dict

    def standardize(self, nucleus: str, x):
        return (np.asarray(x) - self.mean[nucleus]) / self.std[nucleus]

    def destandardize(self, nucleus: str, x):
        return np.asarray(x) * self.std[nucleus] + self.mean[nucleus]

    @classmethod
    def identity(cls, nuclei=("C", "H")):
        return cls(mean={n: 0.0 for n in nuclei}, std={n: 1.0 for n in nuclei})

    @classmethod
    def from_labels(cls, records, nuclei=("C", "H")):
        mean, std = {}, {}
        for nuc in nuclei:
            vals = np.array(
                [lab.shift_ppm for r in records for lab in r.labels if lab.nucleus == nuc]
            )
            mean[nuc] = float(vals.mean()) if vals.size else 0.0
            s = float(vals.std()) if vals.size else 1.0
            std[nuc] = s if s > 1e-12 else 1.0
        return cls(mean=mean, std=std)


class GeqShiftModel:
    """Module graph plus the deterministic parameter layout for a config."""

    def __init__(self, config: ModelConfig):
        self.config = config
        hidden = config.hidden_irreps
        sh = config.sh_irreps
        node0 = Irreps(f"{config.node_emb_dim}x0e")
        self.layer_inputs = [node0] + [hidden] * (config.n_layers - 1)
        self.hidden = hidden
        self.layers = []
        scalars = hidden.filter(lambda ir: ir.l == 0)
        gated = hidden.filter(lambda ir: ir.l > 0) if hidden.lmax > 0 else Irreps([])
        for i in range(config.n_layers):
            in_sig = self.layer_inputs[i]
            tp = WeightedTensorProduct(in_sig, sh, hidden)
            in_types = {ir for _, ir in in_sig}
            # queries can only carry irreps the layer input already has;
            # logits contract q against the matching slice of k
            q_sig = hidden.filter(lambda ir: ir in in_types)
            q_slices = [
                sl
                for (_, ir), sl in zip(hidden, hidden.slices())
                if ir in in_types
            ]
            layer = {
                "q": Linear(f"layer{i}.q", in_sig, q_sig, bias=False),
                "q_slices": q_slices,
                "tp": tp,
                "wk": ScalarMLP(
                    f"layer{i}.wk",
                    [config.edge_scalar_dim, config.weight_nn_hidden, tp.weight_numel],
                ),
                "wv": ScalarMLP(
                    f"layer{i}.wv",
                    [config.edge_scalar_dim, config.weight_nn_hidden, tp.weight_numel],
                ),
                "ln": EquivariantLayerNorm(f"layer{i}.ln", hidden),
            }
            if len(gated):
                gate = Gate(scalars, gated)
                layer["gate"] = gate
                layer["nn1"] = Linear(f"layer{i}.nn1", hidden, gate.irreps_in)
            else:
                layer["gate"] = None
                layer["nn1"] = Linear(f"layer{i}.nn1", hidden, hidden)
            layer["nn2"] = Linear(f"layer{i}.nn2", hidden, hidden)
            if in_sig != hidden:
                layer["shortcut"] = Linear(
                    f"layer{i}.shortcut", in_sig, hidden, strict=False
                )
            else:
                layer["shortcut"] = None
            self.layers.append(layer)
        self.readout_linear = Linear(
            "readout.linear", hidden, f"{config.readout_scalar_dim}x0e"
        )
        self.readout_mlp = ScalarMLP(
            "readout.mlp",
            [config.readout_scalar_dim, config.readout_hidden, len(config.nuclei)],
        )
        self._element_row = {z: i for i, z in enumerate(config.elements)}

    # -- parameters ----------------------------------------------------------

    def _modules(self):
        for i, layer in enumerate(self.layers):
            for key in ("q", "wk", "wv", "nn1", "nn2", "ln"):
                yield layer[key]
            if layer["shortcut"] is not None:
                yield layer["shortcut"]
        yield self.readout_linear
        yield self.readout_mlp

    def param_shapes(self) -> dict:
        cfg = self.config
        half = cfg.node_emb_dim // 2
        shapes = {
            "embed.element": (len(cfg.elements), half),
            "embed.hcount": (cfg.max_hydrogens + 1, half),
            "embed.bond": (3, cfg.edge_emb_dim - 1),
        }
        for mod in self._modules():
            shapes.update(mod.param_shapes())
        return shapes

    def init_params(self, seed: int | None = None) -> dict:
        cfg = self.config
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        half = cfg.node_emb_dim // 2
        params = {
            "embed.element": rng.normal(size=(len(cfg.elements), half)),
            "embed.hcount": rng.normal(size=(cfg.max_hydrogens + 1, half)),
            "embed.bond": rng.normal(size=(3, cfg.edge_emb_dim - 1)),
        }
        for mod in self._modules():
            params.update(mod.init(rng))
        return params

    def validate_params(self, params: dict):
        shapes = self.param_shapes()
        missing = sorted(set(shapes) - set(params))
        extra = sorted(set(params) - set(shapes))
        if missing or extra:
            raise CheckpointError(
                f"parameter keys do not match config (missing={missing}, extra={extra})"
            )
        for k, shape in shapes.items():
            if tuple(params[k].shape) != tuple(shape):
                raise CheckpointError(
                    f"parameter {k}: shape {params[k].shape}, expected {shape}"
                )

    # -- features ------------------------------------------------------------

    def node_features(self, params: dict, graph: MolGraph) -> Tensor:
        z_rows, h_rows = [], []
        for atom in graph.atoms:
            if atom.element not in self._element_row:
                raise ConfigurationError(
                    f"element Z={atom.element} not in model vocabulary "
                    f"{self.config.elements}"
                )
            if atom.n_hydrogens > self.config.max_hydrogens:
                raise ConfigurationError(
                    f"hydrogen count {atom.n_hydrogens} exceeds vocabulary"
                )
            z_rows.append(self._element_row[atom.element])
            h_rows.append(atom.n_hydrogens)
        emb_z = gather(params["embed.element"], np.array(z_rows, dtype=int))
        emb_h = gather(params["embed.hcount"], np.array(h_rows, dtype=int))
        return concatenate([emb_z, emb_h], axis=-1)

    def edge_scalars(self, params: dict, graph: MolGraph) -> Tensor:
        cfg = self.config
        emb = gather(params["embed.bond"], graph.bond_code)
        if cfg.n_radial_basis > 0:
            centers = np.linspace(0.0, cfg.r_cut, cfg.n_radial_basis)
            width = cfg.r_cut / cfg.n_radial_basis
            radial = np.exp(-((graph.dist[:, None] - centers[None, :]) ** 2) / width**2)
            return concatenate([emb, Tensor(radial)], axis=-1)
        return concatenate([emb, Tensor(graph.dist[:, None])], axis=-1)

    def edge_sh(self, graph: MolGraph) -> Tensor:
        sh = real_spherical_harmonics(self.config.l_max, graph.unit_vec)
        return Tensor(sh.data)

    # -- forward -------------------------------------------------------------

    def forward(self, params: dict, graph: MolGraph, return_features: bool = False):
        """Per-node predictions in standardized units, shape (N, n_nuclei).

        ``params`` values may be numpy arrays (wrapped as constants) or
        autodiff Tensors (for training).
        """
        p = {
            k: v if isinstance(v, Tensor) else Tensor(v) for k, v in params.items()
        }
        n = graph.n_nodes
        has_incoming = np.zeros(n, dtype=bool)
        has_incoming[graph.dst] = True
        if not has_incoming.all():
            log.warning(
                "record %s: %d isolated node(s), zero aggregate used",
                graph.record_id,
                int((~has_incoming).sum()),
            )
        x = self.node_features(p, graph)
        e_s = self.edge_scalars(p, graph)
        e_sh = self.edge_sh(graph)
        src_nodes = graph.src if self.config.qkv_source == "src" else graph.dst
        hidden_dim = self.hidden.dim
        features = []
        for layer in self.layers:
            q = layer["q"](p, x)
            x_sel = gather(x, src_nodes)
            wk = layer["wk"](p, e_s)
            wv = layer["wv"](p, e_s)
            k = layer["tp"](x_sel, e_sh, wk)
            k_match = concatenate(
                [k[(slice(None), sl)] for sl in layer["q_slices"]], axis=-1
            )
            logits = (gather(q, graph.dst) * k_match).sum(axis=1) * (
                1.0 / np.sqrt(hidden_dim)
            )
            # max-subtracted softmax over incoming edges per destination
            shift = np.full(n, -np.inf)
            np.maximum.at(shift, graph.dst, logits.data)
            z = (logits - shift[graph.dst]).exp()
            denom = gather(segment_sum(z, graph.dst, n), graph.dst)
            alpha = z / denom
            if self.config.aggregate == "values":
                msg = layer["tp"](x_sel, e_sh, wv)
            else:
                msg = k
            agg = segment_sum(msg * alpha.reshape(-1, 1), graph.dst, n)
            upd = layer["nn1"](p, agg)
            if layer["gate"] is not None:
                upd = layer["gate"](upd)
            else:
                upd = upd.silu()
            upd = layer["nn2"](p, upd)
            res = x if layer["shortcut"] is None else layer["shortcut"](p, x)
            x = layer["ln"](p, upd + res)
            if return_features:
                features.append(x.data.copy())
        scalars = self.readout_linear(p, x)
        out = self.readout_mlp(p, scalars)
        if return_features:
            return out, features
        return out


def init_params(config: ModelConfig, seed: int | None = None) -> dict:
    return GeqShiftModel(config).init_params(seed)


# -- checkpoint container ----------------------------------------------------


def save_checkpoint(path, config: ModelConfig, params: dict, standardization: Standardization):
    """Single-file container: JSON header + named little-endian f32 arrays.

    Written atomically (temp file + rename).
    """
    names = sorted(params)
    arrays, offset = [], 0
    for name in names:
        arr = np.ascontiguousarray(params[name], dtype="<f4")
        arrays.append((name, arr))
        offset += arr.nbytes
    header = {
        "format_version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "hidden_irreps": str(config.hidden_irreps),
        "standardization": {
            "mean": standardization.mean,
            "std": standardization.std,
        },
        "arrays": [],
    }
    off = 0
    for name, arr in arrays:
        header["arrays"].append(
            {"name": name, "shape": list(arr.shape), "offset": off, "nbytes": arr.nbytes}
        )
        off += arr.nbytes
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, arr in arrays:
            fh.write(arr.tobytes())
    os.replace(tmp, path)


def load_checkpoint(path):
    """Returns (config, params, standardization); params as float64 arrays."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("format_version") != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"{path}: unsupported format version {header.get('format_version')}"
            )
        config = ModelConfig.from_dict(header["config"])
        params = {}
        for meta in header["arrays"]:
            buf = fh.read(meta["nbytes"])
            arr = np.frombuffer(buf, dtype="<f4").reshape(meta["shape"])
            params[meta["name"]] = arr.astype(np.float64)
    std = Standardization(
        mean=dict(header["standardization"]["mean"]),
        std=dict(header["standardization"]["std"]),
    )
    GeqShiftModel(config).validate_params(params)
    return config, params, std


# -- prediction --------------------------------------------------------------


def predict_ensemble(
    record: MoleculeRecord,
    params: dict,
    config: ModelConfig,
    standardization: Standardization,
    conformer_subset=None,
    model: GeqShiftModel | None = None,
):
    """Ensemble prediction over conformers, in ppm.

    Returns a dict with ``mean`` and ``std`` of shape (n_atoms, n_nuclei),
    ``per_conformer`` of shape (n_used, n_atoms, n_nuclei) and the conformer
    indices used. ``std`` is the population standard deviation.
    """
    if model is None:
        model = GeqShiftModel(config)
    indices = (
        list(range(len(record.conformers)))
        if conformer_subset is None
        else list(conformer_subset)
    )
    if not indices:
        raise ValueError(f"record {record.id}: no conformers selected")
    preds, used = [], []
    for ci in indices:
        try:
            graph = build_graph(record, ci, config.r_cut)
        except DegenerateGeometryError as exc:
            log.warning("record %s: skipping conformer %d (%s)", record.id, ci, exc)
            continue
        out = model.forward(params, graph).data  # (N, n_nuclei), standardized
        ppm = np.stack(
            [
                standardization.destandardize(nuc, out[:, c])
                for c, nuc in enumerate(config.nuclei)
            ],
            axis=-1,
        )
        preds.append(ppm)
        used.append(ci)
    if not preds:
        raise DegenerateGeometryError(
            f"record {record.id}: every selected conformer was degenerate"
        )
    per_conf = np.stack(preds)
    return {
        "per_conformer": per_conf,
        "mean": per_conf.mean(axis=0),
        "std": per_conf.std(axis=0),
        "conformer_indices": used,
    }


def predict_multi_model(
    record: MoleculeRecord,
    params_list,
    config: ModelConfig,
    standardizations,
    conformer_subset=None,
):
    """Average of ensemble means across several trained models."""
    if not params_list:
        raise ValueError("at least one model required")
    if len(params_list) != len(standardizations):
        raise ValueError("params_list and standardizations length mismatch")
    model = GeqShiftModel(config)
    for params in params_list:
        model.validate_params(params)
    means = [
        predict_ensemble(record, params, config, std, conformer_subset, model=model)[
            "mean"
        ]
        for params, std in zip(params_list, standardizations)
    ]
    return np.mean(np.stack(means), axis=0)
