"""Equivariant building blocks: typed linear maps, weighted tensor products,
layer normalization, gated activation and plain scalar MLPs.

Modules are stateless descriptions; learnable arrays live in a flat
``{name: ndarray}`` parameter map. Every module exposes ``param_shapes()``
(stable key -> shape) and ``init(rng)`` and is called with the parameter map
(values wrapped as autodiff Tensors) plus its inputs.

Weight layouts are deterministic: paths/instructions are enumerated in
signature order and their weight blocks concatenated in that order.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, concatenate, einsum
from .irreps import Irreps
from .so3 import clebsch_gordan

__all__ = [
    "ConfigurationError",
    "Linear",
    "WeightedTensorProduct",
    "EquivariantLayerNorm",
    "Gate",
    "ScalarMLP",
]


class ConfigurationError(ValueError):
    pass


def _blocks(x: Tensor, irreps: Irreps):
    """Split a (N, dim) tensor into per-entry (N, mul, 2l+1) views."""
    out = []
    n = x.shape[0]
    for (mul, ir), sl in zip(irreps, irreps.slices()):
        out.append(x[(slice(None), sl)].reshape(n, mul, ir.dim))
    return out


def _flatten_blocks(blocks):
    flat = [b.reshape(b.shape[0], b.shape[1] * b.shape[2]) for b in blocks]
    return concatenate(flat, axis=-1)


class Linear:
    """Channel mixing within identical (l, parity) types; bias on scalars only."""

    def __init__(self, name, irreps_in, irreps_out, bias=True, strict=True):
        self.name = name
        self.irreps_in = Irreps(irreps_in)
        self.irreps_out = Irreps(irreps_out)
        self.instructions = []  # (i_in, i_out)
        for i_out, (_, ir_out) in enumerate(self.irreps_out):
            ins = [
                i_in
                for i_in, (_, ir_in) in enumerate(self.irreps_in)
                if ir_in == ir_out
            ]
            if not ins and strict:
                raise ConfigurationError(
                    f"{name}: output irrep {ir_out} absent from input "
                    f"signature '{self.irreps_in}'"
                )
            self.instructions.extend((i_in, i_out) for i_in in ins)
        self.bias = bias
        self._bias_entries = (
            [i for i, (_, ir) in enumerate(self.irreps_out) if ir.l == 0]
            if bias
            else []
        )

    def param_shapes(self):
        shapes = {}
        numel = sum(
            self.irreps_in[i][0] * self.irreps_out[o][0] for i, o in self.instructions
        )
        shapes[f"{self.name}.w"] = (numel,)
        if self._bias_entries:
            nb = sum(self.irreps_out[i][0] for i in self._bias_entries)
            shapes[f"{self.name}.b"] = (nb,)
        return shapes

    def _fan_in(self, i_out):
        return sum(self.irreps_in[i][0] for i, o in self.instructions if o == i_out)

    def init(self, rng):
        ws = []
        for i, o in self.instructions:
            mul_in, mul_out = self.irreps_in[i][0], self.irreps_out[o][0]
            std = 1.0 / np.sqrt(self._fan_in(o))
            ws.append(rng.normal(0.0, std, size=mul_in * mul_out))
        out = {f"{self.name}.w": np.concatenate(ws) if ws else np.zeros(0)}
        if self._bias_entries:
            nb = sum(self.irreps_out[i][0] for i in self._bias_entries)
            out[f"{self.name}.b"] = np.zeros(nb)
        return out

    def __call__(self, params, x: Tensor) -> Tensor:
        xb = _blocks(x, self.irreps_in)
        w = params[f"{self.name}.w"]
        acc = {o: None for o in range(len(self.irreps_out))}
        off = 0
        for i, o in self.instructions:
            mul_in, mul_out = self.irreps_in[i][0], self.irreps_out[o][0]
            blk = w[off : off + mul_in * mul_out].reshape(mul_in, mul_out)
            off += mul_in * mul_out
            term = einsum("zui,uw->zwi", xb[i], blk)
            acc[o] = term if acc[o] is None else acc[o] + term
        n = x.shape[0]
        for o, (mul, ir) in enumerate(self.irreps_out):
            if acc[o] is None:
                acc[o] = Tensor(np.zeros((n, mul, ir.dim)))
        if self._bias_entries:
            b = params[f"{self.name}.b"]
            boff = 0
            for o in self._bias_entries:
                mul = self.irreps_out[o][0]
                acc[o] = acc[o] + b[boff : boff + mul].reshape(1, mul, 1)
                boff += mul
        return _flatten_blocks([acc[o] for o in range(len(self.irreps_out))])


class WeightedTensorProduct:
    """Fully-connected Clebsch-Gordan tensor product with external weights.

    Paths are all (entry1, entry2, out_entry) triples allowed by the
    selection rules, enumerated in signature order; each carries a
    (mul1, mul2, mul_out) weight block. Per-path outputs are scaled by
    1/sqrt(mul1*mul2) and each output entry by 1/sqrt(#paths feeding it),
    keeping variance stable under unit-variance inputs.
    """

    def __init__(self, irreps_in1, irreps_in2, irreps_out):
        self.irreps_in1 = Irreps(irreps_in1)
        self.irreps_in2 = Irreps(irreps_in2)
        self.irreps_out = Irreps(irreps_out)
        self.paths = []  # (i1, i2, i_out)
        for i1, (_, ir1) in enumerate(self.irreps_in1):
            for i2, (_, ir2) in enumerate(self.irreps_in2):
                for i_out, (_, ir_out) in enumerate(self.irreps_out):
                    if ir_out in ir1 * ir2:
                        self.paths.append((i1, i2, i_out))
        self.weight_numel = sum(
            self.irreps_in1[i1][0] * self.irreps_in2[i2][0] * self.irreps_out[io][0]
            for i1, i2, io in self.paths
        )
        self._n_paths_out = {
            io: sum(1 for _, _, o in self.paths if o == io)
            for io in range(len(self.irreps_out))
        }

    def __call__(self, x: Tensor, y: Tensor, weights: Tensor) -> Tensor:
        if weights.shape[-1] != self.weight_numel:
            raise ConfigurationError(
                f"tensor product expects {self.weight_numel} weights "
                f"({len(self.paths)} paths), got {weights.shape[-1]}"
            )
        xb = _blocks(x, self.irreps_in1)
        yb = _blocks(y, self.irreps_in2)
        n_batch = x.shape[0]
        shared = weights.ndim == 1
        acc = {o: None for o in range(len(self.irreps_out))}
        off = 0
        for i1, i2, io in self.paths:
            mul1, ir1 = self.irreps_in1[i1]
            mul2, ir2 = self.irreps_in2[i2]
            mul3, ir3 = self.irreps_out[io]
            n = mul1 * mul2 * mul3
            cg = clebsch_gordan(ir1.l, ir2.l, ir3.l)
            if shared:
                wb = weights[off : off + n].reshape(mul1, mul2, mul3)
                term = einsum("zui,zvj,uvw,ijk->zwk", xb[i1], yb[i2], wb, cg)
            else:
                wb = weights[(slice(None), slice(off, off + n))].reshape(
                    n_batch, mul1, mul2, mul3
                )
                term = einsum("zui,zvj,zuvw,ijk->zwk", xb[i1], yb[i2], wb, cg)
            off += n
            term = term * (1.0 / np.sqrt(mul1 * mul2))
            acc[io] = term if acc[io] is None else acc[io] + term
        out = []
        for io, (mul3, ir3) in enumerate(self.irreps_out):
            t = acc[io]
            if t is None:
                t = Tensor(np.zeros((n_batch, mul3, ir3.dim)))
            else:
                t = t * (1.0 / np.sqrt(self._n_paths_out[io]))
            out.append(t)
        return _flatten_blocks(out)


class EquivariantLayerNorm:
    """Per-entry normalization: scalar entries are mean-centered and
    RMS-normalized over channels; l>0 entries are divided by the RMS of
    their channel norms. A learnable gain per channel follows."""

    def __init__(self, name, irreps, eps=1e-6):
        self.name = name
        self.irreps = Irreps(irreps)
        self.eps = float(eps)

    def param_shapes(self):
        return {f"{self.name}.gain": (self.irreps.num_channels,)}

    def init(self, rng):
        return {f"{self.name}.gain": np.ones(self.irreps.num_channels)}

    def __call__(self, params, x: Tensor) -> Tensor:
        gains = params[f"{self.name}.gain"]
        out, coff = [], 0
        for block, (mul, ir) in zip(_blocks(x, self.irreps), self.irreps):
            g = gains[coff : coff + mul].reshape(1, mul, 1)
            coff += mul
            if ir.l == 0:
                centered = block - block.mean(axis=-2, keepdims=True)
                rms = ((centered * centered).mean(axis=-2, keepdims=True) + self.eps).sqrt()
                out.append(g * centered / rms)
            else:
                norm2 = (block * block).sum(axis=-1, keepdims=True)
                rms = (norm2.mean(axis=-2, keepdims=True) + self.eps).sqrt()
                out.append(g * block / rms)
        return _flatten_blocks(out)


class Gate:
    """SiLU on scalar channels; l>0 channels multiplied by the sigmoid of a
    dedicated gate scalar. Input layout: scalars ++ gates ++ gated."""

    def __init__(self, irreps_scalars, irreps_gated):
        self.irreps_scalars = Irreps(irreps_scalars)
        self.irreps_gated = Irreps(irreps_gated)
        if any(ir.l == 0 for _, ir in self.irreps_gated):
            raise ConfigurationError("gated entries must have l > 0")
        self.n_gates = self.irreps_gated.num_channels
        self.irreps_in = Irreps(
            list(self.irreps_scalars) + [(self.n_gates, (0, 1))] + list(self.irreps_gated)
        )
        self.irreps_out = Irreps(list(self.irreps_scalars) + list(self.irreps_gated))

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.irreps_in.dim:
            raise ConfigurationError(
                f"gate expects input dim {self.irreps_in.dim} "
                f"('{self.irreps_in}'), got {x.shape[-1]}"
            )
        ds = self.irreps_scalars.dim
        n = x.shape[0]
        scalars = x[(slice(None), slice(0, ds))]
        gates = x[(slice(None), slice(ds, ds + self.n_gates))].sigmoid()
        out = [scalars.silu()]
        blocks = _blocks(x[(slice(None), slice(ds + self.n_gates, None))], self.irreps_gated)
        goff = 0
        for block, (mul, ir) in zip(blocks, self.irreps_gated):
            g = gates[(slice(None), slice(goff, goff + mul))].reshape(n, mul, 1)
            goff += mul
            out.append((block * g).reshape(n, mul * ir.dim))
        return concatenate(out, axis=-1)


class ScalarMLP:
    """Plain dense network on invariant features, SiLU between layers."""

    def __init__(self, name, dims):
        self.name = name
        self.dims = list(dims)

    def param_shapes(self):
        shapes = {}
        for k, (a, b) in enumerate(zip(self.dims[:-1], self.dims[1:])):
            shapes[f"{self.name}.w{k}"] = (a, b)
            shapes[f"{self.name}.b{k}"] = (b,)
        return shapes

    def init(self, rng):
        out = {}
        for k, (a, b) in enumerate(zip(self.dims[:-1], self.dims[1:])):
            out[f"{self.name}.w{k}"] = rng.normal(0.0, 1.0 / np.sqrt(a), size=(a, b))
            out[f"{self.name}.b{k}"] = np.zeros(b)
        return out

    def __call__(self, params, x: Tensor) -> Tensor:
        n_layers = len(self.dims) - 1
        for k in range(n_layers):
            x = einsum("zi,ij->zj", x, params[f"{self.name}.w{k}"])
            x = x + params[f"{self.name}.b{k}"]
            if k < n_layers - 1:
                x = x.silu()
        return x
