"""Irreducible representation signatures and the geometric tensor container.

Conventions used throughout the package:

* an irrep is labeled by a rotation order ``l`` (dimension ``2l+1``) and a
  parity, even (``e``) or odd (``o``);
* the components of a degree-``l`` block are ordered ``m = -l .. l``;
* a signature is an ordered list of ``(multiplicity, irrep)`` entries and is
  written in the text form ``"64x0e+32x1o+8x2e"``;
* the flat data layout of a geometric tensor follows the signature: for each
  entry, ``multiplicity`` consecutive blocks of ``2l+1`` components each.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

__all__ = ["Irrep", "Irreps", "GeometricTensor", "parse_irreps", "IrrepsParseError"]


class IrrepsParseError(ValueError):
    """Raised when a signature string does not match the grammar."""


@dataclass(frozen=True, order=True)
class Irrep:
    l: int
    parity: int  # +1 even, -1 odd

    def __post_init__(self):
        if self.l < 0:
            raise ValueError(f"rotation order must be non-negative, got {self.l}")
        if self.parity not in (1, -1):
            raise ValueError(f"parity must be +1 or -1, got {self.parity}")

    @property
    def dim(self) -> int:
        return 2 * self.l + 1

    def __mul__(self, other: "Irrep"):
        """Irreps appearing in the product, per the selection rules."""
        p = self.parity * other.parity
        lo, hi = abs(self.l - other.l), self.l + other.l
        return [Irrep(l, p) for l in range(lo, hi + 1)]

    def __str__(self) -> str:
        return f"{self.l}{'e' if self.parity == 1 else 'o'}"


_TOKEN_RE = re.compile(r"^(\d+)x(\d+)([eo])$")


class Irreps(tuple):
    """An ordered tuple of ``(mul, Irrep)`` entries."""

    def __new__(cls, entries):
        if isinstance(entries, str):
            return parse_irreps(entries)
        norm = []
        for mul, ir in entries:
            mul = int(mul)
            if mul <= 0:
                raise ValueError(f"multiplicity must be positive, got {mul}")
            if not isinstance(ir, Irrep):
                ir = Irrep(*ir)
            norm.append((mul, ir))
        return super().__new__(cls, norm)

    @property
    def dim(self) -> int:
        return sum(mul * ir.dim for mul, ir in self)

    @property
    def num_channels(self) -> int:
        return sum(mul for mul, _ in self)

    @property
    def lmax(self) -> int:
        return max(ir.l for _, ir in self)

    def slices(self):
        """Flat-array slice per entry, in signature order."""
        out, off = [], 0
        for mul, ir in self:
            size = mul * ir.dim
            out.append(slice(off, off + size))
            off += size
        return out

    def filter(self, keep) -> "Irreps":
        return Irreps([(mul, ir) for mul, ir in self if keep(ir)])

    def __str__(self) -> str:
        return "+".join(f"{mul}x{ir}" for mul, ir in self)

    def __repr__(self) -> str:
        return f"Irreps('{self}')"


def parse_irreps(text: str) -> Irreps:
    """Parse a signature string like ``"64x0e+32x1o+8x2e"``."""
    if not isinstance(text, str) or not text.strip():
        raise IrrepsParseError(f"empty irreps signature: {text!r}")
    entries = []
    for token in text.strip().split("+"):
        m = _TOKEN_RE.match(token.strip())
        if m is None:
            raise IrrepsParseError(f"malformed irreps token {token.strip()!r} in {text!r}")
        mul, l, par = int(m.group(1)), int(m.group(2)), m.group(3)
        if mul <= 0:
            raise IrrepsParseError(f"multiplicity must be positive in token {token.strip()!r}")
        entries.append((mul, Irrep(l, 1 if par == "e" else -1)))
    return Irreps(entries)


class GeometricTensor:
    """A flat array typed by an irreps signature.

    ``data`` may carry leading batch axes; the last axis must equal
    ``signature.dim``.
    """

    __slots__ = ("signature", "data")

    def __init__(self, signature, data):
        signature = Irreps(signature) if not isinstance(signature, Irreps) else signature
        data = np.asarray(data, dtype=np.float64)
        if data.shape[-1] != signature.dim:
            raise ValueError(
                f"data length {data.shape[-1]} does not match signature "
                f"'{signature}' of dim {signature.dim}"
            )
        self.signature = signature
        self.data = data

    def blocks(self):
        """Per-entry views shaped ``(..., mul, 2l+1)``."""
        out = []
        for (mul, ir), sl in zip(self.signature, self.signature.slices()):
            out.append(self.data[..., sl].reshape(*self.data.shape[:-1], mul, ir.dim))
        return out

    @classmethod
    def from_blocks(cls, signature, blocks):
        signature = Irreps(signature)
        flat = [np.asarray(b).reshape(*np.asarray(b).shape[:-2], -1) for b in blocks]
        return cls(signature, np.concatenate(flat, axis=-1))

    @classmethod
    def zeros(cls, signature, batch_shape=()):
        signature = Irreps(signature)
        return cls(signature, np.zeros((*batch_shape, signature.dim)))

    def transform(self, rotation=None, inversion=False):
        """Apply an O(3) group element block-wise (used by the test suites)."""
        from .so3 import wigner_d

        out = []
        for block, (mul, ir) in zip(self.blocks(), self.signature):
            b = block
            if rotation is not None:
                D = wigner_d(ir.l, rotation)
                b = np.einsum("mn,...un->...um", D, b)
            if inversion and ir.parity == -1:
                b = -b
            out.append(b)
        return GeometricTensor.from_blocks(self.signature, out)

    def __repr__(self):
        return f"GeometricTensor('{self.signature}', shape={self.data.shape})"
