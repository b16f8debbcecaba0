"""Real-basis O(3) machinery: Clebsch-Gordan tables, Wigner matrices,
spherical harmonics.

Basis convention (documented, fixed once, inherited by every other module):

* real spherical-harmonic basis, components ordered ``m = -l .. l`` with the
  usual sine (m<0) / cosine (m>0) combinations and Condon-Shortley phases,
  so the degree-1 basis reads ``(y, z, x)``;
* "component" normalization: ``sh(l_max, d)`` has per-degree block norm
  ``sqrt(2l+1)`` for any unit direction ``d``;
* Clebsch-Gordan tables are orthonormal per output component:
  ``sum_{m1,m2} C[m1,m2,m3] C[m1,m2,m3'] = delta``.

Coefficients are computed through the Racah formula with exact rational
intermediates and cached; Wigner matrices for l>1 are generated recursively
from the degree-1 matrix through the Clebsch-Gordan contraction, so the whole
stack is self-consistent by construction.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "clebsch_gordan",
    "wigner_d",
    "real_spherical_harmonics",
    "rotation_z",
    "rotation_y",
    "random_rotation",
    "InvalidRotationError",
    "DegenerateDirectionError",
]

LMAX_DEFAULT = 3


class InvalidRotationError(ValueError):
    pass


class DegenerateDirectionError(ValueError):
    pass


def _fact(n: int) -> int:
    return math.factorial(n)


def _su2_cg(j1, j2, j3, m1, m2, m3) -> float:
    """<j1 m1 j2 m2 | j3 m3> via the Racah formula, exact rationals inside."""
    if m3 != m1 + m2:
        return 0.0
    if not (abs(j1 - j2) <= j3 <= j1 + j2):
        return 0.0
    pref = Fraction(
        (2 * j3 + 1)
        * _fact(j3 + j1 - j2)
        * _fact(j3 - j1 + j2)
        * _fact(j1 + j2 - j3)
        * _fact(j3 + m3)
        * _fact(j3 - m3)
        * _fact(j1 - m1)
        * _fact(j1 + m1)
        * _fact(j2 - m2)
        * _fact(j2 + m2),
        _fact(j1 + j2 + j3 + 1),
    )
    total = Fraction(0)
    for k in range(0, j1 + j2 - j3 + 1):
        dens = (
            k,
            j1 + j2 - j3 - k,
            j1 - m1 - k,
            j2 + m2 - k,
            j3 - j2 + m1 + k,
            j3 - j1 - m2 + k,
        )
        if any(d < 0 for d in dens):
            continue
        term = Fraction((-1) ** k, 1)
        for d in dens:
            term /= _fact(d)
        total += term
    return float(total) * math.sqrt(float(pref))


@lru_cache(maxsize=None)
def _real_to_complex(l: int) -> np.ndarray:
    """Change of basis so that a complex-basis vector maps into the real basis.

    Includes the (-i)^l phase that renders the real Clebsch-Gordan tables
    real-valued.
    """
    q = np.zeros((2 * l + 1, 2 * l + 1), dtype=complex)
    for m in range(-l, 0):
        q[l + m, l + abs(m)] = 1 / math.sqrt(2)
        q[l + m, l - abs(m)] = -1j / math.sqrt(2)
    q[l, l] = 1.0
    for m in range(1, l + 1):
        q[l + m, l + m] = (-1) ** m / math.sqrt(2)
        q[l + m, l - m] = 1j * (-1) ** m / math.sqrt(2)
    return (-1j) ** l * q


@lru_cache(maxsize=None)
def clebsch_gordan(l1: int, l2: int, l3: int) -> np.ndarray:
    """Real-basis Clebsch-Gordan coefficients, shape (2l1+1, 2l2+1, 2l3+1).

    Identically zero when the selection rule |l1-l2| <= l3 <= l1+l2 fails.
    """
    shape = (2 * l1 + 1, 2 * l2 + 1, 2 * l3 + 1)
    if not (abs(l1 - l2) <= l3 <= l1 + l2):
        return np.zeros(shape)
    c = np.zeros(shape)
    for m1 in range(-l1, l1 + 1):
        for m2 in range(-l2, l2 + 1):
            m3 = m1 + m2
            if abs(m3) <= l3:
                c[l1 + m1, l2 + m2, l3 + m3] = _su2_cg(l1, l2, l3, m1, m2, m3)
    q1 = _real_to_complex(l1)
    q2 = _real_to_complex(l2)
    q3 = _real_to_complex(l3)
    real_c = np.einsum("ia,jb,kc,ijk->abc", q1, q2, q3.conj(), c.astype(complex))
    if np.abs(real_c.imag).max() > 1e-12:
        raise RuntimeError(
            f"Clebsch-Gordan ({l1},{l2},{l3}) not real; basis phase is wrong"
        )
    out = real_c.real.copy()
    out.setflags(write=False)
    return out


def cg_table(lmax: int = LMAX_DEFAULT) -> dict:
    """All (l1, l2, l3) tables up to lmax; built once, immutable thereafter."""
    return {
        (l1, l2, l3): clebsch_gordan(l1, l2, l3)
        for l1 in range(lmax + 1)
        for l2 in range(lmax + 1)
        for l3 in range(lmax + 1)
    }


# degree-1 real basis is (y, z, x): permutation applied to Cartesian rotations
_P_YZX = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])


def _check_rotation(rotation, tol=1e-9):
    r = np.asarray(rotation, dtype=np.float64)
    if r.shape != (3, 3):
        raise InvalidRotationError(f"rotation must be 3x3, got shape {r.shape}")
    if np.abs(r @ r.T - np.eye(3)).max() > tol:
        raise InvalidRotationError("matrix is not orthogonal within 1e-9")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise InvalidRotationError("matrix is not a proper rotation (det != +1)")
    return r


def wigner_d(l: int, rotation) -> np.ndarray:
    """Real Wigner matrix of degree l for a proper rotation."""
    r = _check_rotation(rotation)
    if l == 0:
        return np.ones((1, 1))
    d = _P_YZX @ r @ _P_YZX.T
    dl = d
    for k in range(2, l + 1):
        c = clebsch_gordan(1, k - 1, k)
        dl = np.einsum("abm,ai,bj,ijn->mn", c, d, dl, c)
    return dl


@lru_cache(maxsize=None)
def _sh_scale(l: int) -> float:
    """Normalization so the degree-l block has norm sqrt(2l+1) on unit input,
    with the conventional sign Y_{l,0}(z) > 0."""
    if l <= 1:
        return 1.0
    raw = _sh_raw(l, np.array([0.0, 0.0, 1.0]))
    m0 = raw[l]
    if abs(m0) < 1e-12:
        raise RuntimeError(f"degenerate spherical-harmonic recursion at l={l}")
    return math.copysign(math.sqrt(2 * l + 1) / np.linalg.norm(raw), m0)


def _sh_raw(l: int, d: np.ndarray) -> np.ndarray:
    if l == 0:
        return np.ones(d.shape[:-1] + (1,))
    y1 = math.sqrt(3.0) * np.stack([d[..., 1], d[..., 2], d[..., 0]], axis=-1)
    if l == 1:
        return y1
    prev = _sh_scale(l - 1) * _sh_raw(l - 1, d)
    c = clebsch_gordan(1, l - 1, l)
    return np.einsum("abm,...a,...b->...m", c, y1, prev)


def real_spherical_harmonics(l_max: int, direction):
    """Component-normalized real spherical harmonics of a unit direction.

    Returns a GeometricTensor with signature 1x0e+1x1o+...+1x(l_max)(parity
    (-1)^l). ``direction`` may carry leading batch axes.
    """
    from .irreps import GeometricTensor, Irrep, Irreps

    d = np.asarray(direction, dtype=np.float64)
    norms = np.linalg.norm(d, axis=-1)
    if np.any(norms < 1e-12):
        raise DegenerateDirectionError("zero-length direction vector")
    if np.abs(norms - 1.0).max() > 1e-9:
        raise ValueError("direction must be unit length within 1e-9")
    blocks = [_sh_scale(l) * _sh_raw(l, d) for l in range(l_max + 1)]
    sig = Irreps([(1, Irrep(l, (-1) ** l)) for l in range(l_max + 1)])
    return GeometricTensor(sig, np.concatenate(blocks, axis=-1))


def rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def random_rotation(rng) -> np.ndarray:
    """Haar-ish random proper rotation from a QR decomposition."""
    a = rng.standard_normal((3, 3))
    q, r = np.linalg.qr(a)
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
