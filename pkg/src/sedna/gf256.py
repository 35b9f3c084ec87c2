"""GF(2^8) arithmetic and Gauss-Jordan elimination on numpy uint8 arrays.

Field polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11d), generator 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PRIM_POLY = 0x11D

EXP = np.zeros(512, dtype=np.uint8)
LOG = np.zeros(256, dtype=np.int32)

_x = 1
for _i in range(255):
    EXP[_i] = _x
    LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= PRIM_POLY
EXP[255:510] = EXP[:255]
del _x, _i

MUL = np.zeros((256, 256), dtype=np.uint8)
_nz = np.arange(1, 256)
MUL[1:, 1:] = EXP[(LOG[_nz][:, None] + LOG[_nz][None, :]) % 255]
del _nz

INV = np.zeros(256, dtype=np.uint8)
INV[1:] = EXP[(255 - LOG[1:]) % 255]


def mul(a: int, b: int) -> int:
    return int(MUL[a, b])


def inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return int(INV[a])


def scale(c: int, row: np.ndarray) -> np.ndarray:
    return MUL[c][row]


def matmul(a: np.ndarray, b: np.ndarray, max_temp: int = 1 << 24) -> np.ndarray:
    """Product of GF(256) matrices ``a`` (r x k) and ``b`` (k x w)."""
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    r, k = a.shape
    k2, w = b.shape
    if k != k2:
        raise ValueError(f"shape mismatch {a.shape} x {b.shape}")
    out = np.zeros((r, w), dtype=np.uint8)
    if r == 0 or k == 0 or w == 0:
        return out
    step = max(1, max_temp // max(1, k * w))
    for lo in range(0, r, step):
        prod = MUL[a[lo:lo + step, :, None], b[None, :, :]]
        out[lo:lo + step] = np.bitwise_xor.reduce(prod, axis=1)
    return out


@dataclass
class Elimination:
    rank: int
    pivots: list[int]
    reduced: np.ndarray
    inconsistent: bool


def eliminate(coeffs: np.ndarray, data: np.ndarray | None = None) -> Elimination:
    """Reduce ``[coeffs | data]`` to reduced row-echelon form over GF(256).

    ``inconsistent`` is set when a row whose coefficients reduce to zero still
    carries nonzero data, i.e. no message explains every input row.
    """
    coeffs = np.asarray(coeffs, dtype=np.uint8)
    rows, cols = coeffs.shape
    if data is None:
        a = coeffs.copy()
    else:
        a = np.concatenate([coeffs, np.asarray(data, dtype=np.uint8)], axis=1)
    rank = 0
    pivots: list[int] = []
    for col in range(cols):
        if rank == rows:
            break
        cand = np.flatnonzero(a[rank:, col])
        if cand.size == 0:
            continue
        p = rank + int(cand[0])
        if p != rank:
            a[[rank, p]] = a[[p, rank]]
        sub = a[:, col:]
        sub[rank] = MUL[INV[sub[rank, 0]]][sub[rank]]
        factors = sub[:, 0].copy()
        factors[rank] = 0
        nz = np.flatnonzero(factors)
        if nz.size:
            sub[nz] ^= MUL[factors[nz, None], sub[rank][None, :]]
        pivots.append(col)
        rank += 1
    inconsistent = False
    if data is not None and rank < rows:
        inconsistent = bool(a[rank:, cols:].any())
    return Elimination(rank, pivots, a, inconsistent)


def rank(coeffs: np.ndarray) -> int:
    return eliminate(coeffs).rank
