"""Linear algebra over GF(2) on bit-packed rows.

The elimination kernel comes from the compiled extension when it is built and
from a numpy implementation otherwise. Set ``MACSK_PURE_PYTHON=1`` to force the
fallback.
"""

from __future__ import annotations

import os

import numpy as np

from ._ext import gf2_py

if os.environ.get("MACSK_PURE_PYTHON"):
    _impl = gf2_py
    BACKEND = "python"
else:
    try:
        from ._ext import gf2 as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = gf2_py
        BACKEND = "python"


def pack(bits: np.ndarray) -> np.ndarray:
    """Pack a (rows, cols) 0/1 array into (rows, ceil(cols/64)) uint64, bit j -> word j//64."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    rows, cols = bits.shape
    words = max(1, (cols + 63) // 64)
    padded = np.zeros((rows, words * 64), dtype=np.uint8)
    padded[:, :cols] = bits
    b8 = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(b8.view("<u8").astype(np.uint64))


def unpack(packed: np.ndarray, cols: int) -> np.ndarray:
    packed = np.ascontiguousarray(np.atleast_2d(packed).astype("<u8"))
    b8 = packed.view(np.uint8)
    return np.unpackbits(b8, axis=1, bitorder="little")[:, :cols]


def rref(bits: np.ndarray, ncols: int | None = None, impl=None):
    """Row-reduce a 0/1 matrix; returns (packed RREF rows, rank, pivot columns)."""
    bits = np.atleast_2d(bits)
    ncols = bits.shape[1] if ncols is None else ncols
    rows = pack(bits)
    rank, pivots = (impl or _impl).rref_inplace(rows, ncols)
    return rows, rank, list(pivots)


def rank(bits: np.ndarray) -> int:
    bits = np.atleast_2d(bits)
    if bits.size == 0:
        return 0
    return rref(bits)[1]


def solve(a: np.ndarray, b: np.ndarray, impl=None):
    """All solutions of ``a x = b`` over GF(2).

    Returns ``(x0, null)`` with ``x0`` a particular solution (free variables
    zero) and ``null`` a (d, cols) basis of the kernel, or ``(None, None)``
    when the system is inconsistent.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.uint8))
    rows, cols = a.shape
    aug = np.zeros((rows, cols + 1), dtype=np.uint8)
    aug[:, :cols] = a
    aug[:, cols] = np.asarray(b, dtype=np.uint8).ravel() & 1
    packed = pack(aug)
    _, _, x0, null = (impl or _impl).solve_inplace(packed, cols)
    if x0 is None:
        return None, None
    return unpack(x0[None, :], cols)[0], unpack(null, cols) if len(null) else np.zeros((0, cols), np.uint8)


def matvec(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``a x`` over GF(2) via a BLAS float product.

    float32 sums are exact below 2**24 ones per row; wider rows use float64.
    """
    a = np.asarray(a)
    ft = np.float32 if a.shape[-1] < 2**24 else np.float64
    prod = a.astype(ft, copy=False) @ np.asarray(x, dtype=ft)
    return (np.rint(prod).astype(np.int64) & 1).astype(np.uint8)
