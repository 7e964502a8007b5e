"""Pure-numpy GF(2) kernels; reference behaviour for the compiled module."""

import numpy as np


def rref_inplace(rows, ncols):
    """Reduce packed rows (uint64, bit j at word j//64) to RREF over the first ``ncols`` bits.

    Returns ``(rank, pivots)``.
    """
    nrows = rows.shape[0]
    pivots = []
    r = 0
    for col in range(ncols):
        if r == nrows:
            break
        w, bit = divmod(col, 64)
        mask = np.uint64(1) << np.uint64(bit)
        hits = np.nonzero(rows[r:, w] & mask)[0]
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            rows[[r, p]] = rows[[p, r]]
        others = np.nonzero(rows[:, w] & mask)[0]
        others = others[others != r]
        if others.size:
            rows[others] ^= rows[r]
        pivots.append(col)
        r += 1
    return r, pivots


def xor_rows_select(table, choices):
    """XOR-accumulate ``table[j, choices[j]]`` over j; table is (blocks, options, words)."""
    out = np.zeros(table.shape[2], dtype=np.uint64)
    for j, c in enumerate(choices):
        out ^= table[j, c]
    return out


def solve_inplace(rows, ncols):
    """Solve A x = b for packed augmented rows [A | b] (b at bit ``ncols``).

    Same contract as the compiled kernel: ``(rank, pivots, x0 words, null
    words)``, or ``(rank, pivots, None, None)`` when inconsistent.
    """
    nrows, nwords = rows.shape
    pivots = []
    r = 0
    for col in range(ncols):
        if r == nrows:
            break
        w, bit = divmod(col, 64)
        mask = np.uint64(1) << np.uint64(bit)
        hits = np.nonzero(rows[r:, w] & mask)[0]
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            rows[[r, p]] = rows[[p, r]]
        below = r + 1 + np.nonzero(rows[r + 1:, w] & mask)[0]
        if below.size:
            rows[below] ^= rows[r]
        pivots.append(col)
        r += 1
    rw, rb = divmod(ncols, 64)
    rhs = (rows[:, rw] >> np.uint64(rb)) & np.uint64(1)
    if rhs[r:].any():
        return r, pivots, None, None
    a = np.unpackbits(rows[:r].astype("<u8").view(np.uint8), axis=1, bitorder="little")[:, :ncols]

    def back(x, use_rhs):
        for j in range(r - 1, -1, -1):
            par = int(a[j] @ x) & 1
            if use_rhs:
                par ^= int(rhs[j])
            x[pivots[j]] = par
        return x

    def packx(x):
        return np.packbits(np.concatenate([x, np.zeros(nwords * 64 - ncols, np.uint8)]),
                           bitorder="little").view("<u8").astype(np.uint64)

    x0 = back(np.zeros(ncols, dtype=np.int64), True)
    free = np.setdiff1d(np.arange(ncols), pivots)
    null = np.zeros((free.size, nwords), dtype=np.uint64)
    for i, f in enumerate(free):
        x = np.zeros(ncols, dtype=np.int64)
        x[f] = 1
        null[i] = packx(back(x, False).astype(np.uint8))
    return r, pivots, packx(x0.astype(np.uint8)), null
