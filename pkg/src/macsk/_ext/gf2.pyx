# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled GF(2) kernels; same contracts as gf2_py."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t

cnp.import_array()


def rref_inplace(uint64_t[:, ::1] rows, Py_ssize_t ncols):
    cdef Py_ssize_t nrows = rows.shape[0]
    cdef Py_ssize_t nwords = rows.shape[1]
    cdef Py_ssize_t r = 0, col, w, i, p, k
    cdef uint64_t mask, tmp
    piv = np.zeros(min(nrows, ncols) + 1, dtype=np.int64)
    cdef long long[::1] pv = piv
    with nogil:
        for col in range(ncols):
            if r == nrows:
                break
            w = col >> 6
            mask = (<uint64_t>1) << (col & 63)
            p = -1
            for i in range(r, nrows):
                if rows[i, w] & mask:
                    p = i
                    break
            if p < 0:
                continue
            if p != r:
                for k in range(nwords):
                    tmp = rows[r, k]
                    rows[r, k] = rows[p, k]
                    rows[p, k] = tmp
            for i in range(nrows):
                if i != r and (rows[i, w] & mask):
                    # words below w are already zero in the pivot row
                    for k in range(w, nwords):
                        rows[i, k] ^= rows[r, k]
            pv[r] = col
            r += 1
    return r, [int(c) for c in piv[:r]]


def xor_rows_select(uint64_t[:, :, ::1] table, long[::1] choices):
    cdef Py_ssize_t nb = table.shape[0], nw = table.shape[2], j, k
    out = np.zeros(nw, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    for j in range(nb):
        for k in range(nw):
            o[k] ^= table[j, choices[j], k]
    return out


cdef extern from *:
    int popcountll "__builtin_popcountll"(unsigned long long) nogil


cdef void _back_substitute(uint64_t[:, ::1] rows, long long[::1] pv, Py_ssize_t r,
                           uint64_t[::1] x, Py_ssize_t ncols, bint use_rhs) noexcept nogil:
    cdef Py_ssize_t j, k, w, c
    cdef int par
    for j in range(r - 1, -1, -1):
        c = pv[j]
        w = c >> 6
        par = 0
        for k in range(w, x.shape[0]):
            par ^= popcountll(rows[j, k] & x[k]) & 1
        if use_rhs:
            par ^= <int>((rows[j, ncols >> 6] >> (ncols & 63)) & 1)
            # the rhs bit itself is never set in x
        if par:
            x[w] |= (<uint64_t>1) << (c & 63)


def solve_inplace(uint64_t[:, ::1] rows, Py_ssize_t ncols):
    """Solve A x = b for packed augmented rows [A | b] (b at bit ``ncols``).

    Forward elimination only, then back-substitution. Returns
    ``(rank, pivots, x0 words, null words)`` or ``(rank, pivots, None, None)``
    when inconsistent. Solutions are packed like the rows, over ``ncols`` bits.
    """
    cdef Py_ssize_t nrows = rows.shape[0]
    cdef Py_ssize_t nwords = rows.shape[1]
    cdef Py_ssize_t r = 0, col, w, i, p, k, f, nf
    cdef uint64_t mask, tmp
    cdef bint bad = 0
    piv = np.zeros(min(nrows, ncols) + 1, dtype=np.int64)
    cdef long long[::1] pv = piv
    with nogil:
        for col in range(ncols):
            if r == nrows:
                break
            w = col >> 6
            mask = (<uint64_t>1) << (col & 63)
            p = -1
            for i in range(r, nrows):
                if rows[i, w] & mask:
                    p = i
                    break
            if p < 0:
                continue
            if p != r:
                for k in range(w, nwords):
                    tmp = rows[r, k]
                    rows[r, k] = rows[p, k]
                    rows[p, k] = tmp
            for i in range(p + 1, nrows):
                if rows[i, w] & mask:
                    for k in range(w, nwords):
                        rows[i, k] ^= rows[r, k]
            pv[r] = col
            r += 1
        for i in range(r, nrows):
            if (rows[i, ncols >> 6] >> (ncols & 63)) & 1:
                bad = 1
                break
    pivots = [int(c) for c in piv[:r]]
    if bad:
        return r, pivots, None, None
    # mask out the rhs column so back-substitution ignores it
    x0 = np.zeros(nwords, dtype=np.uint64)
    cdef uint64_t[::1] xv = x0
    with nogil:
        _back_substitute(rows, pv, r, xv, ncols, 1)
    is_piv = np.zeros(ncols, dtype=bool)
    is_piv[piv[:r]] = True
    free = np.nonzero(~is_piv)[0]
    nf = free.size
    null = np.zeros((nf, nwords), dtype=np.uint64)
    cdef uint64_t[:, ::1] nv = null
    cdef long long[::1] fv = free.astype(np.int64)
    with nogil:
        for f in range(nf):
            nv[f, fv[f] >> 6] |= (<uint64_t>1) << (fv[f] & 63)
            _back_substitute(rows, pv, r, nv[f], ncols, 0)
    return r, pivots, x0, null
