"""Compiled GF(q) elimination kernels.

Every kernel takes the field as ``(binary, q, exp, log)`` (see
``FieldSpec.kernel_args``).  Matrices are C-contiguous int64 arrays.
"""

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _mul(a, b, binary, q, exp, log):
    if a == 0 or b == 0:
        return 0
    if binary:
        return exp[log[a] + log[b]]
    return (a * b) % q


@njit(cache=True, inline="always")
def _add(a, b, binary, q):
    if binary:
        return a ^ b
    s = a + b
    return s - q if s >= q else s


@njit(cache=True, inline="always")
def _sub(a, b, binary, q):
    if binary:
        return a ^ b
    s = a - b
    return s + q if s < 0 else s


@njit(cache=True)
def _inv(a, binary, q, exp, log):
    if binary:
        return exp[(q - 1 - log[a]) % (q - 1)]
    # Fermat
    r = 1
    b = a
    e = q - 2
    while e > 0:
        if e & 1:
            r = (r * b) % q
        b = (b * b) % q
        e >>= 1
    return r


@njit(cache=True)
def _axpy(dst, c, src, start, stop, binary, q, exp, log):
    """dst[start:stop] -= c * src[start:stop]"""
    if c == 0:
        return
    if binary:
        lc = log[c]
        for j in range(start, stop):
            s = src[j]
            if s != 0:
                dst[j] ^= exp[lc + log[s]]
    else:
        for j in range(start, stop):
            s = src[j]
            if s != 0:
                v = dst[j] - (c * s) % q
                dst[j] = v + q if v < 0 else v


@njit(cache=True)
def _scale(row, c, start, stop, binary, q, exp, log):
    for j in range(start, stop):
        row[j] = _mul(row[j], c, binary, q, exp, log)


@njit(cache=True)
def rref_inplace(m, ncols, binary, q, exp, log):
    """Gauss-Jordan on ``m``; pivots are searched in the first ``ncols``
    columns only (trailing columns ride along).  Returns (rank, pivots)."""
    rows, width = m.shape
    pivots = np.empty(min(rows, ncols), dtype=np.int64)
    r = 0
    for c in range(ncols):
        if r == rows:
            break
        p = -1
        for i in range(r, rows):
            if m[i, c] != 0:
                p = i
                break
        if p < 0:
            continue
        if p != r:
            for j in range(width):
                t = m[p, j]
                m[p, j] = m[r, j]
                m[r, j] = t
        inv = _inv(m[r, c], binary, q, exp, log)
        _scale(m[r], inv, c, width, binary, q, exp, log)
        for i in range(rows):
            if i != r and m[i, c] != 0:
                _axpy(m[i], m[i, c], m[r], c, width, binary, q, exp, log)
        pivots[r] = c
        r += 1
    return r, pivots[:r].copy()


@njit(cache=True)
def reduce_vector(basis, pivots, d, v, binary, q, exp, log):
    """Subtract from ``v`` (in place) its projection on an RREF basis."""
    width = v.shape[0]
    for i in range(d):
        c = v[pivots[i]]
        if c != 0:
            _axpy(v, c, basis[i], pivots[i], width, binary, q, exp, log)


@njit(cache=True)
def is_member(basis, pivots, d, v, ncols, binary, q, exp, log):
    w = v.copy()
    reduce_vector(basis, pivots, d, w, binary, q, exp, log)
    for j in range(ncols):
        if w[j] != 0:
            return False
    return True


@njit(cache=True)
def insert_row(basis, pivots, d, v, ncols, binary, q, exp, log):
    """Insert ``v`` into an RREF basis held in the first ``d`` rows of
    ``basis`` (capacity >= d + 1).  Returns the new dimension."""
    width = basis.shape[1]
    w = v.copy()
    reduce_vector(basis, pivots, d, w, binary, q, exp, log)
    c = -1
    for j in range(ncols):
        if w[j] != 0:
            c = j
            break
    if c < 0:
        return d
    inv = _inv(w[c], binary, q, exp, log)
    _scale(w, inv, c, width, binary, q, exp, log)
    for i in range(d):
        e = basis[i, c]
        if e != 0:
            _axpy(basis[i], e, w, c, width, binary, q, exp, log)
    # keep pivots sorted
    pos = d
    while pos > 0 and pivots[pos - 1] > c:
        pos -= 1
    for i in range(d, pos, -1):
        for j in range(width):
            basis[i, j] = basis[i - 1, j]
        pivots[i] = pivots[i - 1]
    for j in range(width):
        basis[pos, j] = w[j]
    pivots[pos] = c
    return d + 1


@njit(cache=True)
def matmul(a, b, binary, q, exp, log):
    """Field product a @ b."""
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=np.int64)
    for i in range(n):
        for t in range(k):
            c = a[i, t]
            if c != 0:
                # out[i] += c * b[t]
                if binary:
                    lc = log[c]
                    for j in range(m):
                        s = b[t, j]
                        if s != 0:
                            out[i, j] ^= exp[lc + log[s]]
                else:
                    for j in range(m):
                        s = b[t, j]
                        if s != 0:
                            out[i, j] = (out[i, j] + c * s) % q
    return out


@njit(cache=True)
def matadd(a, b, binary, q):
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            out[i, j] = _add(a[i, j], b[i, j], binary, q)
    return out


@njit(cache=True)
def rank_of(m, binary, q, exp, log):
    w = m.copy()
    r, _ = rref_inplace(w, w.shape[1], binary, q, exp, log)
    return r


@njit(cache=True)
def stacked_rank(a, da, b, db, ncols, binary, q, exp, log):
    """rank of the first ``da`` rows of ``a`` stacked on the first ``db`` of ``b``."""
    w = np.empty((da + db, ncols), dtype=np.int64)
    for i in range(da):
        for j in range(ncols):
            w[i, j] = a[i, j]
    for i in range(db):
        for j in range(ncols):
            w[da + i, j] = b[i, j]
    r, _ = rref_inplace(w, ncols, binary, q, exp, log)
    return r


@njit(cache=True)
def join_rank_rref(basis_a, piv_a, da, b, db, ncols, binary, q, exp, log):
    """dim(A + span(b rows)) given A as an RREF basis; cheaper than stacking."""
    cap = da + db
    w = np.zeros((cap, ncols), dtype=np.int64)
    piv = np.zeros(cap, dtype=np.int64)
    for i in range(da):
        for j in range(ncols):
            w[i, j] = basis_a[i, j]
        piv[i] = piv_a[i]
    d = da
    for i in range(db):
        d = insert_row(w, piv, d, b[i, :ncols].copy(), ncols, binary, q, exp, log)
    return d
