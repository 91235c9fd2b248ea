# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Must stay signature-compatible with ``_kernels_py``."""

from cpython cimport array
import array


def prefix_support(paths, weights):
    cdef dict counts = {}
    cdef tuple path
    cdef Py_ssize_t i, j, m
    cdef long w
    cdef object b
    for i in range(len(paths)):
        path = tuple(paths[i])
        w = weights[i]
        m = len(path)
        for j in range(m):
            b = path[j]
            counts[b] = counts.get(b, 0) + w
    return counts


def last_asleep(awake):
    """Rows are returned as ``array('l')``; they index like the fallback's lists."""
    cdef Py_ssize_t t, width
    cdef long last
    cdef const unsigned char[:] row
    cdef long[:] res
    out = []
    for r in awake:
        row = bytes(r) if not isinstance(r, (bytes, bytearray)) else r
        width = row.shape[0]
        arr = array.array("l", bytes(width * sizeof(long)))
        res = arr
        last = -1
        for t in range(width):
            if row[t] == 0:
                last = t
            res[t] = last
        out.append(arr)
    return out


cdef long[:] _as_longs(row):
    if isinstance(row, array.array) and row.typecode == "l":
        return row
    return array.array("l", row)


def window_counts(last, corrupt_at, long t_s, long t_c, long t_b, Py_ssize_t horizon):
    cdef Py_ssize_t n = len(corrupt_at)
    cdef Py_ssize_t width = len(last[0]) if n else 0
    cdef Py_ssize_t t, v
    cdef long lo, tc, tb, hc, fc, c
    cdef long[:] corr = array.array("l", corrupt_at)
    cdef long[:] row
    cdef long[:] hv = array.array("l", bytes(horizon * sizeof(long)))
    cdef long[:] fv = array.array("l", bytes(horizon * sizeof(long)))
    rows = [_as_longs(r) for r in last]
    # adversarial counts need no per-validator timeline
    for t in range(horizon):
        tb = t + t_b
        fc = 0
        for v in range(n):
            if corr[v] <= tb:
                fc += 1
        fv[t] = fc
    for v in range(n):
        row = rows[v]
        c = corr[v]
        for t in range(min(horizon, width)):
            lo = t - t_s
            if lo < 0:
                lo = 0
            if c > t + t_c and row[t] < lo:
                hv[t] += 1
    return list(hv), list(fv)
