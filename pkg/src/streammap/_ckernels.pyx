# cython: language_level=3
"""Compiled versions of the hot kernels: the stress-majorization inner
loop and the packing collision scan. Must stay behaviorally equivalent
to streammap._pykernels (same accept/stop rules, same scan semantics)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND = "compiled"


def stress_value(cnp.ndarray[cnp.float64_t, ndim=2] x,
                 cnp.ndarray[cnp.float64_t, ndim=2] d,
                 cnp.ndarray[cnp.float64_t, ndim=2] w):
    """Weighted stress: sum over i<j of w_ij * (||x_i - x_j|| - d_ij)^2."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j
    cdef double s = 0.0, dx, dy, e, r
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i, 0] - x[j, 0]
            dy = x[i, 1] - x[j, 1]
            e = sqrt(dx * dx + dy * dy)
            r = e - d[i, j]
            s += w[i, j] * r * r
    return s


def smacof(cnp.ndarray[cnp.float64_t, ndim=2] d,
           cnp.ndarray[cnp.float64_t, ndim=2] w,
           cnp.ndarray[cnp.float64_t, ndim=2] vplus,
           cnp.ndarray[cnp.float64_t, ndim=2] x0,
           int max_iter,
           double rtol,
           double atol=0.0):
    """Stress majorization from x0; returns (positions, stress history)."""
    cdef Py_ssize_t n = x0.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x = np.array(x0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xn = np.empty((n, 2), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bx = np.empty((n, 2), dtype=np.float64)
    cdef Py_ssize_t i, j, it
    cdef double s, sn, dx, dy, e, ratio, rowsum0, acc0, acc1
    hist = []
    s = stress_value(x, d, w)
    hist.append(s)
    for it in range(max_iter):
        if s <= atol:
            break
        # bx = B(x) @ x without materializing B
        for i in range(n):
            acc0 = 0.0
            acc1 = 0.0
            rowsum0 = 0.0
            for j in range(n):
                if j == i:
                    continue
                dx = x[i, 0] - x[j, 0]
                dy = x[i, 1] - x[j, 1]
                e = sqrt(dx * dx + dy * dy)
                if e > 0.0:
                    ratio = w[i, j] * d[i, j] / e
                else:
                    ratio = 0.0
                acc0 += ratio * x[j, 0]
                acc1 += ratio * x[j, 1]
                rowsum0 += ratio
            bx[i, 0] = rowsum0 * x[i, 0] - acc0
            bx[i, 1] = rowsum0 * x[i, 1] - acc1
        for i in range(n):
            acc0 = 0.0
            acc1 = 0.0
            for j in range(n):
                acc0 += vplus[i, j] * bx[j, 0]
                acc1 += vplus[i, j] * bx[j, 1]
            xn[i, 0] = acc0
            xn[i, 1] = acc1
        sn = stress_value(xn, d, w)
        if sn > s:
            break
        if s - sn < rtol * s:
            break
        x, xn = xn, x
        s = sn
        hist.append(s)
    return np.array(x), np.asarray(hist, dtype=np.float64)


def first_free(cnp.ndarray[cnp.uint8_t, ndim=2] grid,
               long org_col,
               long org_row,
               cnp.ndarray[cnp.int64_t, ndim=2] cells,
               cnp.ndarray[cnp.int64_t, ndim=2] cands):
    """Index of the first candidate offset where the mask fits, else -1."""
    cdef Py_ssize_t h = grid.shape[0]
    cdef Py_ssize_t wdt = grid.shape[1]
    cdef Py_ssize_t m = cands.shape[0]
    cdef Py_ssize_t k = cells.shape[0]
    cdef Py_ssize_t i, j
    cdef long col, row
    cdef bint hit
    for i in range(m):
        hit = False
        for j in range(k):
            col = cells[j, 0] - org_col + cands[i, 0]
            row = cells[j, 1] - org_row + cands[i, 1]
            if 0 <= row < h and 0 <= col < wdt and grid[row, col]:
                hit = True
                break
        if not hit:
            return i
    return -1
