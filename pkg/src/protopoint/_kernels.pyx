# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: dense max-dot-product scans, 8-connected component
labelling and Chebyshev-window maxima.

Semantics match kernels_numpy: float64 accumulation over float32 inputs,
first-index tie-breaking, [-1, 1] clamping of cosine values. Patch loops
parallelize with OpenMP; each output element is produced by exactly one
thread so results do not depend on the thread count.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport INFINITY

cnp.import_array()


cdef inline double _clamp(double x) noexcept nogil:
    if x > 1.0:
        return 1.0
    if x < -1.0:
        return -1.0
    return x


def max_sim_map(const float[:, ::1] grid, const float[:, ::1] bank):
    """Per-patch maximum dot product against a bank, float32 clamped."""
    cdef Py_ssize_t n = grid.shape[0]
    cdef Py_ssize_t d = grid.shape[1]
    cdef Py_ssize_t m = bank.shape[0]
    if bank.shape[1] != d:
        raise ValueError("dim mismatch between grid and bank")
    out_arr = np.empty(n, dtype=np.float32)
    cdef float[::1] out = out_arr
    cdef Py_ssize_t p, k, t
    cdef double acc, best
    with nogil:
        for p in prange(n, schedule="static"):
            best = -INFINITY
            for k in range(m):
                acc = 0.0
                for t in range(d):
                    acc = acc + <double>grid[p, t] * <double>bank[k, t]
                if acc > best:
                    best = acc
            out[p] = <float>_clamp(best)
    return out_arr


def best_match(const float[:, ::1] vectors, const float[:, ::1] grid):
    """Nearest grid patch per vector: (indices int64, sims float64)."""
    cdef Py_ssize_t m = vectors.shape[0]
    cdef Py_ssize_t d = vectors.shape[1]
    cdef Py_ssize_t n = grid.shape[0]
    if grid.shape[1] != d:
        raise ValueError("dim mismatch between vectors and grid")
    idx_arr = np.empty(m, dtype=np.int64)
    sim_arr = np.empty(m, dtype=np.float64)
    cdef cnp.int64_t[::1] idx = idx_arr
    cdef double[::1] sim = sim_arr
    cdef Py_ssize_t v, p, t
    cdef double acc, best
    cdef Py_ssize_t best_p
    with nogil:
        for v in prange(m, schedule="static"):
            best = -INFINITY
            best_p = 0
            for p in range(n):
                acc = 0.0
                for t in range(d):
                    acc = acc + <double>vectors[v, t] * <double>grid[p, t]
                if acc > best:
                    best = acc
                    best_p = p
            idx[v] = best_p
            sim[v] = _clamp(best)
    return idx_arr, sim_arr


def row_max_offdiag(const float[:, ::1] vectors):
    """Per-row maximum dot product to any other row, float64 clamped."""
    cdef Py_ssize_t n = vectors.shape[0]
    cdef Py_ssize_t d = vectors.shape[1]
    if n < 2:
        raise ValueError("need at least two vectors")
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, t
    cdef double acc, best
    with nogil:
        for i in prange(n, schedule="static"):
            best = -INFINITY
            for j in range(n):
                if j == i:
                    continue
                acc = 0.0
                for t in range(d):
                    acc = acc + <double>vectors[i, t] * <double>vectors[j, t]
                if acc > best:
                    best = acc
            out[i] = _clamp(best)
    return out_arr


def label_components(const cnp.uint8_t[:, ::1] mask):
    """8-connected labels in row-major first-encounter order, 1-based."""
    cdef Py_ssize_t h = mask.shape[0]
    cdef Py_ssize_t w = mask.shape[1]
    labels_arr = np.zeros((h, w), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] labels = labels_arr
    stack_arr = np.empty(h * w, dtype=np.int64)
    cdef cnp.int64_t[::1] stack = stack_arr
    cdef Py_ssize_t i, j, top, ci, cj, ni, nj
    cdef cnp.int32_t next_label = 0
    for i in range(h):
        for j in range(w):
            if mask[i, j] == 0 or labels[i, j] != 0:
                continue
            next_label += 1
            labels[i, j] = next_label
            stack[0] = i * w + j
            top = 1
            while top > 0:
                top -= 1
                ci = stack[top] // w
                cj = stack[top] % w
                for ni in range(max(ci - 1, 0), min(ci + 2, h)):
                    for nj in range(max(cj - 1, 0), min(cj + 2, w)):
                        if mask[ni, nj] != 0 and labels[ni, nj] == 0:
                            labels[ni, nj] = next_label
                            stack[top] = ni * w + nj
                            top += 1
    return labels_arr


def window_max(const double[:, ::1] values, Py_ssize_t delta):
    """Chebyshev-window maximum with radius delta, -inf outside the grid."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    cdef Py_ssize_t h = values.shape[0]
    cdef Py_ssize_t w = values.shape[1]
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, ni, nj, i0, i1, j0, j1
    cdef double best
    with nogil:
        for i in prange(h, schedule="static"):
            i0 = i - delta if i - delta > 0 else 0
            i1 = i + delta + 1 if i + delta + 1 < h else h
            for j in range(w):
                j0 = j - delta if j - delta > 0 else 0
                j1 = j + delta + 1 if j + delta + 1 < w else w
                best = -INFINITY
                for ni in range(i0, i1):
                    for nj in range(j0, j1):
                        if values[ni, nj] > best:
                            best = values[ni, nj]
                out[i, j] = best
    return out_arr
