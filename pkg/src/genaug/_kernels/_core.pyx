# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled image kernels.

Bit-identical to ``numpy_backend``: same accumulation order (center tap
first, then symmetric pairs folded as t*(left+right)), same direction
quantization constants, same tie handling. Compiled with -ffp-contract=off
so no fused multiply-add sneaks in.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double TAN_22_5 = 0.41421356237309503
cdef double TAN_67_5 = 2.414213562373095


def correlate_sym_h(cnp.ndarray[cnp.float64_t, ndim=2] padded,
                    cnp.ndarray[cnp.float64_t, ndim=1] half_taps):
    cdef Py_ssize_t r = half_taps.shape[0] - 1
    cdef Py_ssize_t h = padded.shape[0]
    cdef Py_ssize_t w = padded.shape[1] - 2 * r
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((h, w), dtype=np.float64)
    cdef Py_ssize_t y, x, i
    cdef double acc
    for y in range(h):
        for x in range(w):
            acc = half_taps[0] * padded[y, x + r]
            for i in range(1, r + 1):
                acc = acc + half_taps[i] * (padded[y, x + r - i] + padded[y, x + r + i])
            out[y, x] = acc
    return out


def correlate_sym_v(cnp.ndarray[cnp.float64_t, ndim=2] padded,
                    cnp.ndarray[cnp.float64_t, ndim=1] half_taps):
    cdef Py_ssize_t r = half_taps.shape[0] - 1
    cdef Py_ssize_t h = padded.shape[0] - 2 * r
    cdef Py_ssize_t w = padded.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((h, w), dtype=np.float64)
    cdef Py_ssize_t y, x, i
    cdef double acc
    for y in range(h):
        for x in range(w):
            acc = half_taps[0] * padded[y + r, x]
            for i in range(1, r + 1):
                acc = acc + half_taps[i] * (padded[y + r - i, x] + padded[y + r + i, x])
            out[y, x] = acc
    return out


def correlate_antisym_h(cnp.ndarray[cnp.float64_t, ndim=2] padded,
                        cnp.ndarray[cnp.float64_t, ndim=1] half_taps):
    cdef Py_ssize_t r = half_taps.shape[0]
    cdef Py_ssize_t h = padded.shape[0]
    cdef Py_ssize_t w = padded.shape[1] - 2 * r
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((h, w), dtype=np.float64)
    cdef Py_ssize_t y, x, i
    cdef double acc
    for y in range(h):
        for x in range(w):
            acc = half_taps[0] * (padded[y, x + r + 1] - padded[y, x + r - 1])
            for i in range(2, r + 1):
                acc = acc + half_taps[i - 1] * (padded[y, x + r + i] - padded[y, x + r - i])
            out[y, x] = acc
    return out


def correlate_antisym_v(cnp.ndarray[cnp.float64_t, ndim=2] padded,
                        cnp.ndarray[cnp.float64_t, ndim=1] half_taps):
    cdef Py_ssize_t r = half_taps.shape[0]
    cdef Py_ssize_t h = padded.shape[0] - 2 * r
    cdef Py_ssize_t w = padded.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((h, w), dtype=np.float64)
    cdef Py_ssize_t y, x, i
    cdef double acc
    for y in range(h):
        for x in range(w):
            acc = half_taps[0] * (padded[y + r + 1, x] - padded[y + r - 1, x])
            for i in range(2, r + 1):
                acc = acc + half_taps[i - 1] * (padded[y + r + i, x] - padded[y + r - i, x])
            out[y, x] = acc
    return out


def nms_mask(cnp.ndarray[cnp.float64_t, ndim=2] mag,
             cnp.ndarray[cnp.float64_t, ndim=2] gx,
             cnp.ndarray[cnp.float64_t, ndim=2] gy):
    cdef Py_ssize_t h = mag.shape[0]
    cdef Py_ssize_t w = mag.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] keep = np.zeros((h, w), dtype=np.uint8)
    cdef Py_ssize_t y, x
    cdef double m, ax, ay, n1, n2
    cdef int dx1, dy1
    for y in range(h):
        for x in range(w):
            m = mag[y, x]
            if m <= 0:
                continue
            ax = -gx[y, x] if gx[y, x] < 0 else gx[y, x]
            ay = -gy[y, x] if gy[y, x] < 0 else gy[y, x]
            if ay <= TAN_22_5 * ax:
                dx1 = 1
                dy1 = 0
            elif ay > TAN_67_5 * ax:
                dx1 = 0
                dy1 = 1
            elif gx[y, x] * gy[y, x] > 0:
                dx1 = 1
                dy1 = 1
            else:
                dx1 = 1
                dy1 = -1
            n1 = 0.0
            if 0 <= y + dy1 < h and 0 <= x + dx1 < w:
                n1 = mag[y + dy1, x + dx1]
            n2 = 0.0
            if 0 <= y - dy1 < h and 0 <= x - dx1 < w:
                n2 = mag[y - dy1, x - dx1]
            if m >= n1 and m >= n2:
                keep[y, x] = 1
    return keep


def hysteresis(cnp.ndarray[cnp.uint8_t, ndim=2] strong,
               cnp.ndarray[cnp.uint8_t, ndim=2] candidate):
    cdef Py_ssize_t h = strong.shape[0]
    cdef Py_ssize_t w = strong.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] edges = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] stack = np.empty(h * w, dtype=np.int64)
    cdef Py_ssize_t top = 0
    cdef Py_ssize_t y, x, ny, nx
    cdef long long idx
    for y in range(h):
        for x in range(w):
            if strong[y, x] and candidate[y, x]:
                edges[y, x] = 1
                stack[top] = y * w + x
                top += 1
    while top > 0:
        top -= 1
        idx = stack[top]
        y = idx // w
        x = idx - y * w
        for ny in range(y - 1, y + 2):
            if ny < 0 or ny >= h:
                continue
            for nx in range(x - 1, x + 2):
                if nx < 0 or nx >= w:
                    continue
                if candidate[ny, nx] and not edges[ny, nx]:
                    edges[ny, nx] = 1
                    stack[top] = ny * w + nx
                    top += 1
    return edges
