"""Pure-numpy implementations of the hot image kernels.

These are the reference semantics for the compiled extension: every function
here must produce bit-identical output to its counterpart in ``_core.pyx``.
To make that possible the accumulation order is pinned:

* symmetric taps are folded as ``t0*v[x] + t1*(v[x-1]+v[x+1]) + ...`` so a
  mirrored input yields a bit-identical mirrored output (the inner pair sum
  commutes exactly in IEEE arithmetic);
* antisymmetric taps are folded as ``t1*(v[x+1]-v[x-1]) + ...`` so mirroring
  negates the result exactly.

All kernels are pure functions; no global state.
"""

from __future__ import annotations

import numpy as np


def correlate_sym_h(padded: np.ndarray, half_taps: np.ndarray) -> np.ndarray:
    """Horizontal valid correlation with a symmetric kernel.

    ``half_taps`` holds [t0, t1, ..., tr] (center first). ``padded`` must
    already carry r extra columns on each side.
    """
    r = half_taps.shape[0] - 1
    h, wp = padded.shape
    w = wp - 2 * r
    out = half_taps[0] * padded[:, r:r + w]
    for i in range(1, r + 1):
        out += half_taps[i] * (padded[:, r - i:r - i + w] + padded[:, r + i:r + i + w])
    return out


def correlate_sym_v(padded: np.ndarray, half_taps: np.ndarray) -> np.ndarray:
    """Vertical valid correlation with a symmetric kernel."""
    r = half_taps.shape[0] - 1
    hp, w = padded.shape
    h = hp - 2 * r
    out = half_taps[0] * padded[r:r + h, :]
    for i in range(1, r + 1):
        out += half_taps[i] * (padded[r - i:r - i + h, :] + padded[r + i:r + i + h, :])
    return out


def correlate_antisym_h(padded: np.ndarray, half_taps: np.ndarray) -> np.ndarray:
    """Horizontal valid correlation with an antisymmetric kernel.

    ``half_taps`` holds [t1, ..., tr]; the center tap is implicitly zero.
    Output at x is ``sum_i t_i * (v[x+i] - v[x-i])``.
    """
    r = half_taps.shape[0]
    h, wp = padded.shape
    w = wp - 2 * r
    out = half_taps[0] * (padded[:, r + 1:r + 1 + w] - padded[:, r - 1:r - 1 + w])
    for i in range(2, r + 1):
        out += half_taps[i - 1] * (padded[:, r + i:r + i + w] - padded[:, r - i:r - i + w])
    return out


def correlate_antisym_v(padded: np.ndarray, half_taps: np.ndarray) -> np.ndarray:
    """Vertical valid correlation with an antisymmetric kernel."""
    r = half_taps.shape[0]
    hp, w = padded.shape
    h = hp - 2 * r
    out = half_taps[0] * (padded[r + 1:r + 1 + h, :] - padded[r - 1:r - 1 + h, :])
    for i in range(2, r + 1):
        out += half_taps[i - 1] * (padded[r + i:r + i + h, :] - padded[r - i:r - i + h, :])
    return out


# Sector boundaries for gradient-direction quantization: tan(22.5 deg) and
# tan(67.5 deg). Literals must match _core.pyx exactly.
_TAN_22_5 = 0.41421356237309503
_TAN_67_5 = 2.414213562373095


def nms_mask(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Non-maximum suppression over 4 quantized gradient directions.

    A pixel survives when its magnitude is >= both neighbours along the
    quantized gradient direction (ties kept on both sides: the symmetric rule
    is what makes the edge map commute with horizontal flips). Out-of-image
    neighbours count as magnitude 0.
    """
    h, w = mag.shape
    pad = np.zeros((h + 2, w + 2), dtype=mag.dtype)
    pad[1:-1, 1:-1] = mag

    ax = np.abs(gx)
    ay = np.abs(gy)
    horiz = ay <= _TAN_22_5 * ax
    vert = ay > _TAN_67_5 * ax
    diag = ~(horiz | vert)
    # gx*gy > 0 means the gradient points down-right/up-left (y axis down).
    diag_dr = diag & (gx * gy > 0)
    diag_ur = diag & ~diag_dr

    east = pad[1:-1, 2:]
    west = pad[1:-1, :-2]
    north = pad[:-2, 1:-1]
    south = pad[2:, 1:-1]
    ne = pad[:-2, 2:]
    sw = pad[2:, :-2]
    nw = pad[:-2, :-2]
    se = pad[2:, 2:]

    n1 = np.where(horiz, east, np.where(vert, south, np.where(diag_dr, se, ne)))
    n2 = np.where(horiz, west, np.where(vert, north, np.where(diag_dr, nw, sw)))
    keep = (mag > 0) & (mag >= n1) & (mag >= n2)
    return keep.astype(np.uint8)


def hysteresis(strong: np.ndarray, candidate: np.ndarray) -> np.ndarray:
    """Keep candidate pixels 8-connected to a strong pixel.

    Iterative dilation; the fixed point is the same set a flood fill reaches,
    so the result matches the BFS in the compiled backend exactly.
    """
    strong = strong.astype(bool)
    candidate = candidate.astype(bool)
    edges = strong & candidate
    while True:
        padded = np.zeros((edges.shape[0] + 2, edges.shape[1] + 2), dtype=bool)
        padded[1:-1, 1:-1] = edges
        grown = np.zeros_like(edges)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dy == 0 and dx == 0:
                    continue
                grown |= padded[1 + dy:padded.shape[0] - 1 + dy,
                                1 + dx:padded.shape[1] - 1 + dx]
        new_edges = edges | (grown & candidate)
        if np.array_equal(new_edges, edges):
            return edges.astype(np.uint8)
        edges = new_edges
