"""Line decompositions of a 2D pixel grid along integer offset directions.

Offsets are ``(dx, dy)``: ``dx`` steps along a row (column index), ``dy``
along a column (row index).  So ``(1, 0)`` walks each row left to right.
"""
import numpy as np


def grid_lines(shape, offset):
    """Maximal chains ``p, p + a, p + 2a, ...`` covering the grid.

    Returns ``(rows, cols, lengths)``: padded ``(n_lines, max_len)`` index arrays
    (padding repeats the last pixel of the chain) and the chain lengths.
    Chains are ordered by their starting pixel in row-major order.
    """
    h, w = shape
    dx, dy = (int(offset[0]), int(offset[1]))
    if dx == 0 and dy == 0:
        raise ValueError("offset must be nonzero")
    starts = []
    for i in range(h):
        for j in range(w):
            pi, pj = i - dy, j - dx
            if not (0 <= pi < h and 0 <= pj < w):
                starts.append((i, j))
    chains = []
    for i, j in starts:
        ci, cj = [], []
        while 0 <= i < h and 0 <= j < w:
            ci.append(i)
            cj.append(j)
            i += dy
            j += dx
        chains.append((ci, cj))
    lengths = np.array([len(c[0]) for c in chains], dtype=int)
    n = lengths.max()
    rows = np.empty((len(chains), n), dtype=int)
    cols = np.empty((len(chains), n), dtype=int)
    for k, (ci, cj) in enumerate(chains):
        rows[k, : len(ci)] = ci
        rows[k, len(ci):] = ci[-1]
        cols[k, : len(cj)] = cj
        cols[k, len(cj):] = cj[-1]
    return rows, cols, lengths


def neighbor_pairs(shape, offset):
    """Index arrays of all pixel pairs ``(p, p + a)`` lying inside the grid."""
    h, w = shape
    dx, dy = (int(offset[0]), int(offset[1]))
    i, j = np.mgrid[0:h, 0:w]
    i2, j2 = i + dy, j + dx
    ok = (i2 >= 0) & (i2 < h) & (j2 >= 0) & (j2 < w)
    return (i[ok], j[ok]), (i2[ok], j2[ok])
