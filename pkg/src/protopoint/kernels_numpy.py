"""Pure-numpy implementations of the hot kernels.

These mirror the compiled extension exactly: dot products accumulate in
float64 from float32 inputs, maxima are taken over those float64 values, and
argmax ties resolve to the smallest flat index. Matrix products are chunked
so memory stays bounded on full-size grids.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 512


def max_sim_map(grid: np.ndarray, bank: np.ndarray) -> np.ndarray:
    """Per-patch maximum dot product against a bank.

    grid: (n_patches, dim) float32; bank: (m, dim) float32, m >= 1.
    Returns float32 (n_patches,) clamped to [-1, 1].
    """
    g = grid.astype(np.float64)
    b = bank.astype(np.float64)
    out = np.empty(g.shape[0], dtype=np.float64)
    for start in range(0, g.shape[0], _CHUNK):
        stop = min(start + _CHUNK, g.shape[0])
        out[start:stop] = (g[start:stop] @ b.T).max(axis=1)
    return np.clip(out, -1.0, 1.0).astype(np.float32)


def best_match(vectors: np.ndarray, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest patch in `grid` for each row of `vectors`.

    Returns (indices int64 (m,), sims float64 (m,)); ties keep the smallest
    flat index, sims are clamped to [-1, 1].
    """
    v = vectors.astype(np.float64)
    g = grid.astype(np.float64)
    m = v.shape[0]
    idx = np.empty(m, dtype=np.int64)
    sim = np.empty(m, dtype=np.float64)
    for start in range(0, m, _CHUNK):
        stop = min(start + _CHUNK, m)
        sims = v[start:stop] @ g.T
        best = sims.argmax(axis=1)
        idx[start:stop] = best
        sim[start:stop] = np.take_along_axis(sims, best[:, None], axis=1)[:, 0]
    return idx, np.clip(sim, -1.0, 1.0)


def row_max_offdiag(vectors: np.ndarray) -> np.ndarray:
    """Per-row maximum dot product to any *other* row, float64, clamped."""
    n = vectors.shape[0]
    if n < 2:
        raise ValueError("need at least two vectors")
    v = vectors.astype(np.float64)
    out = np.empty(n, dtype=np.float64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        sims = v[start:stop] @ v.T
        rows = np.arange(start, stop)
        sims[rows - start, rows] = -np.inf
        out[start:stop] = sims.max(axis=1)
    return np.clip(out, -1.0, 1.0)


def label_components(mask: np.ndarray) -> np.ndarray:
    """8-connected component labels, assigned in row-major first-encounter
    order starting at 1; background stays 0.
    """
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    next_label = 0
    stack: list[tuple[int, int]] = []
    for i in range(h):
        for j in range(w):
            if not mask[i, j] or labels[i, j]:
                continue
            next_label += 1
            labels[i, j] = next_label
            stack.append((i, j))
            while stack:
                ci, cj = stack.pop()
                for ni in range(max(ci - 1, 0), min(ci + 2, h)):
                    for nj in range(max(cj - 1, 0), min(cj + 2, w)):
                        if mask[ni, nj] and not labels[ni, nj]:
                            labels[ni, nj] = next_label
                            stack.append((ni, nj))
    return labels


def window_max(values: np.ndarray, delta: int) -> np.ndarray:
    """Chebyshev-window maximum with radius `delta`, -inf padded."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    h, w = values.shape
    padded = np.full((h + 2 * delta, w + 2 * delta), -np.inf, dtype=np.float64)
    padded[delta : delta + h, delta : delta + w] = values
    windows = np.lib.stride_tricks.sliding_window_view(
        padded, (2 * delta + 1, 2 * delta + 1)
    )
    return windows.max(axis=(2, 3))
