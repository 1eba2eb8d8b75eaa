"""Grid-level primitives: normalization, mask-to-patch alignment, and
threshold-based foreground selection.

The flat patch index convention is ``p = i * grid_w + j`` (row-major)
everywhere in the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, EmptyMask, InvalidThreshold, ZeroVector
from .formats import AnnotationMask, FeatureGrid, PatchCoverage

ZERO_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class PatchIndexSet:
    """Strictly increasing flat patch indices into an n_patches grid."""

    indices: np.ndarray
    n_patches: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        object.__setattr__(self, "indices", idx)
        if idx.ndim != 1:
            raise DimMismatch("indices must be a 1-D array")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise DimMismatch("indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= self.n_patches:
                raise DimMismatch(
                    f"indices must lie in [0, {self.n_patches}), got "
                    f"[{idx[0]}, {idx[-1]}]"
                )

    def __len__(self) -> int:
        return int(self.indices.size)

    def as_mask(self) -> np.ndarray:
        """Boolean membership mask of length n_patches."""
        mask = np.zeros(self.n_patches, dtype=bool)
        mask[self.indices] = True
        return mask


def flat_index(i: int, j: int, grid_w: int) -> int:
    return i * grid_w + j


def l2_normalize(grid: FeatureGrid) -> FeatureGrid:
    """Scale every patch vector to unit L2 norm.

    Raises ZeroVector with the offending flat index when a norm falls below
    ``ZERO_NORM_FLOOR``.
    """
    data = grid.data.astype(np.float64)
    norms = np.linalg.norm(data, axis=1)
    bad = np.flatnonzero(norms < ZERO_NORM_FLOOR)
    if bad.size:
        raise ZeroVector(int(bad[0]))
    out = (data / norms[:, None]).astype(np.float32)
    return FeatureGrid(grid.grid_h, grid.grid_w, grid.dim, out, normalized=True)


def _resize_nearest(mask: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbour resize with centre-aligned sampling."""
    in_h, in_w = mask.shape
    rows = np.minimum(((np.arange(out_h) + 0.5) * in_h / out_h).astype(np.int64), in_h - 1)
    cols = np.minimum(((np.arange(out_w) + 0.5) * in_w / out_w).astype(np.int64), in_w - 1)
    return mask[rows[:, None], cols[None, :]]


def align_mask(
    mask: AnnotationMask, grid_h: int, grid_w: int, patch: int
) -> PatchCoverage:
    """Resize the binary mask to grid_h*patch x grid_w*patch (nearest
    neighbour, preserving binarity) and average-pool each patch x patch
    block into a coverage fraction.
    """
    if patch < 1:
        raise DimMismatch(f"patch size must be >= 1, got {patch}")
    if mask.data.size == 0:
        raise EmptyMask("mask has no pixels")
    resized = _resize_nearest(mask.data, grid_h * patch, grid_w * patch)
    blocks = resized.reshape(grid_h, patch, grid_w, patch)
    counts = blocks.sum(axis=(1, 3), dtype=np.int64)
    coverage = counts.astype(np.float64) / float(patch * patch)
    return PatchCoverage(grid_h, grid_w, coverage)


def select_foreground(cov: PatchCoverage, tau: float) -> PatchIndexSet:
    """Flat indices of patches with coverage strictly greater than tau."""
    if not 0.0 <= tau < 1.0:
        raise InvalidThreshold(f"coverage threshold must be in [0, 1), got {tau}")
    flat = cov.coverage.reshape(-1)
    indices = np.flatnonzero(flat > tau).astype(np.int64)
    return PatchIndexSet(indices, cov.grid_h * cov.grid_w)
