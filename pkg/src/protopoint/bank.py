"""Per-class prototype bank construction and coherence distillation.

Stage I runs offline. Foreground patch vectors from annotated reference
grids form a raw bank; distillation keeps only vectors whose
nearest-neighbour matches on held-out same-class images land inside the
class foreground at a rate above an adaptive per-class threshold. Classes
with a single reference fall back to within-image similarity scoring; the
output format is identical so downstream stages never distinguish the two.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .errors import (
    DimMismatch,
    EmptyScoreSet,
    SingleReference,
    TooFewVectors,
    UnnormalizedGrid,
)
from .formats import BankVector, ClassBankFile, FeatureGrid
from .gridops import PatchIndexSet
from .params import IccdParams

logger = logging.getLogger(__name__)

UNSCORED = -1.0


@dataclass(frozen=True)
class RawBank:
    """Foreground vectors grouped by source image, in sorted-id order."""

    class_name: str
    dim: int
    per_image: dict[str, tuple[BankVector, ...]]

    def __post_init__(self):
        ordered = dict(sorted(self.per_image.items()))
        object.__setattr__(self, "per_image", ordered)

    @property
    def image_ids(self) -> list[str]:
        return list(self.per_image.keys())

    @property
    def n_vectors(self) -> int:
        return sum(len(v) for v in self.per_image.values())


def _require_normalized(grid: FeatureGrid, what: str) -> None:
    if not grid.normalized:
        raise UnnormalizedGrid(f"{what} must be L2-normalized")


def build_raw_bank(
    class_name: str,
    refs: Sequence[tuple[str, FeatureGrid, PatchIndexSet]],
) -> RawBank:
    """Collect one BankVector per (reference image, foreground patch).

    Every grid must be normalized and share a feature dimension; images
    with an empty foreground still appear (with zero vectors) so the
    deterministic image ordering is complete.
    """
    if not refs:
        raise DimMismatch("at least one reference is required")
    dim = refs[0][1].dim
    per_image: dict[str, tuple[BankVector, ...]] = {}
    for image_id, grid, fg in refs:
        if image_id in per_image:
            raise DimMismatch(f"duplicate source image id {image_id!r}")
        _require_normalized(grid, f"reference grid {image_id!r}")
        if grid.dim != dim:
            raise DimMismatch(f"grid {image_id!r} has dim {grid.dim}, expected {dim}")
        if fg.n_patches != grid.n_patches:
            raise DimMismatch(
                f"index set for {image_id!r} sized for {fg.n_patches} patches, "
                f"grid has {grid.n_patches}"
            )
        per_image[image_id] = tuple(
            BankVector(grid.data[p].copy(), image_id, int(p), UNSCORED)
            for p in fg.indices
        )
    return RawBank(class_name, dim, per_image)


def nn_match(v: np.ndarray, target: FeatureGrid) -> tuple[int, float]:
    """Best-matching patch of `target` for a unit vector.

    Returns (flat index, similarity); ties resolve to the smallest index.
    """
    _require_normalized(target, "target grid")
    if v.shape != (target.dim,):
        raise DimMismatch(f"vector shape {v.shape} != ({target.dim},)")
    idx, sim = kernels.best_match(
        np.ascontiguousarray(v, dtype=np.float32)[None, :], target.data
    )
    return int(idx[0]), float(sim[0])


def score_coherence(
    v: BankVector,
    heldout: Sequence[tuple[FeatureGrid, PatchIndexSet]],
    params: IccdParams,
) -> float:
    """Fraction of gated nearest-neighbour matches landing in foreground.

    A held-out target counts only when its best-match similarity clears the
    floor ``xi``; with fewer than ``eta_min`` such targets the vector is
    unscorable and the sentinel -1 is returned.
    """
    good = 0
    valid = 0
    for grid, fg in heldout:
        p_star, sim = nn_match(v.vector, grid)
        if sim >= params.xi:
            valid += 1
            if fg.as_mask()[p_star]:
                good += 1
    if valid < params.eta_min:
        return UNSCORED
    return good / valid


def adaptive_threshold(scores: Sequence[float], params: IccdParams) -> float:
    """clip(scale * Q75(scores), kappa_lo, kappa_hi).

    The 75th percentile interpolates linearly between closest ranks.
    Sentinel values must already be excluded; scores live in [0, 1].
    """
    if len(scores) == 0:
        raise EmptyScoreSet("cannot derive a threshold from zero scores")
    arr = np.sort(np.asarray(scores, dtype=np.float64))
    if float(arr[0]) < 0.0 or float(arr[-1]) > 1.0:
        raise ValueError("scores must lie in [0, 1] (sentinels excluded)")
    pos = 0.75 * (arr.size - 1)
    lo = int(np.floor(pos))
    frac = pos - lo
    q75 = float(arr[lo]) if frac == 0.0 else float(
        arr[lo] + frac * (arr[lo + 1] - arr[lo])
    )
    return float(min(max(params.scale * q75, params.kappa_lo), params.kappa_hi))


def _rank_key(entry: BankVector):
    return (-entry.score, entry.source_image_id, entry.patch_flat_index)


def _select_top_k(scored: list[BankVector], kappa: float, k: int) -> list[BankVector]:
    eligible = [e for e in scored if e.score >= kappa]
    eligible.sort(key=_rank_key)
    return eligible[:k]


def distill(
    raw: RawBank,
    heldout: Mapping[str, tuple[FeatureGrid, PatchIndexSet]],
    params: IccdParams,
) -> ClassBankFile:
    """Multi-reference coherence distillation.

    Scores vectors from the first ``n_s`` images (sorted by id) against all
    other reference images, derives the adaptive threshold from the scored
    pool, and keeps the top-k eligible vectors ordered by (score desc,
    image id asc, patch index asc).
    """
    ids = raw.image_ids
    if len(ids) < 2:
        raise SingleReference(
            "distill requires >= 2 reference images; use the single-reference path"
        )
    missing = [i for i in ids if i not in heldout]
    if missing:
        raise DimMismatch(f"held-out grids missing for images {missing}")
    fg_masks: dict[str, np.ndarray] = {}
    for image_id in ids:
        grid, fg = heldout[image_id]
        _require_normalized(grid, f"held-out grid {image_id!r}")
        if grid.dim != raw.dim:
            raise DimMismatch(
                f"held-out grid {image_id!r} has dim {grid.dim}, expected {raw.dim}"
            )
        if fg.n_patches != grid.n_patches:
            raise DimMismatch(f"index set for {image_id!r} does not fit its grid")
        fg_masks[image_id] = fg.as_mask()

    scored: list[BankVector] = []
    for source_id in ids[: params.n_s]:
        vectors = raw.per_image[source_id]
        if not vectors:
            continue
        stacked = np.stack([e.vector for e in vectors])
        good = np.zeros(len(vectors), dtype=np.int64)
        valid = np.zeros(len(vectors), dtype=np.int64)
        for target_id in ids:
            if target_id == source_id:
                continue
            grid, _ = heldout[target_id]
            idx, sim = kernels.best_match(stacked, grid.data)
            gate = sim >= params.xi
            valid += gate
            good += gate & fg_masks[target_id][idx]
        for e, g, v in zip(vectors, good, valid):
            if v >= params.eta_min:
                scored.append(
                    BankVector(e.vector, e.source_image_id, e.patch_flat_index, g / v)
                )

    if not scored:
        logger.warning(
            "class %r: no vector accumulated %d valid matches; emitting an "
            "empty bank (grounding will degrade to text-only)",
            raw.class_name,
            params.eta_min,
        )
        return ClassBankFile(
            class_name=raw.class_name,
            dim=raw.dim,
            entries=(),
            params=params,
            fallback_used=False,
            kappa_c=params.kappa_lo,
        )

    kappa_c = adaptive_threshold([e.score for e in scored], params)
    retained = _select_top_k(scored, kappa_c, params.k)
    return ClassBankFile(
        class_name=raw.class_name,
        dim=raw.dim,
        entries=tuple(retained),
        params=params,
        fallback_used=False,
        kappa_c=kappa_c,
    )


def distill_single_reference(raw: RawBank, params: IccdParams) -> ClassBankFile:
    """Single-reference fallback: score by within-image similarity.

    Each vector's score is its maximum cosine to any *other* foreground
    vector of the same image; thresholding and top-k selection mirror the
    multi-reference path and the output format is identical.
    """
    ids = raw.image_ids
    if len(ids) != 1:
        raise DimMismatch(
            f"single-reference path requires exactly one image, got {len(ids)}"
        )
    vectors = raw.per_image[ids[0]]
    if len(vectors) < 2:
        raise TooFewVectors(
            f"within-image scoring needs >= 2 foreground vectors, got {len(vectors)}"
        )
    stacked = np.stack([e.vector for e in vectors])
    omega = kernels.row_max_offdiag(stacked)
    scored = [
        BankVector(e.vector, e.source_image_id, e.patch_flat_index, float(w))
        for e, w in zip(vectors, omega)
        if w >= 0.0
    ]
    if not scored:
        logger.warning(
            "class %r: all within-image similarities negative; emitting an "
            "empty bank (grounding will degrade to text-only)",
            raw.class_name,
        )
        return ClassBankFile(
            class_name=raw.class_name,
            dim=raw.dim,
            entries=(),
            params=params,
            fallback_used=True,
            kappa_c=params.kappa_lo,
        )
    kappa_c = adaptive_threshold([e.score for e in scored], params)
    retained = _select_top_k(scored, kappa_c, params.k)
    return ClassBankFile(
        class_name=raw.class_name,
        dim=raw.dim,
        entries=tuple(retained),
        params=params,
        fallback_used=True,
        kappa_c=kappa_c,
    )
