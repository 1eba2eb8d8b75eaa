"""End-to-end orchestration shared by the CLI and the sweep harness."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bank import build_raw_bank, distill, distill_single_reference
from .formats import AnnotationMask, ClassBankFile, FeatureGrid, GroundingPayload
from .gridops import align_mask, l2_normalize, select_foreground
from .params import IccdParams, TsgParams
from .prompting import ClassName, build_payload, validate_prompts
from .tsg import (
    Component,
    Peak,
    PromptSet,
    SimilarityMap,
    connected_components,
    extract_peaks,
    loose_mask,
    similarity_map,
    to_prompt_set,
)


def build_class_bank(
    class_name: str,
    refs: Sequence[tuple[str, FeatureGrid, AnnotationMask]],
    params: IccdParams,
    patch: int,
) -> ClassBankFile:
    """Stage I for one class: align masks, select foregrounds at both
    thresholds, and route to multi-reference distillation or the
    single-reference fallback based on the reference count.
    """
    prepared = []
    heldout = {}
    for image_id, grid, mask in refs:
        g = grid if grid.normalized else l2_normalize(grid)
        cov = align_mask(mask, g.grid_h, g.grid_w, patch)
        prepared.append((image_id, g, select_foreground(cov, params.tau_b)))
        heldout[image_id] = (g, select_foreground(cov, params.tau_t))
    raw = build_raw_bank(class_name, prepared)
    if len(raw.image_ids) == 1:
        return distill_single_reference(raw, params)
    return distill(raw, heldout, params)


@dataclass
class GroundResult:
    payload: GroundingPayload
    sim: SimilarityMap | None
    components: list[Component]
    peaks: list[Peak]
    prompts: PromptSet
    validated: PromptSet


def ground_query(
    query: FeatureGrid,
    bank: ClassBankFile,
    tsg_params: TsgParams,
    image_w: int,
    image_h: int,
) -> GroundResult:
    """Stage II for one (query, class) pair.

    An empty bank short-circuits to a degraded text-only payload; every
    other path runs the full landscape -> components -> peaks -> prompts
    chain.
    """
    name = ClassName.from_raw(bank.class_name)
    q = query if query.normalized else l2_normalize(query)
    if not bank.entries:
        empty = PromptSet((), image_w, image_h)
        return GroundResult(
            payload=build_payload(name, empty, image_w, image_h),
            sim=None,
            components=[],
            peaks=[],
            prompts=empty,
            validated=empty,
        )
    sim = similarity_map(q, bank)
    mask = loose_mask(sim, tsg_params.tau_l)
    comps = connected_components(mask, tsg_params.eta_cc)
    peaks = [p for comp in comps for p in extract_peaks(sim, comp, tsg_params.delta)]
    prompts = to_prompt_set(
        peaks, image_w, image_h, q.grid_h, q.grid_w, tsg_params.b_max
    )
    validated = validate_prompts(prompts, tsg_params.tau_v)
    payload = build_payload(name, validated, image_w, image_h)
    return GroundResult(payload, sim, comps, peaks, prompts, validated)


def upsample_patch_mask(
    patch_mask: np.ndarray, image_h: int, image_w: int, class_name: str = ""
) -> AnnotationMask:
    """Nearest-neighbour upsample of a boolean patch mask to pixel dims."""
    grid_h, grid_w = patch_mask.shape
    rows = np.minimum(
        ((np.arange(image_h) + 0.5) * grid_h / image_h).astype(np.int64), grid_h - 1
    )
    cols = np.minimum(
        ((np.arange(image_w) + 0.5) * grid_w / image_w).astype(np.int64), grid_w - 1
    )
    pixels = patch_mask[rows[:, None], cols[None, :]].astype(np.uint8)
    return AnnotationMask(image_h, image_w, pixels, class_name)
