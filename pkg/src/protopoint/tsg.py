"""Similarity-landscape grounding: dense max-cosine maps, loose candidate
masks, 8-connected component filtering, windowed peak detection with greedy
Euclidean NMS, and pixel-space prompt emission.

Every emitted prompt's score is at least the loose threshold by
construction, and each surviving component contributes at least one peak.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    DimMismatch,
    EmptyBank,
    EmptyComponent,
    InvalidThreshold,
    UnnormalizedGrid,
)
from .formats import ClassBankFile, FeatureGrid


@dataclass(frozen=True)
class SimilarityMap:
    """Max-cosine landscape of one class over one query grid."""

    grid_h: int
    grid_w: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid_h, self.grid_w):
            raise DimMismatch(
                f"map shape {self.values.shape} != ({self.grid_h}, {self.grid_w})"
            )
        if self.values.dtype != np.float32:
            raise DimMismatch("map values must be float32")
        if self.values.size and (
            float(self.values.min()) < -1.0 or float(self.values.max()) > 1.0
        ):
            raise DimMismatch("map values must lie in [-1, 1]")


@dataclass(frozen=True)
class Component:
    """8-connected set of patch positions from one loose mask."""

    component_id: int
    patches: frozenset[tuple[int, int]]

    def __post_init__(self):
        object.__setattr__(self, "patches", frozenset(self.patches))
        if self.patches and not self._is_connected():
            raise DimMismatch("component patches are not 8-connected")

    def _is_connected(self) -> bool:
        remaining = set(self.patches)
        stack = [min(remaining)]
        remaining.discard(stack[0])
        while stack:
            i, j = stack.pop()
            for ni in (i - 1, i, i + 1):
                for nj in (j - 1, j, j + 1):
                    if (ni, nj) in remaining:
                        remaining.discard((ni, nj))
                        stack.append((ni, nj))
        return not remaining

    @property
    def size(self) -> int:
        return len(self.patches)


@dataclass(frozen=True)
class Peak:
    i: int
    j: int
    score: float
    component_id: int


@dataclass(frozen=True)
class PromptPoint:
    x_px: float
    y_px: float
    score: float


@dataclass(frozen=True)
class PromptSet:
    """Pixel-space point prompts ordered by descending score."""

    prompts: tuple[PromptPoint, ...]
    image_w: int
    image_h: int

    def __post_init__(self):
        object.__setattr__(self, "prompts", tuple(self.prompts))
        scores = [p.score for p in self.prompts]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise DimMismatch("prompts must be sorted by score descending")
        for p in self.prompts:
            if not (0.0 < p.x_px < self.image_w and 0.0 < p.y_px < self.image_h):
                raise DimMismatch(
                    f"prompt ({p.x_px}, {p.y_px}) outside image "
                    f"{self.image_w}x{self.image_h}"
                )


def similarity_map(query: FeatureGrid, bank: ClassBankFile) -> SimilarityMap:
    """values[i, j] = max over bank entries of the dot with query patch (i, j)."""
    if not bank.entries:
        raise EmptyBank(f"bank for class {bank.class_name!r} has no entries")
    if not query.normalized:
        raise UnnormalizedGrid("query grid must be L2-normalized")
    if bank.dim != query.dim:
        raise DimMismatch(f"bank dim {bank.dim} != query dim {query.dim}")
    values = kernels.max_sim_map(query.data, bank.vectors())
    return SimilarityMap(query.grid_h, query.grid_w, values.reshape(query.grid_h, query.grid_w))


def loose_mask(sim: SimilarityMap, tau_l: float) -> np.ndarray:
    """Boolean patch mask where the landscape reaches tau_l (inclusive)."""
    if not 0.0 < tau_l < 1.0:
        raise InvalidThreshold(f"tau_l must be in (0, 1), got {tau_l}")
    return sim.values.astype(np.float64) >= tau_l


def connected_components(mask: np.ndarray, eta_cc: int) -> list[Component]:
    """Partition the mask into maximal 8-connected regions and keep those
    with at least eta_cc patches. Component ids follow row-major
    first-encounter order over the full partition, so ids of survivors may
    be non-contiguous.
    """
    if eta_cc < 1:
        raise InvalidThreshold(f"eta_cc must be >= 1, got {eta_cc}")
    labels = kernels.label_components(np.ascontiguousarray(mask, dtype=np.uint8))
    n = int(labels.max())
    out: list[Component] = []
    for label in range(1, n + 1):
        ii, jj = np.nonzero(labels == label)
        if ii.size >= eta_cc:
            patches = frozenset(zip(ii.tolist(), jj.tolist()))
            out.append(Component(label - 1, patches))
    return out


def extract_peaks(sim: SimilarityMap, comp: Component, delta: int) -> list[Peak]:
    """Local maxima of the component-restricted landscape, thinned by NMS.

    A patch is a candidate when it attains the maximum of its
    (2*delta+1)^2 Chebyshev window (plateau ties all qualify). Candidates
    are visited in (score desc, i asc, j asc) order and kept only when no
    retained peak lies within Euclidean distance delta. At least one peak
    is always returned.
    """
    if not comp.patches:
        raise EmptyComponent("cannot extract peaks from an empty component")
    if delta < 1:
        raise InvalidThreshold(f"delta must be >= 1, got {delta}")
    masked = np.full((sim.grid_h, sim.grid_w), -np.inf, dtype=np.float64)
    members = sorted(comp.patches)
    rows = np.fromiter((p[0] for p in members), dtype=np.int64)
    cols = np.fromiter((p[1] for p in members), dtype=np.int64)
    masked[rows, cols] = sim.values[rows, cols]
    wmax = kernels.window_max(masked, delta)
    candidates = [
        (i, j) for i, j in members if masked[i, j] == wmax[i, j]
    ]
    if not candidates:
        # unreachable in normal operation: the component's global maximum
        # always equals its own window maximum
        best = max(members, key=lambda p: (masked[p[0], p[1]], -p[0], -p[1]))
        candidates = [best]
    candidates.sort(key=lambda p: (-masked[p[0], p[1]], p[0], p[1]))
    kept: list[tuple[int, int]] = []
    limit = float(delta) * float(delta)
    for ci, cj in candidates:
        if all((ci - ki) ** 2 + (cj - kj) ** 2 > limit for ki, kj in kept):
            kept.append((ci, cj))
    return [
        Peak(i, j, float(sim.values[i, j]), comp.component_id) for i, j in kept
    ]


def to_prompt_set(
    peaks: list[Peak],
    image_w: int,
    image_h: int,
    grid_h: int,
    grid_w: int,
    b_max: int | None = None,
) -> PromptSet:
    """Map peaks to the centres of their patches in pixel space, merge
    across components by descending score, and optionally truncate.
    """
    if image_w < grid_w or image_h < grid_h:
        raise DimMismatch(
            f"image {image_w}x{image_h} smaller than grid {grid_w}x{grid_h}"
        )
    ordered = sorted(peaks, key=lambda p: (-p.score, p.i, p.j))
    if b_max is not None:
        ordered = ordered[:b_max]
    prompts = tuple(
        PromptPoint(
            x_px=(p.j + 0.5) * image_w / grid_w,
            y_px=(p.i + 0.5) * image_h / grid_h,
            score=p.score,
        )
        for p in ordered
    )
    return PromptSet(prompts, image_w, image_h)


def components_to_mask(
    components: list[Component], grid_h: int, grid_w: int
) -> np.ndarray:
    """Union of surviving components as a boolean patch mask."""
    out = np.zeros((grid_h, grid_w), dtype=bool)
    for comp in components:
        for i, j in comp.patches:
            out[i, j] = True
    return out


def render_landscape(sim: SimilarityMap, tau_l: float) -> np.ndarray:
    """8-bit render: linear map of [tau_l - 0.2, 1.0] onto [0, 255], clamped."""
    lo = tau_l - 0.2
    span = 1.0 - lo
    u = (sim.values.astype(np.float64) - lo) / span
    return np.rint(np.clip(u, 0.0, 1.0) * 255.0).astype(np.uint8)
