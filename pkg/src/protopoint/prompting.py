"""Payload assembly: text-prompt formatting, confidence validation,
unit-square normalization, and the graceful-degradation decision.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DimMismatch, EmptyName, InvalidThreshold
from .formats import GroundingPayload, PayloadPoint, f32
from .tsg import PromptSet

VOWELS = "aeiou"


@dataclass(frozen=True)
class ClassName:
    """Raw class identifier and its display form (underscores to spaces)."""

    raw: str
    display: str

    @classmethod
    def from_raw(cls, raw: str) -> "ClassName":
        display = raw.replace("_", " ")
        if not display.strip():
            raise EmptyName(f"class name {raw!r} is empty after transformation")
        return cls(raw, display)


def format_text_prompt(name: ClassName) -> str:
    """Prefix the display name with its indefinite article.

    The article is chosen purely by the first letter ("an" before a vowel),
    accepting the occasional linguistic miss by design.
    """
    if not name.display:
        raise EmptyName("display name is empty")
    article = "an" if name.display[0].lower() in VOWELS else "a"
    return f"{article} {name.display}"


def validate_prompts(ps: PromptSet, tau_v: float) -> PromptSet:
    """Keep prompts whose score reaches tau_v, preserving order."""
    if not 0.0 < tau_v < 1.0:
        raise InvalidThreshold(f"tau_v must be in (0, 1), got {tau_v}")
    kept = tuple(p for p in ps.prompts if p.score >= tau_v)
    return PromptSet(kept, ps.image_w, ps.image_h)


def build_payload(
    name: ClassName, validated: PromptSet, image_w: int, image_h: int
) -> GroundingPayload:
    """Normalize prompt coordinates to the unit square and bundle them with
    the text prompt. An empty validated set flips the degradation flag so
    the downstream segmenter grounds from text alone.
    """
    if image_w < 1 or image_h < 1:
        raise DimMismatch("image dimensions must be positive")
    if (image_w, image_h) != (validated.image_w, validated.image_h):
        raise DimMismatch(
            f"payload dims {image_w}x{image_h} != prompt-set dims "
            f"{validated.image_w}x{validated.image_h}"
        )
    points = tuple(
        PayloadPoint(
            x_norm=f32(p.x_px / image_w),
            y_norm=f32(p.y_px / image_h),
            label=1,
            score=f32(p.score),
        )
        for p in validated.prompts
    )
    return GroundingPayload(
        class_name=name.raw,
        text_prompt=format_text_prompt(name),
        points=points,
        image_w=image_w,
        image_h=image_h,
        degraded_to_text_only=len(points) == 0,
    )
