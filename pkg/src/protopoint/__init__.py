"""Prototype feature banks and topographic point-prompt extraction.

Offline, annotated reference feature grids are distilled into per-class
prototype banks; at inference, dense cosine-similarity landscapes over
query grids are converted into validated multi-instance point prompts for
a downstream promptable segmenter, with an evaluation harness for the
resulting masks.
"""

from .bank import (
    RawBank,
    adaptive_threshold,
    build_raw_bank,
    distill,
    distill_single_reference,
    nn_match,
    score_coherence,
)
from .formats import (
    AnnotationMask,
    BankVector,
    ClassBankFile,
    FeatureGrid,
    GroundingPayload,
    PatchCoverage,
    PayloadPoint,
    read_bank,
    read_feature_grid,
    read_mask,
    read_payload,
    write_bank,
    write_feature_grid,
    write_mask,
    write_payload,
)
from .gridops import PatchIndexSet, align_mask, l2_normalize, select_foreground
from .kernels import backend_name
from .metrics import ConfusionCounts, MetricSet, confusion, mean_over_classes, metrics
from .params import IccdParams, TsgParams
from .pipeline import build_class_bank, ground_query
from .prompting import ClassName, build_payload, format_text_prompt, validate_prompts
from .sweep import SweepSpec, run_sweep
from .tsg import (
    Component,
    Peak,
    PromptPoint,
    PromptSet,
    SimilarityMap,
    connected_components,
    extract_peaks,
    loose_mask,
    similarity_map,
    to_prompt_set,
)

__version__ = "0.1.0"
