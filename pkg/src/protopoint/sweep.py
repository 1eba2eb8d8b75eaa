"""Parameter sweep harness over a synthetic-world fixture.

One parameter varies per sweep while the rest of the configuration is held
fixed. Because no segmentation model runs at desk scale, the predicted mask
for scoring is the surviving-component union upsampled to pixel resolution;
this proxy is exactly the spatial-candidate stage whose parameters the
sweeps probe.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import FixtureError
from .formats import ClassBankFile
from .metrics import ConfusionCounts, confusion, mean_over_classes, metrics
from .params import IccdParams, TsgParams
from .pipeline import build_class_bank, ground_query, upsample_patch_mask
from .synth import World
from .tsg import components_to_mask

SWEEPABLE = ("tau_l", "eta_cc", "delta", "tau_v", "shots")
_STAGE1 = ("shots",)


@dataclass(frozen=True)
class SweepSpec:
    """A single varied parameter plus the fixed remainder of the config."""

    parameter: str
    values: tuple
    bank_params: IccdParams = IccdParams()
    tsg_params: TsgParams = TsgParams()
    shots: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if self.parameter not in SWEEPABLE:
            raise FixtureError(
                f"unknown sweep parameter {self.parameter!r}; choose from {SWEEPABLE}"
            )
        if not self.values:
            raise FixtureError("sweep needs at least one value")


def _build_banks(world: World, params: IccdParams, shots: int | None) -> dict[str, ClassBankFile]:
    banks = {}
    for class_name, images in world.refs.items():
        if not images:
            raise FixtureError(f"fixture has no references for class {class_name!r}")
        chosen = sorted(images, key=lambda r: r.image_id)
        if shots is not None:
            if shots < 1 or shots > len(chosen):
                raise FixtureError(
                    f"shots={shots} outside [1, {len(chosen)}] for class {class_name!r}"
                )
            chosen = chosen[:shots]
        banks[class_name] = build_class_bank(
            class_name,
            [(r.image_id, r.grid, r.mask) for r in chosen],
            params,
            world.config.patch,
        )
    return banks


def _evaluate(world: World, banks: dict[str, ClassBankFile], tsg_params: TsgParams) -> dict:
    cfg = world.config
    micro = ConfusionCounts(0, 0, 0, 0)
    per_class: dict[str, ConfusionCounts] = {
        c: ConfusionCounts(0, 0, 0, 0) for c in cfg.classes
    }
    for query in world.queries:
        for class_name in cfg.classes:
            result = ground_query(
                query.grid, banks[class_name], tsg_params, cfg.image_w, cfg.image_h
            )
            patch_mask = components_to_mask(result.components, cfg.grid_h, cfg.grid_w)
            pred = upsample_patch_mask(patch_mask, cfg.image_h, cfg.image_w, class_name)
            counts = confusion(pred, query.gt[class_name])
            micro = micro + counts
            per_class[class_name] = per_class[class_name] + counts
    overall = metrics(micro)
    class_metrics = {c: metrics(k) for c, k in per_class.items()}
    miou = mean_over_classes(
        [m.iou for m in class_metrics.values()],
        [m.degenerate for m in class_metrics.values()],
    )
    return {
        "iou": overall.iou,
        "miou": miou,
        "f1": overall.f1,
        "precision": overall.precision,
        "recall": overall.recall,
        "fallback_used": any(b.fallback_used for b in banks.values()),
        "per_class_iou": {c: m.iou for c, m in class_metrics.items()},
    }


def run_sweep(spec: SweepSpec, world: World) -> list[dict]:
    """One result row per parameter value, in the order given."""
    if not world.queries:
        raise FixtureError("fixture has no queries")
    rows = []
    cached_banks: dict[str, ClassBankFile] | None = None
    for value in spec.values:
        bank_params = spec.bank_params
        tsg_params = spec.tsg_params
        shots = spec.shots
        if spec.parameter == "shots":
            shots = int(value)
        else:
            tsg_params = replace(tsg_params, **{spec.parameter: value})
        if spec.parameter in _STAGE1 or cached_banks is None:
            banks = _build_banks(world, bank_params, shots)
            if spec.parameter not in _STAGE1:
                cached_banks = banks
        else:
            banks = cached_banks
        row = {"parameter": spec.parameter, "value": value}
        row.update(_evaluate(world, banks, tsg_params))
        rows.append(row)
    return rows
