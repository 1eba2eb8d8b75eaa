"""Command-line front end.

Subcommands: synth, build-bank, ground, eval, sweep, render.
Exit codes: 0 success (including graceful degradation), 1 validation
failure, 2 I/O or file-format failure.

Threshold defaults follow the ablation-validated configuration
(tau_l=0.80, eta_cc=4, delta=10, tau_v=tau_l); the alternative reported
configuration (tau_l=0.5, eta_cc=5, delta=3) is reachable through the same
flags and trades precision for recall.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import kernels
from .errors import FormatError, ProtoPointError, ValidationError
from .formats import (
    read_bank,
    read_feature_grid,
    read_mask,
    write_bank,
    write_gray_pgm,
    write_mask,
    write_payload,
)
from .metrics import (
    confusion,
    format_table,
    mean_over_classes,
    metrics,
    report_json,
)
from .params import IccdParams, TsgParams
from .pipeline import build_class_bank, ground_query, upsample_patch_mask
from .sweep import SWEEPABLE, SweepSpec, run_sweep
from .synth import WorldConfig, generate_world, load_world, write_world
from .tsg import components_to_mask, render_landscape


def _iccd_options(fn):
    opts = [
        click.option("--tau-b", type=float, default=0.7, show_default=True,
                     help="Strict coverage threshold for bank-side foreground patches."),
        click.option("--tau-t", type=float, default=0.3, show_default=True,
                     help="Looser coverage threshold for held-out target masks."),
        click.option("--xi", type=float, default=0.0, show_default=True,
                     help="Similarity floor below which a best match is ignored."),
        click.option("--eta-min", type=int, default=3, show_default=True,
                     help="Minimum valid matches a vector needs to be scored."),
        click.option("--n-s", type=int, default=50, show_default=True,
                     help="Maximum number of scored source images per class."),
        click.option("--k", type=int, default=500, show_default=True,
                     help="Maximum refined bank size per class."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _tsg_options(fn):
    opts = [
        click.option("--tau-l", type=float, default=0.80, show_default=True,
                     help="Loose landscape threshold delineating candidate regions "
                          "(alternative configuration: 0.5)."),
        click.option("--eta-cc", type=int, default=4, show_default=True,
                     help="Minimum connected-component size in patches "
                          "(alternative configuration: 5)."),
        click.option("--delta", type=int, default=10, show_default=True,
                     help="Inter-peak distance for local maxima and NMS, in patch "
                          "units (alternative configuration: 3)."),
        click.option("--tau-v", type=float, default=0.80, show_default=True,
                     help="Per-prompt validation floor; keep >= --tau-l so it gates "
                          "rather than duplicates the loose threshold."),
        click.option("--b-max", type=int, default=None,
                     help="Optional cap on emitted prompts (default: keep all)."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@click.group()
def cli():
    """Prototype feature banks and topographic point-prompt extraction."""
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")


@cli.command()
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--seed", type=int, default=7, show_default=True,
              help="Seed; fully determines every generated byte.")
@click.option("--classes", type=str, default="alpha,beta_leaf,gamma", show_default=True)
@click.option("--refs", "n_refs", type=int, default=10, show_default=True)
@click.option("--queries", "n_queries", type=int, default=20, show_default=True)
@click.option("--grid", type=int, default=32, show_default=True,
              help="Patch grid height and width.")
@click.option("--dim", type=int, default=16, show_default=True)
@click.option("--patch", type=int, default=16, show_default=True)
@click.option("--max-instances", type=int, default=4, show_default=True)
@click.option("--cone-deg", type=float, default=10.0, show_default=True,
              help="Half-angle of the foreground feature cone, degrees.")
@click.option("--bg-leak", type=float, default=0.15, show_default=True,
              help="Maximum in-span leakage of background features.")
def synth(out, seed, classes, n_refs, n_queries, grid, dim, patch, max_instances,
          cone_deg, bg_leak):
    """Generate a seeded synthetic dataset for model-free end-to-end runs."""
    cfg = WorldConfig(
        seed=seed,
        classes=tuple(c for c in classes.split(",") if c),
        n_refs=n_refs,
        n_queries=n_queries,
        grid_h=grid,
        grid_w=grid,
        dim=dim,
        patch=patch,
        max_instances=max_instances,
        cone_deg=cone_deg,
        bg_leak=bg_leak,
    )
    world = generate_world(cfg)
    write_world(world, out)
    click.echo(f"world written to {out}")


@cli.command("build-bank")
@click.option("--refs", "refs_dir", type=click.Path(path_type=Path, exists=True, file_okay=False), required=True,
              help="Directory of reference feature grids (*.srfg).")
@click.option("--masks", "masks_dir", type=click.Path(path_type=Path, exists=True, file_okay=False), required=True,
              help="Directory of matching annotation masks (<stem>.pgm).")
@click.option("--class-name", type=str, required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@_iccd_options
def build_bank(refs_dir, masks_dir, class_name, out, tau_b, tau_t, xi, eta_min, n_s, k):
    """Build and distill one class bank from annotated reference grids."""
    params = IccdParams(tau_b=tau_b, tau_t=tau_t, xi=xi, eta_min=eta_min, n_s=n_s, k=k)
    grid_paths = sorted(refs_dir.glob("*.srfg"))
    if not grid_paths:
        raise ValidationError(f"no .srfg files under {refs_dir}")
    refs = []
    for grid_path in grid_paths:
        mask_path = masks_dir / f"{grid_path.stem}.pgm"
        if not mask_path.exists():
            raise ValidationError(f"no mask for reference {grid_path.stem!r}")
        refs.append(
            (grid_path.stem, read_feature_grid(grid_path), read_mask(mask_path, class_name))
        )
    bank = build_class_bank(class_name, refs, params, patch=_infer_patch(refs))
    write_bank(bank, out)
    click.echo(
        f"bank {class_name}: {len(bank.entries)} entries, kappa_c={bank.kappa_c:.4f}, "
        f"fallback={'yes' if bank.fallback_used else 'no'}"
    )


def _infer_patch(refs) -> int:
    """Patch size from mask/grid ratio; falls back to 16 when ambiguous."""
    _, grid, mask = refs[0]
    if mask.height % grid.grid_h == 0 and mask.width % grid.grid_w == 0:
        ph = mask.height // grid.grid_h
        pw = mask.width // grid.grid_w
        if ph == pw and ph >= 1:
            return ph
    return 16


@cli.command()
@click.option("--query", "query_path", type=click.Path(path_type=Path, exists=True, dir_okay=False), required=True)
@click.option("--bank", "bank_path", type=click.Path(path_type=Path, exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Output payload JSON.")
@click.option("--image-w", type=int, default=None, help="Original image width "
              "(default: grid width x --patch).")
@click.option("--image-h", type=int, default=None, help="Original image height "
              "(default: grid height x --patch).")
@click.option("--patch", type=int, default=16, show_default=True)
@click.option("--render", "render_path", type=click.Path(path_type=Path), default=None,
              help="Also write the similarity landscape as an 8-bit PGM.")
@click.option("--emit-mask", "mask_path", type=click.Path(path_type=Path), default=None,
              help="Also write the surviving-component mask at image resolution.")
@_tsg_options
def ground(query_path, bank_path, out, image_w, image_h, patch, render_path,
           mask_path, tau_l, eta_cc, delta, tau_v, b_max):
    """Convert one query grid + class bank into a grounding payload."""
    query = read_feature_grid(query_path)
    bank = read_bank(bank_path)
    tsg_params = TsgParams(tau_l=tau_l, eta_cc=eta_cc, delta=delta, tau_v=tau_v, b_max=b_max)
    w = image_w if image_w is not None else query.grid_w * patch
    h = image_h if image_h is not None else query.grid_h * patch
    result = ground_query(query, bank, tsg_params, w, h)
    write_payload(result.payload, out)
    if render_path is not None:
        if result.sim is None:
            click.echo("render skipped: empty bank produced no landscape", err=True)
        else:
            write_gray_pgm(render_landscape(result.sim, tau_l), render_path)
    if mask_path is not None:
        patch_mask = components_to_mask(result.components, query.grid_h, query.grid_w)
        write_mask(upsample_patch_mask(patch_mask, h, w, bank.class_name), mask_path)
    state = "degraded to text-only" if result.payload.degraded_to_text_only else (
        f"{len(result.payload.points)} point(s)"
    )
    click.echo(f"payload for {bank.class_name!r}: {state}")


@cli.command()
@click.option("--query", "query_path", type=click.Path(path_type=Path, exists=True, dir_okay=False), required=True)
@click.option("--bank", "bank_path", type=click.Path(path_type=Path, exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--tau-l", type=float, default=0.80, show_default=True)
def render(query_path, bank_path, out, tau_l):
    """Render the similarity landscape of a query against a bank."""
    from .tsg import similarity_map

    query = read_feature_grid(query_path)
    bank = read_bank(bank_path)
    sim = similarity_map(query, bank)
    write_gray_pgm(render_landscape(sim, tau_l), out)
    click.echo(f"landscape written to {out}")


@cli.command("eval")
@click.option("--pred", "pred_path", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--gt", "gt_path", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--json", "json_path", type=click.Path(path_type=Path), default=None,
              help="Write the metric report as JSON.")
def eval_cmd(pred_path, gt_path, json_path):
    """Score predicted masks against ground truth (files or directories).

    Directory mode pairs files by relative path; the first path component
    (or the file stem for flat layouts) names the class. The IoU column is
    micro-pooled over all pixels; mIoU averages per-class IoU.
    """
    pairs = _collect_mask_pairs(pred_path, gt_path)
    per_class = {}
    micro = None
    for class_name, pred_file, gt_file in pairs:
        counts = confusion(read_mask(pred_file, class_name), read_mask(gt_file, class_name))
        micro = counts if micro is None else micro + counts
        if class_name in per_class:
            per_class[class_name] = per_class[class_name] + counts
        else:
            per_class[class_name] = counts
    class_metrics = {c: metrics(k) for c, k in sorted(per_class.items())}
    overall = metrics(micro)
    miou = mean_over_classes(
        [m.iou for m in class_metrics.values()],
        [m.degenerate for m in class_metrics.values()],
    )
    rows = [
        [c, m.iou, m.precision, m.recall, m.f1] for c, m in class_metrics.items()
    ]
    rows.append(["(micro)", overall.iou, overall.precision, overall.recall, overall.f1])
    click.echo(format_table(["class", "iou", "precision", "recall", "f1"], rows), nl=False)
    click.echo(f"mIoU: {miou:.3f}")
    if json_path is not None:
        report = {
            "per_class": {
                c: {"iou": m.iou, "precision": m.precision, "recall": m.recall,
                    "f1": m.f1, "degenerate": m.degenerate}
                for c, m in class_metrics.items()
            },
            "micro": {"iou": overall.iou, "precision": overall.precision,
                      "recall": overall.recall, "f1": overall.f1},
            "miou": miou,
        }
        Path(json_path).write_text(report_json(report), encoding="utf-8")


def _collect_mask_pairs(pred_path: Path, gt_path: Path):
    if pred_path.is_file() and gt_path.is_file():
        return [(pred_path.stem, pred_path, gt_path)]
    if not (pred_path.is_dir() and gt_path.is_dir()):
        raise ValidationError("--pred and --gt must both be files or both directories")
    gt_files = sorted(gt_path.rglob("*.pgm"))
    if not gt_files:
        raise ValidationError(f"no .pgm files under {gt_path}")
    pairs = []
    for gt_file in gt_files:
        rel = gt_file.relative_to(gt_path)
        pred_file = pred_path / rel
        if not pred_file.exists():
            raise ValidationError(f"missing prediction for {rel}")
        class_name = rel.parts[0] if len(rel.parts) > 1 else rel.stem
        pairs.append((class_name, pred_file, gt_file))
    return pairs


@cli.command()
@click.option("--fixture", type=click.Path(path_type=Path, exists=True, file_okay=False), required=True,
              help="Synthetic world directory (from `synth`).")
@click.option("--param", "parameter", type=click.Choice(SWEEPABLE), required=True)
@click.option("--values", type=str, required=True,
              help="Comma-separated values for the varied parameter.")
@click.option("--json", "json_path", type=click.Path(path_type=Path), default=None)
@_iccd_options
@_tsg_options
def sweep(fixture, parameter, values, json_path, tau_b, tau_t, xi, eta_min, n_s, k,
          tau_l, eta_cc, delta, tau_v, b_max):
    """Vary one parameter over a fixture; all others stay fixed."""
    bank_params = IccdParams(tau_b=tau_b, tau_t=tau_t, xi=xi, eta_min=eta_min, n_s=n_s, k=k)
    tsg_params = TsgParams(tau_l=tau_l, eta_cc=eta_cc, delta=delta, tau_v=tau_v, b_max=b_max)
    cast = int if parameter in ("eta_cc", "delta", "shots") else float
    parsed = tuple(cast(v) for v in values.split(",") if v)
    spec = SweepSpec(parameter, parsed, bank_params, tsg_params)
    world = load_world(fixture)
    rows = run_sweep(spec, world)
    table_rows = [
        [row["value"], row["iou"], row["miou"], row["f1"], row["precision"],
         row["recall"], "yes" if row["fallback_used"] else "no"]
        for row in rows
    ]
    click.echo(
        format_table(
            [parameter, "iou", "miou", "f1", "precision", "recall", "fallback"],
            table_rows,
        ),
        nl=False,
    )
    if json_path is not None:
        Path(json_path).write_text(report_json({"rows": rows}), encoding="utf-8")


@cli.command()
def backend():
    """Print which kernel backend is active."""
    click.echo(kernels.backend_name())


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.exceptions.Abort:
        sys.exit(1)
    except (FormatError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except (ValidationError, ProtoPointError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
