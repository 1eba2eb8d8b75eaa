"""Seeded synthetic world: a desk-scale, model-free stand-in for real
backbone features.

Each class owns an orthonormal "prototype direction" in feature space.
Foreground patches sample unit vectors inside a narrow cosine cone around
their class direction; background patches live almost entirely in the
orthogonal complement with bounded leakage. Instances are axis-aligned
patch rectangles placed with a minimum Chebyshev gap, so similarity
landscapes separate cleanly into one connected component per instance.

Query blobs additionally deviate on their boundary ring: edge patches
sample much wider angles than interiors, mimicking the mixed appearance of
real object boundaries. Interiors stay far above any sensible landscape
threshold, so instances never vanish, while edge similarities spread across
the threshold range and give sweeps a genuine recall/precision trade-off.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import FixtureError
from .formats import (
    AnnotationMask,
    FeatureGrid,
    read_feature_grid,
    read_mask,
    write_feature_grid,
    write_mask,
)

DEFAULT_CLASSES = ("alpha", "beta_leaf", "gamma")


@dataclass(frozen=True)
class WorldConfig:
    seed: int = 7
    classes: tuple[str, ...] = DEFAULT_CLASSES
    n_refs: int = 10
    n_queries: int = 20
    grid_h: int = 32
    grid_w: int = 32
    dim: int = 16
    patch: int = 16
    max_instances: int = 4
    cone_deg: float = 10.0
    edge_deg_lo: float = 12.0
    edge_deg_hi: float = 56.0
    bg_leak: float = 0.15
    min_gap: int = 3

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.dim < len(self.classes) + 2:
            raise FixtureError("dim must exceed the class count by at least 2")
        if self.max_instances < 1 or self.n_refs < 1 or self.n_queries < 1:
            raise FixtureError("counts must be positive")
        if not 0.0 < self.cone_deg < 45.0:
            raise FixtureError("cone_deg must be in (0, 45)")
        if not self.cone_deg <= self.edge_deg_lo <= self.edge_deg_hi < 80.0:
            raise FixtureError("need cone_deg <= edge_deg_lo <= edge_deg_hi < 80")

    @property
    def image_w(self) -> int:
        return self.grid_w * self.patch

    @property
    def image_h(self) -> int:
        return self.grid_h * self.patch


@dataclass(frozen=True)
class Instance:
    """Axis-aligned patch rectangle [i0, i0+h) x [j0, j0+w)."""

    i0: int
    j0: int
    h: int
    w: int

    def pixel_box(self, patch: int) -> tuple[int, int, int, int]:
        """(x0, y0, x1, y1) in pixels, end-exclusive."""
        return (
            self.j0 * patch,
            self.i0 * patch,
            (self.j0 + self.w) * patch,
            (self.i0 + self.h) * patch,
        )

    def contains_pixel(self, x: float, y: float, patch: int) -> bool:
        x0, y0, x1, y1 = self.pixel_box(patch)
        return x0 <= x < x1 and y0 <= y < y1


@dataclass
class RefImage:
    image_id: str
    class_name: str
    grid: FeatureGrid
    mask: AnnotationMask
    instances: list[Instance] = field(default_factory=list)


@dataclass
class QueryImage:
    image_id: str
    grid: FeatureGrid
    instances: dict[str, list[Instance]] = field(default_factory=dict)
    gt: dict[str, AnnotationMask] = field(default_factory=dict)


@dataclass
class World:
    config: WorldConfig
    refs: dict[str, list[RefImage]]
    queries: list[QueryImage]


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _class_directions(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((dim, n)))
    return q.T[:n]


def _fg_feature(
    rng: np.random.Generator, axis: np.ndarray, theta_lo: float, theta_hi: float
) -> np.ndarray:
    noise = rng.standard_normal(axis.size)
    noise -= (noise @ axis) * axis
    noise = _unit(noise)
    theta = rng.uniform(theta_lo, theta_hi)
    return math.cos(theta) * axis + math.sin(theta) * noise


def _bg_feature(rng: np.random.Generator, basis: np.ndarray, leak: float) -> np.ndarray:
    g = rng.standard_normal(basis.shape[1])
    perp = _unit(g - basis.T @ (basis @ g))
    inspan = basis.T @ _unit(rng.standard_normal(basis.shape[0]))
    return _unit(perp + rng.uniform(0.0, leak) * inspan)


def _chebyshev_gap(a: Instance, b: Instance) -> int:
    gap_i = max(0, max(b.i0 - (a.i0 + a.h), a.i0 - (b.i0 + b.h)))
    gap_j = max(0, max(b.j0 - (a.j0 + a.w), a.j0 - (b.j0 + b.w)))
    return max(gap_i, gap_j)


def _place_blobs(
    rng: np.random.Generator,
    cfg: WorldConfig,
    count: int,
    existing: list[Instance],
    attempts: int = 200,
) -> list[Instance]:
    """Place up to `count` non-adjacent rectangles; oversubscribed layouts
    drop blobs rather than violating the separation gap."""
    placed: list[Instance] = []
    for _ in range(count):
        for _ in range(attempts):
            h = int(rng.integers(3, 5))
            w = int(rng.integers(3, 5))
            cand = Instance(
                int(rng.integers(0, cfg.grid_h - h + 1)),
                int(rng.integers(0, cfg.grid_w - w + 1)),
                h,
                w,
            )
            if all(_chebyshev_gap(cand, o) >= cfg.min_gap for o in existing + placed):
                placed.append(cand)
                break
    return placed


def _patch_mask(instances: list[Instance], cfg: WorldConfig) -> np.ndarray:
    m = np.zeros((cfg.grid_h, cfg.grid_w), dtype=np.uint8)
    for inst in instances:
        m[inst.i0 : inst.i0 + inst.h, inst.j0 : inst.j0 + inst.w] = 1
    return m


def _pixel_mask(instances: list[Instance], cfg: WorldConfig, class_name: str) -> AnnotationMask:
    patch_level = _patch_mask(instances, cfg)
    pixels = np.repeat(np.repeat(patch_level, cfg.patch, axis=0), cfg.patch, axis=1)
    return AnnotationMask(cfg.image_h, cfg.image_w, pixels, class_name)


def _render_grid(
    rng: np.random.Generator,
    cfg: WorldConfig,
    basis: np.ndarray,
    blobs: dict[str, list[Instance]],
    class_index: dict[str, int],
    noisy_edges: bool,
) -> FeatureGrid:
    n_p = cfg.grid_h * cfg.grid_w
    data = np.empty((n_p, cfg.dim), dtype=np.float64)
    for p in range(n_p):
        data[p] = _bg_feature(rng, basis, cfg.bg_leak)
    cone = math.radians(cfg.cone_deg)
    edge_lo = math.radians(cfg.edge_deg_lo)
    edge_hi = math.radians(cfg.edge_deg_hi)
    for class_name, instances in blobs.items():
        axis = basis[class_index[class_name]]
        for inst in instances:
            for i in range(inst.i0, inst.i0 + inst.h):
                for j in range(inst.j0, inst.j0 + inst.w):
                    on_ring = i in (inst.i0, inst.i0 + inst.h - 1) or j in (
                        inst.j0, inst.j0 + inst.w - 1
                    )
                    if noisy_edges and on_ring:
                        feature = _fg_feature(rng, axis, edge_lo, edge_hi)
                    else:
                        feature = _fg_feature(rng, axis, 0.0, cone)
                    data[i * cfg.grid_w + j] = feature
    return FeatureGrid(
        cfg.grid_h, cfg.grid_w, cfg.dim, data.astype(np.float32), normalized=True
    )


def generate_world(cfg: WorldConfig) -> World:
    """Build the full seeded world in memory; the seed fixes every byte."""
    rng = np.random.default_rng(cfg.seed)
    basis = _class_directions(rng, len(cfg.classes), cfg.dim)
    class_index = {c: k for k, c in enumerate(cfg.classes)}

    refs: dict[str, list[RefImage]] = {c: [] for c in cfg.classes}
    for class_name in cfg.classes:
        for r in range(cfg.n_refs):
            image_id = f"{class_name}_r{r:02d}"
            count = int(rng.integers(1, 3))
            instances = _place_blobs(rng, cfg, count, [])
            grid = _render_grid(
                rng, cfg, basis, {class_name: instances}, class_index, noisy_edges=False
            )
            mask = _pixel_mask(instances, cfg, class_name)
            refs[class_name].append(RefImage(image_id, class_name, grid, mask, instances))

    queries: list[QueryImage] = []
    for q in range(cfg.n_queries):
        image_id = f"q{q:02d}"
        layout: dict[str, list[Instance]] = {}
        existing: list[Instance] = []
        for class_name in cfg.classes:
            count = int(rng.integers(1, cfg.max_instances + 1))
            placed = _place_blobs(rng, cfg, count, existing)
            layout[class_name] = placed
            existing.extend(placed)
        grid = _render_grid(rng, cfg, basis, layout, class_index, noisy_edges=True)
        gt = {c: _pixel_mask(layout[c], cfg, c) for c in cfg.classes}
        queries.append(QueryImage(image_id, grid, layout, gt))
    return World(cfg, refs, queries)


# ---------------------------------------------------------------------------
# disk layout


def write_world(world: World, outdir) -> None:
    root = Path(outdir)
    cfg = world.config
    for class_name, images in world.refs.items():
        (root / "refs" / class_name).mkdir(parents=True, exist_ok=True)
        (root / "ref_masks" / class_name).mkdir(parents=True, exist_ok=True)
        for ref in images:
            write_feature_grid(ref.grid, root / "refs" / class_name / f"{ref.image_id}.srfg")
            write_mask(ref.mask, root / "ref_masks" / class_name / f"{ref.image_id}.pgm")
    (root / "queries").mkdir(parents=True, exist_ok=True)
    for class_name in cfg.classes:
        (root / "gt" / class_name).mkdir(parents=True, exist_ok=True)
    for query in world.queries:
        write_feature_grid(query.grid, root / "queries" / f"{query.image_id}.srfg")
        for class_name, mask in query.gt.items():
            write_mask(mask, root / "gt" / class_name / f"{query.image_id}.pgm")
    meta = {
        "config": asdict(cfg),
        "queries": [
            {
                "id": query.image_id,
                "instances": {
                    c: [asdict(inst) for inst in instances]
                    for c, instances in query.instances.items()
                },
            }
            for query in world.queries
        ],
    }
    (root / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_world(indir) -> World:
    root = Path(indir)
    meta_path = root / "meta.json"
    if not meta_path.exists():
        raise FixtureError(f"no meta.json under {root}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    raw_cfg = dict(meta["config"])
    raw_cfg["classes"] = tuple(raw_cfg["classes"])
    cfg = WorldConfig(**raw_cfg)

    refs: dict[str, list[RefImage]] = {}
    for class_name in cfg.classes:
        images = []
        ref_dir = root / "refs" / class_name
        if not ref_dir.is_dir():
            raise FixtureError(f"missing reference directory {ref_dir}")
        for grid_path in sorted(ref_dir.glob("*.srfg")):
            image_id = grid_path.stem
            mask_path = root / "ref_masks" / class_name / f"{image_id}.pgm"
            if not mask_path.exists():
                raise FixtureError(f"missing mask for reference {image_id}")
            images.append(
                RefImage(
                    image_id,
                    class_name,
                    read_feature_grid(grid_path),
                    read_mask(mask_path, class_name),
                )
            )
        refs[class_name] = images

    queries = []
    for entry in meta["queries"]:
        image_id = entry["id"]
        grid_path = root / "queries" / f"{image_id}.srfg"
        if not grid_path.exists():
            raise FixtureError(f"missing query grid {grid_path}")
        instances = {
            c: [Instance(**inst) for inst in insts]
            for c, insts in entry["instances"].items()
        }
        gt = {}
        for class_name in cfg.classes:
            mask_path = root / "gt" / class_name / f"{image_id}.pgm"
            if not mask_path.exists():
                raise FixtureError(f"missing ground truth {mask_path}")
            gt[class_name] = read_mask(mask_path, class_name)
        queries.append(QueryImage(image_id, read_feature_grid(grid_path), instances, gt))
    return World(cfg, refs, queries)
