"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line. Run with `pytest tests/test_acceptance.py -v -s`.
"""

import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from protopoint.bank import (
    adaptive_threshold,
    build_raw_bank,
    distill,
    distill_single_reference,
    nn_match,
    score_coherence,
)
from protopoint.formats import BankVector, read_bank, write_bank
from protopoint.gridops import PatchIndexSet, select_foreground
from protopoint.metrics import confusion, mean_over_classes
from protopoint.params import IccdParams, TsgParams
from protopoint.pipeline import build_class_bank, ground_query
from protopoint.prompting import ClassName, build_payload
from protopoint.sweep import SweepSpec, run_sweep
from protopoint.synth import WorldConfig, generate_world
from protopoint.tsg import (
    PromptPoint,
    PromptSet,
    SimilarityMap,
    connected_components,
    extract_peaks,
    loose_mask,
    similarity_map,
    to_prompt_set,
)
from protopoint.formats import AnnotationMask

from conftest import make_bank, random_grid, random_index_set, unit_rows
from oracles import (
    oracle_confusion,
    oracle_distill,
    oracle_flood_fill,
    oracle_nn_match,
    oracle_peaks,
    oracle_similarity_map,
    oracle_single_reference,
    oracle_coherence,
)

WORLD_CONFIG = WorldConfig(seed=7, n_refs=10, n_queries=20, max_instances=4)


def report(name: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {name}: {status}{suffix}")
    assert ok, f"{name} failed{suffix}"


@pytest.fixture(scope="module")
def world():
    return generate_world(WORLD_CONFIG)


# ---------------------------------------------------------------------------
# criterion 1: oracle equivalence


def test_oracle_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.monotonic()
    checked = {k: 0 for k in (
        "nn_match", "score_coherence", "distill", "single_reference",
        "similarity_map", "connected_components", "extract_peaks", "confusion",
    )}

    for trial in range(100):
        # dense kernels at desk scale: grids <= 20x20, dim <= 16, banks <= 64
        gh, gw = int(rng.integers(2, 21)), int(rng.integers(2, 21))
        dim = int(rng.integers(2, 17))
        grid = random_grid(rng, gh, gw, dim)
        v = unit_rows(rng, 1, dim)[0]
        p, sim = nn_match(v, grid)
        op, osim = oracle_nn_match(v, grid)
        assert p == op and abs(sim - osim) < 1e-6
        checked["nn_match"] += 1

        bank_vectors = unit_rows(rng, int(rng.integers(1, 65)), dim)
        got = similarity_map(grid, make_bank(bank_vectors))
        want = oracle_similarity_map(grid, bank_vectors)
        assert np.abs(got.values.astype(np.float64) - want).max() < 1e-6
        checked["similarity_map"] += 1

        mask = rng.random((gh, gw)) < 0.4
        eta = int(rng.integers(1, 5))
        comps = connected_components(mask, eta)
        flooded = [c for c in oracle_flood_fill(mask) if len(c) >= eta]
        assert [c.patches for c in comps] == flooded
        checked["connected_components"] += 1

        delta = int(rng.integers(1, 5))
        for comp in comps[:3]:
            got_peaks = [(q.i, q.j) for q in extract_peaks(got, comp, delta)]
            assert got_peaks == oracle_peaks(got.values, comp.patches, delta)
        checked["extract_peaks"] += 1

        pred = (rng.random((gh, gw)) < 0.5).astype(np.uint8)
        gt = (rng.random((gh, gw)) < 0.5).astype(np.uint8)
        counts = confusion(
            AnnotationMask(gh, gw, pred), AnnotationMask(gh, gw, gt)
        )
        assert (counts.tp, counts.fp, counts.fn, counts.tn) == oracle_confusion(pred, gt)
        checked["confusion"] += 1

    params = IccdParams(xi=0.15, eta_min=2, k=12)
    for trial in range(100):
        # class fixtures kept tiny so the straight-line oracle stays fast
        gh, gw = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        dim = int(rng.integers(2, 9))
        n_images = int(rng.integers(2, 5))
        refs = {}
        for n in range(n_images):
            g = random_grid(rng, gh, gw, dim)
            bank_fg = random_index_set(rng, g.n_patches, 0.35)
            if len(bank_fg) == 0:
                bank_fg = PatchIndexSet(np.array([0]), g.n_patches)
            target = np.union1d(
                bank_fg.indices, random_index_set(rng, g.n_patches, 0.3).indices
            )
            refs[f"img{n:02d}"] = (g, bank_fg, PatchIndexSet(target, g.n_patches))
        raw = build_raw_bank(
            "probe", [(i, g, fg) for i, (g, fg, _) in sorted(refs.items())]
        )
        heldout = {i: (g, tfg) for i, (g, _, tfg) in refs.items()}
        bank = distill(raw, heldout, params)
        want_kappa, want = oracle_distill(
            {i: (g, fg.indices.tolist(), t.indices.tolist())
             for i, (g, fg, t) in refs.items()},
            params,
        )
        got = [(e.source_image_id, e.patch_flat_index) for e in bank.entries]
        assert got == [(s, q) for s, q, _ in want]
        for (_, _, wr), e in zip(want, bank.entries):
            assert abs(e.score - wr) < 1e-6
        if want_kappa is not None:
            assert abs(bank.kappa_c - want_kappa) < 1e-6
        checked["distill"] += 1

        first_id = sorted(refs)[0]
        g, fg, _ = refs[first_id]
        src_v = BankVector(g.data[fg.indices[0]].copy(), first_id, int(fg.indices[0]))
        held_pairs = [(refs[t][0], refs[t][2]) for t in sorted(refs) if t != first_id]
        rho = score_coherence(src_v, held_pairs, params)
        orho = oracle_coherence(
            src_v.vector,
            [(gg, tt.indices.tolist()) for gg, tt in held_pairs],
            params,
        )
        assert abs(rho - orho) < 1e-6 or rho == orho == -1.0
        checked["score_coherence"] += 1

        g_single = random_grid(rng, gh, gw, dim)
        n_fg = int(rng.integers(2, min(10, g_single.n_patches) + 1))
        fg_idx = np.sort(rng.choice(g_single.n_patches, size=n_fg, replace=False))
        single_raw = build_raw_bank(
            "probe", [("only", g_single, PatchIndexSet(fg_idx, g_single.n_patches))]
        )
        single = distill_single_reference(single_raw, params)
        s_kappa, s_want = oracle_single_reference(g_single, fg_idx.tolist(), params)
        assert [e.patch_flat_index for e in single.entries] == [q for q, _ in s_want]
        for (_, ww), e in zip(s_want, single.entries):
            assert abs(e.score - ww) < 1e-6
        if s_kappa is not None:
            assert abs(single.kappa_c - s_kappa) < 1e-6
        checked["single_reference"] += 1

    elapsed = time.monotonic() - t0
    assert all(n >= 100 for n in checked.values()), checked
    report("oracle-equivalence", elapsed < 60.0, f"{elapsed:.1f}s, 100+ fixtures per op")


# ---------------------------------------------------------------------------
# criterion 2: invariant suite (>= 1000 cases per invariant)


def test_invariant_suite():
    rng = np.random.default_rng(99)
    params = IccdParams()

    # kappa always clipped into [0.65, 0.82]
    for _ in range(1000):
        scores = rng.random(int(rng.integers(1, 30)))
        kappa = adaptive_threshold(scores.tolist(), params)
        assert 0.65 <= kappa <= 0.82

    # bank size caps and good+bad accounting
    from protopoint.bank import _select_top_k

    for _ in range(1000):
        k = int(rng.integers(1, 20))
        n = int(rng.integers(0, 40))
        scored = [
            BankVector(unit_rows(rng, 1, 4)[0], f"i{rng.integers(0, 5)}", int(p),
                       float(rng.random()))
            for p in range(n)
        ]
        kept = _select_top_k(scored, kappa=float(rng.random() * 0.5), k=k)
        assert len(kept) <= k
        assert len(kept) <= len(scored)

    for _ in range(1000):
        dim = int(rng.integers(2, 8))
        xi = float(rng.uniform(0.0, 0.8))
        case_params = IccdParams(xi=xi, eta_min=1)
        v = unit_rows(rng, 1, dim)[0]
        good = bad = valid = 0
        for _ in range(int(rng.integers(1, 5))):
            g = random_grid(rng, 3, 3, dim)
            fg = random_index_set(rng, 9, 0.4)
            p_star, sim = nn_match(v, g)
            if sim >= xi:
                valid += 1
                if fg.as_mask()[p_star]:
                    good += 1
                else:
                    bad += 1
        assert good + bad == valid

    # landscape invariants: prompt floor, peak existence, NMS separation
    tau_l = 0.6
    delta = 2
    for _ in range(1000):
        gh, gw = int(rng.integers(3, 13)), int(rng.integers(3, 13))
        values = rng.uniform(-1, 1, size=(gh, gw)).astype(np.float32)
        sim = SimilarityMap(gh, gw, values)
        comps = connected_components(loose_mask(sim, tau_l), int(rng.integers(1, 4)))
        peaks = []
        for comp in comps:
            comp_peaks = extract_peaks(sim, comp, delta)
            assert len(comp_peaks) >= 1
            for a in range(len(comp_peaks)):
                for b in range(a + 1, len(comp_peaks)):
                    d2 = (comp_peaks[a].i - comp_peaks[b].i) ** 2 + (
                        comp_peaks[a].j - comp_peaks[b].j
                    ) ** 2
                    assert d2 > delta * delta
            peaks.extend(comp_peaks)
        ps = to_prompt_set(peaks, gw * 16, gh * 16, gh, gw)
        assert all(p.score >= tau_l for p in ps.prompts)

    # degradation flag mirrors emptiness
    name = ClassName.from_raw("probe")
    for _ in range(1000):
        n_prompts = int(rng.integers(0, 5))
        scores = sorted(rng.uniform(0.1, 1.0, size=n_prompts).tolist(), reverse=True)
        prompts = tuple(
            PromptPoint(float(rng.uniform(1, 63)), float(rng.uniform(1, 63)), s)
            for s in scores
        )
        payload = build_payload(name, PromptSet(prompts, 64, 64), 64, 64)
        assert payload.degraded_to_text_only == (len(payload.points) == 0)

    # threshold monotonicity for both gates
    from protopoint.formats import PatchCoverage

    for _ in range(1000):
        gh, gw = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        cov = PatchCoverage(gh, gw, rng.random((gh, gw)))
        lo, hi = sorted(rng.uniform(0.0, 0.99, size=2).tolist())
        assert set(select_foreground(cov, hi).indices.tolist()) <= set(
            select_foreground(cov, lo).indices.tolist()
        )
        values = rng.uniform(-1, 1, size=(gh, gw)).astype(np.float32)
        sim = SimilarityMap(gh, gw, values)
        lo_t, hi_t = sorted(rng.uniform(0.01, 0.99, size=2).tolist())
        assert np.all(loose_mask(sim, lo_t) | ~loose_mask(sim, hi_t))

    report("invariant-suite", True, "8 invariants x 1000 cases")


# ---------------------------------------------------------------------------
# criterion 3: adaptive-threshold clip behaviour


def test_adaptive_threshold_clip():
    hi = adaptive_threshold([1.0] * 8, IccdParams())
    lo = adaptive_threshold([0.1] * 8, IccdParams())
    report("adaptive-threshold-clip", hi == 0.82 and lo == 0.65,
           f"ceiling={hi}, floor={lo}")


# ---------------------------------------------------------------------------
# criterion 4: fallback routing


def test_fallback_routing(world, tmp_path):
    params = IccdParams()
    cfg = world.config
    refs = world.refs[cfg.classes[0]]
    one = build_class_bank(
        cfg.classes[0], [(refs[0].image_id, refs[0].grid, refs[0].mask)], params,
        cfg.patch,
    )
    two = build_class_bank(
        cfg.classes[0],
        [(r.image_id, r.grid, r.mask) for r in refs[:2]],
        params,
        cfg.patch,
    )
    ok = one.fallback_used is True and two.fallback_used is False
    ok = ok and len(one.entries) > 0

    # stage II consumes the fallback bank unchanged, through the same file
    path = tmp_path / "one.srbk"
    write_bank(one, path)
    back = read_bank(path)
    result = ground_query(
        world.queries[0].grid, back, TsgParams(), cfg.image_w, cfg.image_h
    )
    ok = ok and len(result.payload.points) > 0
    report("fallback-routing", ok,
           f"1-ref fallback={one.fallback_used}, 2-ref fallback={two.fallback_used}")


# ---------------------------------------------------------------------------
# criterion 5: end-to-end synthetic reproduction


def test_end_to_end_synthetic(world):
    cfg = world.config
    t0 = time.monotonic()
    params = IccdParams()
    tsg_params = TsgParams()
    banks = {
        c: build_class_bank(
            c, [(r.image_id, r.grid, r.mask) for r in world.refs[c]], params, cfg.patch
        )
        for c in cfg.classes
    }
    instances_total = instances_hit = 0
    pairs_total = pairs_exact = 0
    for query in world.queries:
        for c in cfg.classes:
            result = ground_query(query.grid, banks[c], tsg_params, cfg.image_w, cfg.image_h)
            planted = query.instances[c]
            pairs_total += 1
            pairs_exact += int(len(result.components) == len(planted))
            for inst in planted:
                instances_total += 1
                hit = any(
                    inst.contains_pixel(
                        p.x_norm * cfg.image_w, p.y_norm * cfg.image_h, cfg.patch
                    )
                    for p in result.payload.points
                )
                instances_hit += int(hit)
    elapsed = time.monotonic() - t0
    hit_rate = instances_hit / instances_total
    exact_rate = pairs_exact / pairs_total
    ok = hit_rate >= 0.95 and exact_rate >= 0.90 and elapsed < 30.0
    report(
        "end-to-end-synthetic", ok,
        f"hit={hit_rate:.3f} (>=0.95), components={exact_rate:.3f} (>=0.90), "
        f"{elapsed:.1f}s (<30s)",
    )


# ---------------------------------------------------------------------------
# criterion 6: metric harness check


def test_metric_harness():
    hybrid = [37.65, 63.91, 81.16, 19.90, 95.36, 40.68, 71.21, 39.93, 80.22,
              67.80, 53.78]
    text = [37.27, 4.81, 74.21, 0.00, 0.00, 31.36, 54.93, 0.00, 0.00, 67.12, 8.26]
    m_hybrid = mean_over_classes(hybrid)
    m_text = mean_over_classes(text)
    ok = abs(m_hybrid - 59.24) <= 0.01 and abs(m_text - 25.27) <= 0.01
    report("metric-harness", ok, f"hybrid={m_hybrid:.4f}, text={m_text:.4f}")


# ---------------------------------------------------------------------------
# criterion 7: ablation-shape check


def test_ablation_shape(world):
    tau_rows = run_sweep(SweepSpec("tau_l", (0.75, 0.80, 0.85)), world)
    recalls = [r["recall"] for r in tau_rows]
    recall_monotone = all(a >= b - 1e-12 for a, b in zip(recalls, recalls[1:]))

    delta_rows = run_sweep(SweepSpec("delta", (10, 15)), world)
    delta_gap = abs(delta_rows[0]["iou"] - delta_rows[1]["iou"])
    ok = recall_monotone and delta_gap < 0.02
    report(
        "ablation-shape", ok,
        f"recall {recalls[0]:.3f}>={recalls[1]:.3f}>={recalls[2]:.3f}, "
        f"delta-iou gap {delta_gap:.4f} (<0.02)",
    )


# ---------------------------------------------------------------------------
# criterion 8: determinism across runs and parallelism degrees


def test_cli_determinism(tmp_path):
    cli = [sys.executable, "-m", "protopoint.cli"]

    def run(*args, threads="2"):
        env = dict(os.environ, OMP_NUM_THREADS=threads)
        proc = subprocess.run(
            [str(a) for a in cli + list(args)], capture_output=True, text=True, env=env
        )
        assert proc.returncode == 0, proc.stderr
        return proc.stdout

    def tree(root: Path) -> dict:
        return {
            str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file()
        }

    outputs = []
    for n, threads in enumerate(("1", "4")):
        root = tmp_path / f"run{n}"
        world_dir = root / "world"
        run("synth", "--out", world_dir, "--seed", 21, "--refs", 4,
            "--queries", 2, "--grid", 16, "--dim", 8, threads=threads)
        bank = root / "alpha.srbk"
        run("build-bank", "--refs", world_dir / "refs" / "alpha",
            "--masks", world_dir / "ref_masks" / "alpha",
            "--class-name", "alpha", "--out", bank, threads=threads)
        query = sorted((world_dir / "queries").glob("*.srfg"))[0]
        run("ground", "--query", query, "--bank", bank,
            "--out", root / "payload.json", "--render", root / "render.pgm",
            "--emit-mask", root / "mask.pgm", threads=threads)
        eval_out = run("eval", "--pred", world_dir / "gt", "--gt", world_dir / "gt",
                       "--json", root / "eval.json", threads=threads)
        sweep_out = run("sweep", "--fixture", world_dir, "--param", "tau_l",
                        "--values", "0.75,0.85", "--json", root / "sweep.json",
                        threads=threads)
        run("render", "--query", query, "--bank", bank,
            "--out", root / "render2.pgm", threads=threads)
        outputs.append((tree(root), eval_out, sweep_out))

    (tree_a, eval_a, sweep_a), (tree_b, eval_b, sweep_b) = outputs
    files_match = tree_a.keys() == tree_b.keys() and all(
        tree_a[k] == tree_b[k] for k in tree_a
    )
    stdout_match = eval_a == eval_b and sweep_a == sweep_b
    report("determinism", files_match and stdout_match,
           "all subcommands byte-identical across OMP_NUM_THREADS=1 vs 4")
