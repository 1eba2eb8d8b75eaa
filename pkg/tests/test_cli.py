import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from protopoint.formats import (
    ClassBankFile,
    read_bank,
    read_mask,
    read_payload,
    write_bank,
    write_feature_grid,
)
from protopoint.params import IccdParams

from conftest import random_grid

CLI = [sys.executable, "-m", "protopoint.cli"]


def run_cli(*args, env=None, check=True):
    full_env = dict(os.environ)
    if env:
        full_env.update(env)
    proc = subprocess.run(
        CLI + [str(a) for a in args], capture_output=True, text=True, env=full_env
    )
    if check and proc.returncode != 0:
        raise AssertionError(
            f"cli failed ({proc.returncode}): {proc.stdout}\n{proc.stderr}"
        )
    return proc


def tree_bytes(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture(scope="module")
def world_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("world") / "w"
    run_cli("synth", "--out", out, "--seed", 3, "--refs", 4, "--queries", 3,
            "--grid", 24, "--dim", 12)
    return out


@pytest.fixture(scope="module")
def bank_path(tmp_path_factory, world_dir):
    out = tmp_path_factory.mktemp("bank") / "alpha.srbk"
    run_cli("build-bank", "--refs", world_dir / "refs" / "alpha",
            "--masks", world_dir / "ref_masks" / "alpha",
            "--class-name", "alpha", "--out", out)
    return out


def test_synth_rerun_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ("--seed", 9, "--refs", 2, "--queries", 2, "--grid", 16, "--dim", 8)
    run_cli("synth", "--out", a, *args)
    run_cli("synth", "--out", b, *args)
    assert tree_bytes(a) == tree_bytes(b)


def test_build_bank_rerun_byte_identical(tmp_path, world_dir):
    outs = []
    for n in range(2):
        out = tmp_path / f"b{n}.srbk"
        run_cli("build-bank", "--refs", world_dir / "refs" / "alpha",
                "--masks", world_dir / "ref_masks" / "alpha",
                "--class-name", "alpha", "--out", out)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_build_bank_across_thread_counts(tmp_path, world_dir):
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"t{threads}.srbk"
        run_cli("build-bank", "--refs", world_dir / "refs" / "beta_leaf",
                "--masks", world_dir / "ref_masks" / "beta_leaf",
                "--class-name", "beta_leaf", "--out", out,
                env={"OMP_NUM_THREADS": threads})
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_single_reference_routes_to_fallback(tmp_path, world_dir):
    refs = tmp_path / "refs"
    masks = tmp_path / "masks"
    refs.mkdir()
    masks.mkdir()
    src = sorted((world_dir / "refs" / "alpha").glob("*.srfg"))[0]
    msk = world_dir / "ref_masks" / "alpha" / f"{src.stem}.pgm"
    (refs / src.name).write_bytes(src.read_bytes())
    (masks / msk.name).write_bytes(msk.read_bytes())
    out = tmp_path / "one.srbk"
    run_cli("build-bank", "--refs", refs, "--masks", masks,
            "--class-name", "alpha", "--out", out)
    assert read_bank(out).fallback_used is True


def test_multi_reference_never_falls_back(world_dir, bank_path):
    assert read_bank(bank_path).fallback_used is False


def test_ground_writes_payload_and_artifacts(tmp_path, world_dir, bank_path):
    query = sorted((world_dir / "queries").glob("*.srfg"))[0]
    payload_path = tmp_path / "p.json"
    render_path = tmp_path / "r.pgm"
    mask_path = tmp_path / "m.pgm"
    run_cli("ground", "--query", query, "--bank", bank_path,
            "--out", payload_path, "--render", render_path,
            "--emit-mask", mask_path)
    payload = read_payload(payload_path)
    assert payload.class_name == "alpha"
    assert payload.text_prompt == "an alpha"
    assert not payload.degraded_to_text_only
    assert render_path.exists()
    mask = read_mask(mask_path)
    assert mask.height == 24 * 16 and mask.width == 24 * 16


def test_ground_rerun_and_across_thread_counts(tmp_path, world_dir, bank_path):
    query = sorted((world_dir / "queries").glob("*.srfg"))[0]
    blobs = []
    for n, threads in enumerate(("1", "4", "4")):
        out = tmp_path / f"p{n}.json"
        run_cli("ground", "--query", query, "--bank", bank_path, "--out", out,
                env={"OMP_NUM_THREADS": threads})
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]


def test_ground_b_max(tmp_path, world_dir, bank_path):
    query = sorted((world_dir / "queries").glob("*.srfg"))[0]
    full = tmp_path / "full.json"
    capped = tmp_path / "capped.json"
    run_cli("ground", "--query", query, "--bank", bank_path, "--out", full)
    run_cli("ground", "--query", query, "--bank", bank_path, "--out", capped,
            "--b-max", 2)
    n_full = len(read_payload(full).points)
    assert len(read_payload(capped).points) == min(2, n_full)


def test_ground_empty_bank_degrades_with_exit_zero(tmp_path, rng):
    grid = random_grid(rng, 8, 8, 6)
    grid_path = tmp_path / "q.srfg"
    write_feature_grid(grid, grid_path)
    empty = ClassBankFile("nothing", 6, (), IccdParams(), False, 0.65)
    bank_file = tmp_path / "empty.srbk"
    write_bank(empty, bank_file)
    out = tmp_path / "p.json"
    proc = run_cli("ground", "--query", grid_path, "--bank", bank_file, "--out", out)
    assert proc.returncode == 0
    payload = read_payload(out)
    assert payload.degraded_to_text_only is True
    assert payload.points == ()


def test_ground_prompts_land_inside_instances(tmp_path, world_dir, bank_path):
    meta = json.loads((world_dir / "meta.json").read_text())
    patch = meta["config"]["patch"]
    image_w = meta["config"]["grid_w"] * patch
    query_entry = meta["queries"][0]
    query = world_dir / "queries" / f"{query_entry['id']}.srfg"
    out = tmp_path / "p.json"
    run_cli("ground", "--query", query, "--bank", bank_path, "--out", out)
    payload = read_payload(out)
    boxes = [
        (inst["j0"] * patch, inst["i0"] * patch,
         (inst["j0"] + inst["w"]) * patch, (inst["i0"] + inst["h"]) * patch)
        for inst in query_entry["instances"]["alpha"]
    ]
    for box in boxes:
        x0, y0, x1, y1 = box
        assert any(
            x0 <= p.x_norm * image_w < x1 and y0 <= p.y_norm * image_w < y1
            for p in payload.points
        )


def test_render_subcommand(tmp_path, world_dir, bank_path):
    query = sorted((world_dir / "queries").glob("*.srfg"))[0]
    out1, out2 = tmp_path / "r1.pgm", tmp_path / "r2.pgm"
    run_cli("render", "--query", query, "--bank", bank_path, "--out", out1)
    run_cli("render", "--query", query, "--bank", bank_path, "--out", out2)
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_bytes().startswith(b"P5\n24 24\n255\n")


def test_eval_identity(tmp_path, world_dir):
    gt = sorted((world_dir / "gt" / "alpha").glob("*.pgm"))[0]
    proc = run_cli("eval", "--pred", gt, "--gt", gt, "--json", tmp_path / "m.json")
    assert "1.000" in proc.stdout
    report = json.loads((tmp_path / "m.json").read_text())
    assert report["micro"]["iou"] == 1.0


def test_eval_directory_mode(tmp_path, world_dir):
    proc = run_cli("eval", "--pred", world_dir / "gt", "--gt", world_dir / "gt")
    assert "mIoU: 1.000" in proc.stdout


def test_sweep_subcommand(tmp_path, world_dir):
    out = tmp_path / "rows.json"
    proc = run_cli("sweep", "--fixture", world_dir, "--param", "tau_l",
                   "--values", "0.75,0.85", "--json", out)
    rows = json.loads(out.read_text())["rows"]
    assert len(rows) == 2
    assert rows[0]["recall"] >= rows[1]["recall"]
    assert "tau_l" in proc.stdout


def test_exit_code_io_error(tmp_path):
    proc = run_cli("ground", "--query", tmp_path / "missing.srfg",
                   "--bank", tmp_path / "missing.srbk", "--out", tmp_path / "p.json",
                   check=False)
    assert proc.returncode == 2


def test_exit_code_corrupt_file(tmp_path, bank_path):
    bad = tmp_path / "bad.srfg"
    bad.write_bytes(b"XXXX" + b"\x00" * 32)
    proc = run_cli("ground", "--query", bad, "--bank", bank_path,
                   "--out", tmp_path / "p.json", check=False)
    assert proc.returncode == 2


def test_exit_code_validation_error(tmp_path, world_dir, bank_path):
    query = sorted((world_dir / "queries").glob("*.srfg"))[0]
    proc = run_cli("ground", "--query", query, "--bank", bank_path,
                   "--out", tmp_path / "p.json", "--tau-l", "1.5", check=False)
    assert proc.returncode == 1


def test_help_documents_parameters():
    for cmd, expected in (
        ("ground", ("--tau-l", "--eta-cc", "--delta", "--tau-v", "--b-max", "0.8", "0.5")),
        ("build-bank", ("--tau-b", "--tau-t", "--xi", "--eta-min", "--n-s", "--k")),
    ):
        proc = run_cli(cmd, "--help")
        for token in expected:
            assert token in proc.stdout
