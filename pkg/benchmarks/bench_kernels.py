"""Benchmark the compiled kernel core against the numpy fallback.

Times the hot kernels at full production scale (96x96 patch grid, 1024-dim
features, 500-vector bank) and at desk scale, checks that both backends
agree numerically, and prints a comparison table.

Run:  python3 benchmarks/bench_kernels.py [--repeats 3]
"""

import argparse
import time

import numpy as np

from protopoint import kernels_numpy

try:
    from protopoint import _kernels as compiled
except ImportError:
    compiled = None


def unit_rows(rng, n, dim):
    rows = rng.standard_normal((n, dim))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return np.ascontiguousarray(rows, dtype=np.float32)


def timed(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_case(name, make_args, repeats):
    args = make_args()
    rows = []
    t_np, ref = timed(lambda: getattr(kernels_numpy, name)(*args), repeats)
    rows.append(("numpy", t_np))
    if compiled is not None:
        t_cy, got = timed(lambda: getattr(compiled, name)(*args), repeats)
        rows.append(("compiled", t_cy))
        check_agreement(name, ref, got)
    return rows


def check_agreement(name, a, b):
    if isinstance(a, tuple):
        for x, y in zip(a, b):
            check_agreement(name, x, y)
        return
    a64 = np.asarray(a, dtype=np.float64)
    b64 = np.asarray(b, dtype=np.float64)
    gap = float(np.abs(a64 - b64).max()) if a64.size else 0.0
    assert gap < 1e-9, f"{name}: backends disagree by {gap}"


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    full_grid = unit_rows(rng, 96 * 96, 1024)
    full_bank = unit_rows(rng, 500, 1024)
    desk_grid = unit_rows(rng, 20 * 20, 16)
    desk_bank = unit_rows(rng, 64, 16)
    mask_full = np.ascontiguousarray(
        (rng.random((96, 96)) < 0.3).astype(np.uint8)
    )
    values_full = np.ascontiguousarray(rng.standard_normal((96, 96)))

    cases = [
        ("max_sim_map [96x96x1024 vs 500]", "max_sim_map",
         lambda: (full_grid, full_bank)),
        ("max_sim_map [20x20x16 vs 64]", "max_sim_map",
         lambda: (desk_grid, desk_bank)),
        ("best_match [500 vs 96x96x1024]", "best_match",
         lambda: (full_bank, full_grid)),
        ("row_max_offdiag [500x1024]", "row_max_offdiag",
         lambda: (full_bank,)),
        ("label_components [96x96]", "label_components",
         lambda: (mask_full,)),
        ("window_max [96x96, delta=10]", "window_max",
         lambda: (values_full, 10)),
    ]

    if compiled is None:
        print("compiled extension not available; timing numpy fallback only\n")

    width = max(len(label) for label, _, _ in cases)
    header = f"{'kernel'.ljust(width)}  {'numpy':>10}  {'compiled':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, name, make_args in cases:
        rows = dict(bench_case(name, make_args, args.repeats))
        t_np = rows["numpy"]
        if "compiled" in rows:
            t_cy = rows["compiled"]
            print(f"{label.ljust(width)}  {t_np * 1e3:9.2f}ms  {t_cy * 1e3:9.2f}ms  "
                  f"{t_np / t_cy:7.2f}x")
        else:
            print(f"{label.ljust(width)}  {t_np * 1e3:9.2f}ms  {'-':>10}  {'-':>8}")
    print("\nagreement checked: max |numpy - compiled| < 1e-9 on every kernel")
    print("default dispatch: dense reductions on numpy/BLAS, grid walks on the")
    print("compiled core (see protopoint.kernels)")


if __name__ == "__main__":
    main()
