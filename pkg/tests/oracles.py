"""Independent brute-force reference implementations used to check the
package against straight-line re-derivations. Everything here favours
clarity over speed and must never import pipeline internals beyond the
plain data types.
"""

import numpy as np

from protopoint.formats import FeatureGrid
from protopoint.params import IccdParams


def oracle_block_means(resized: np.ndarray, grid_h: int, grid_w: int, patch: int):
    """Explicit nested loops counting set pixels per patch block."""
    out = np.zeros((grid_h, grid_w), dtype=np.float64)
    for i in range(grid_h):
        for j in range(grid_w):
            count = 0
            for di in range(patch):
                for dj in range(patch):
                    if resized[i * patch + di, j * patch + dj]:
                        count += 1
            out[i, j] = count / (patch * patch)
    return out


def oracle_select(cov_flat, tau):
    return [p for p, v in enumerate(cov_flat) if v > tau]


def oracle_nn_match(v: np.ndarray, grid: FeatureGrid):
    """Naive scan over all patches; first index wins ties."""
    best_p, best_sim = 0, -np.inf
    vv = v.astype(np.float64)
    for p in range(grid.n_patches):
        sim = float(vv @ grid.data[p].astype(np.float64))
        if sim > best_sim:
            best_sim = sim
            best_p = p
    return best_p, min(max(best_sim, -1.0), 1.0)


def oracle_coherence(v, heldout, params: IccdParams):
    """Straight-line evaluation of gating, counting and the ratio."""
    good = valid = 0
    for grid, fg_indices in heldout:
        p_star, sim = oracle_nn_match(v, grid)
        if sim >= params.xi:
            valid += 1
            if p_star in set(fg_indices):
                good += 1
    if valid < params.eta_min:
        return -1.0
    return good / valid


def oracle_adaptive_threshold(scores, params: IccdParams):
    q75 = float(np.percentile(np.asarray(scores, dtype=np.float64), 75))
    return float(np.clip(params.scale * q75, params.kappa_lo, params.kappa_hi))


def oracle_distill(refs, params: IccdParams):
    """Full re-computation of the multi-reference path.

    refs: dict image_id -> (grid, bank_fg_indices, target_fg_indices).
    Returns (kappa, [(image_id, patch_index, score)] in retained order);
    kappa is None when nothing was scorable.
    """
    ids = sorted(refs)
    scored = []
    for s in ids[: params.n_s]:
        grid, bank_fg, _ = refs[s]
        heldout = [(refs[t][0], refs[t][2]) for t in ids if t != s]
        for p in bank_fg:
            rho = oracle_coherence(grid.data[p], heldout, params)
            if rho >= 0.0:
                scored.append((s, int(p), rho))
    if not scored:
        return None, []
    kappa = oracle_adaptive_threshold([r for _, _, r in scored], params)
    eligible = [e for e in scored if e[2] >= kappa]
    eligible.sort(key=lambda e: (-e[2], e[0], e[1]))
    return kappa, eligible[: params.k]


def oracle_single_reference(grid, fg_indices, params: IccdParams):
    """O(n^2) cosine matrix, row max excluding the diagonal."""
    vectors = grid.data[list(fg_indices)].astype(np.float64)
    n = len(fg_indices)
    omega = np.full(n, -np.inf)
    for a in range(n):
        for b in range(n):
            if a != b:
                omega[a] = max(omega[a], float(vectors[a] @ vectors[b]))
    omega = np.clip(omega, -1.0, 1.0)
    scored = [
        (int(fg_indices[a]), float(omega[a])) for a in range(n) if omega[a] >= 0.0
    ]
    if not scored:
        return None, []
    kappa = oracle_adaptive_threshold([w for _, w in scored], params)
    eligible = [e for e in scored if e[1] >= kappa]
    eligible.sort(key=lambda e: (-e[1], e[0]))
    return kappa, eligible[: params.k]


def oracle_similarity_map(query: FeatureGrid, bank_vectors: np.ndarray):
    """Naive triple loop over patches, bank entries and dimensions."""
    out = np.zeros((query.grid_h, query.grid_w), dtype=np.float64)
    for i in range(query.grid_h):
        for j in range(query.grid_w):
            f = query.data[i * query.grid_w + j].astype(np.float64)
            best = -np.inf
            for v in bank_vectors:
                sim = float(f @ v.astype(np.float64))
                if sim > best:
                    best = sim
            out[i, j] = min(max(best, -1.0), 1.0)
    return out


def oracle_flood_fill(mask: np.ndarray):
    """Recursive-style flood fill; components in first-encounter order."""
    h, w = mask.shape
    seen = np.zeros((h, w), dtype=bool)
    components = []
    for i in range(h):
        for j in range(w):
            if not mask[i, j] or seen[i, j]:
                continue
            comp = set()
            frontier = [(i, j)]
            seen[i, j] = True
            while frontier:
                ci, cj = frontier.pop()
                comp.add((ci, cj))
                for di in (-1, 0, 1):
                    for dj in (-1, 0, 1):
                        ni, nj = ci + di, cj + dj
                        if 0 <= ni < h and 0 <= nj < w and mask[ni, nj] and not seen[ni, nj]:
                            seen[ni, nj] = True
                            frontier.append((ni, nj))
            components.append(frozenset(comp))
    return components


def oracle_peaks(values: np.ndarray, members, delta: int):
    """All-window local maxima plus quadratic greedy NMS over one
    component. `values` is the full map; `members` the component set."""
    member_set = set(members)
    candidates = []
    for (i, j) in sorted(member_set):
        v = float(values[i, j])
        is_max = True
        for di in range(-delta, delta + 1):
            for dj in range(-delta, delta + 1):
                ni, nj = i + di, j + dj
                if (ni, nj) in member_set and float(values[ni, nj]) > v:
                    is_max = False
        if is_max:
            candidates.append((i, j))
    candidates.sort(key=lambda p: (-float(values[p[0], p[1]]), p[0], p[1]))
    kept = []
    for ci, cj in candidates:
        if all((ci - ki) ** 2 + (cj - kj) ** 2 > delta * delta for ki, kj in kept):
            kept.append((ci, cj))
    return kept


def oracle_confusion(pred: np.ndarray, gt: np.ndarray):
    tp = fp = fn = tn = 0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            p, g = bool(pred[i, j]), bool(gt[i, j])
            if p and g:
                tp += 1
            elif p and not g:
                fp += 1
            elif not p and g:
                fn += 1
            else:
                tn += 1
    return tp, fp, fn, tn
