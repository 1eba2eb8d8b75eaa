import numpy as np
import pytest

from protopoint.formats import BankVector, ClassBankFile, FeatureGrid
from protopoint.gridops import PatchIndexSet
from protopoint.params import IccdParams


def unit_rows(rng, n, dim):
    """Random unit float32 rows with norms well away from zero."""
    rows = rng.standard_normal((n, dim))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return rows.astype(np.float32)


def random_grid(rng, grid_h, grid_w, dim) -> FeatureGrid:
    data = unit_rows(rng, grid_h * grid_w, dim)
    return FeatureGrid(grid_h, grid_w, dim, data, normalized=True)


def onehot_grid(grid_h, grid_w, dim, axes=None) -> FeatureGrid:
    """Grid of exactly representable unit vectors (one-hot rows)."""
    n = grid_h * grid_w
    data = np.zeros((n, dim), dtype=np.float32)
    for p in range(n):
        axis = axes[p] if axes is not None else p % dim
        data[p, axis] = 1.0
    return FeatureGrid(grid_h, grid_w, dim, data, normalized=True)


def random_index_set(rng, n_patches, density=0.3) -> PatchIndexSet:
    picks = np.flatnonzero(rng.random(n_patches) < density)
    return PatchIndexSet(picks.astype(np.int64), n_patches)


def make_bank(vectors: np.ndarray, params: IccdParams | None = None,
              class_name="probe", kappa=0.7, fallback=False) -> ClassBankFile:
    params = params or IccdParams()
    entries = tuple(
        BankVector(np.ascontiguousarray(v, dtype=np.float32), "img", i, 0.9)
        for i, v in enumerate(vectors)
    )
    return ClassBankFile(class_name, vectors.shape[1], entries, params, fallback, kappa)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
