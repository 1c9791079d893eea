import numpy as np
import pytest

from mpctuner.config import ExperimentConfig
from mpctuner.world import build_esdf, builtin_environment


@pytest.fixture(scope="session")
def cfg():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def esdf(cfg):
    return build_esdf(builtin_environment(cfg.environment))


@pytest.fixture(scope="session")
def geom(cfg):
    return cfg.controller.geometry


def random_grid(rng, size=64, density=0.15):
    """Random occupancy grid with at least one free and one occupied cell."""
    occ = rng.random((size, size)) < density
    occ[rng.integers(size), rng.integers(size)] = True
    occ[rng.integers(size), rng.integers(size)] = False
    ix, iy = rng.integers(size), rng.integers(size)
    free_count = (~occ).sum()
    if free_count == 0:
        occ[iy, ix] = False
    return occ


def brute_force_sdf(occ: np.ndarray, resolution: float, cap: float = 10.0) -> np.ndarray:
    """Independent oracle: exhaustive nearest-cell-center scan."""
    h, w = occ.shape
    ys, xs = np.mgrid[0:h, 0:w]
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(float)
    occ_pts = pts[occ.ravel()]
    free_pts = pts[~occ.ravel()]
    out = np.zeros(h * w)
    for i, p in enumerate(pts):
        if occ.ravel()[i]:
            d = np.sqrt(((free_pts - p) ** 2).sum(axis=1)).min()
            out[i] = -d * resolution
        else:
            if len(occ_pts) == 0:
                out[i] = cap
            else:
                d = np.sqrt(((occ_pts - p) ** 2).sum(axis=1)).min()
                out[i] = min(d * resolution, cap)
    return out.reshape(h, w)
