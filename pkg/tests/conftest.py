import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles / solar_reference helpers

from coastbench.raster import ALL_BANDS, RasterScene, SegMask


def build_scene(
    data_by_role: dict | None = None,
    height: int = 8,
    width: int = 8,
    scene_id: str = "scene",
    nodata_mask: np.ndarray | None = None,
    fill: float = 0.5,
) -> RasterScene:
    """Scene with all seven bands; unspecified bands hold ``fill``."""
    data_by_role = data_by_role or {}
    planes = []
    for role in ALL_BANDS:
        if role in data_by_role:
            plane = np.asarray(data_by_role[role], dtype=np.float32)
            height, width = plane.shape
            planes.append(plane)
        else:
            planes.append(None)
    planes = [
        p if p is not None else np.full((height, width), fill, dtype=np.float32) for p in planes
    ]
    if nodata_mask is None:
        nodata_mask = np.zeros((height, width), dtype=bool)
    return RasterScene(
        scene_id=scene_id, band_roles=ALL_BANDS, data=np.stack(planes), nodata_mask=nodata_mask
    )


def separable_scene(
    ocean: np.ndarray, scene_id: str = "separable", rng: np.random.Generator | None = None
) -> tuple[RasterScene, SegMask]:
    """Scene whose green/NIR difference is positive exactly over ``ocean``."""
    from coastbench.fixtures import BAND_LEVELS, NOISE_AMPLITUDE

    ocean = np.asarray(ocean, dtype=bool)
    h, w = ocean.shape
    planes = {}
    for role, (land_level, ocean_level) in BAND_LEVELS.items():
        base = np.where(ocean, ocean_level, land_level)
        if rng is not None:
            base = base + rng.uniform(-NOISE_AMPLITUDE, NOISE_AMPLITUDE, size=(h, w))
        planes[role] = base.astype(np.float32)
    scene = build_scene(planes, scene_id=scene_id)
    mask = SegMask(values=ocean.astype(np.uint8))
    return scene, mask


@pytest.fixture
def rng():
    return np.random.default_rng(20240717)
