"""Synthetic fixtures: perfectly separable coastal scenes plus a catalog.

Each tile gets a fixed wavy land/ocean geography (stable across that tile's
scenes); band intensities are class-dependent levels plus a little per-scene
noise, chosen so the green/NIR index is positive exactly over ocean.  A
no-data wedge in the corner mimics the black scene-edge geometry.  Rough and
precise masks are identical here, which makes the index baseline exact: the
end-to-end pipeline must report accuracy 1.0 on these fixtures.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime
from pathlib import Path

import numpy as np

from . import raster
from .raster import ALL_BANDS, BandRole, RasterScene, SegMask
from .seeding import derive_rng

# (land, ocean) level per band; green vs NIR straddles zero index difference.
BAND_LEVELS = {
    BandRole.BLUE: (0.10, 0.22),
    BandRole.GREEN: (0.12, 0.30),
    BandRole.RED: (0.18, 0.12),
    BandRole.NIR: (0.35, 0.08),
    BandRole.SWIR1: (0.30, 0.05),
    BandRole.SWIR2: (0.25, 0.04),
    BandRole.THERMAL: (0.55, 0.45),
}
NOISE_AMPLITUDE = 0.02

FIXTURE_TILES = [(205, 23), (207, 22)]
TILE_CENTERS = {(205, 23): (53.7, -8.0), (207, 22): (54.8, -9.5)}
COASTAL_TYPES = {(205, 23): "sandy", (207, 22): "rocky"}


def tile_ocean_geography(tile: tuple[int, int], height: int, width: int) -> np.ndarray:
    """Boolean ocean map for a tile: everything right of a wavy coastline."""
    phase = (tile[0] * 7 + tile[1] * 13) % 17 / 17.0 * 2 * np.pi
    rows = np.arange(height)
    boundary = width / 2 + (width / 10) * np.sin(2 * np.pi * rows / max(64, height // 3) + phase)
    cols = np.arange(width)
    return cols[None, :] >= boundary[:, None]


def nodata_wedge(height: int, width: int, wedge: int) -> np.ndarray:
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    return rows + cols < wedge


def make_scene(
    scene_id: str,
    tile: tuple[int, int],
    height: int,
    width: int,
    seed: int,
    wedge: int = 0,
) -> tuple[RasterScene, SegMask]:
    """One synthetic scene and its (rough == precise) annotation mask."""
    ocean = tile_ocean_geography(tile, height, width)
    nodata = nodata_wedge(height, width, wedge) if wedge > 0 else np.zeros((height, width), dtype=bool)
    rng = derive_rng(seed, "scene-bands", scene_id)
    planes = []
    for role in ALL_BANDS:
        land_level, ocean_level = BAND_LEVELS[role]
        base = np.where(ocean, ocean_level, land_level)
        noise = rng.uniform(-NOISE_AMPLITUDE, NOISE_AMPLITUDE, size=(height, width))
        planes.append((base + noise).astype(np.float32))
    scene = RasterScene(
        scene_id=scene_id,
        band_roles=ALL_BANDS,
        data=np.stack(planes),
        nodata_mask=nodata,
    )
    values = np.where(ocean, raster.MASK_OCEAN, raster.MASK_LAND).astype(np.uint8)
    values[nodata] = raster.MASK_NODATA
    mask = SegMask(values=values)
    return scene, mask


_SELECTED = [
    # (tile, satellite, acquisition, cloud %): one scene per altitude class
    # per tile-year: midsummer (high sun), late September (medium), midwinter (low).
    ((205, 23), "L5", "1995-06-20T11:30:00Z", 2.5),
    ((205, 23), "L5", "1995-09-25T11:30:00Z", 4.0),
    ((205, 23), "L5", "1995-12-20T11:30:00Z", 1.5),
    ((207, 22), "L5", "2005-06-21T11:30:00Z", 3.0),
    ((207, 22), "L5", "2005-09-26T11:30:00Z", 2.0),
    ((207, 22), "L5", "2005-12-21T11:30:00Z", 5.5),
]

_REJECTS = [
    # Filtered out before any scene file is touched: post-cutoff L7, wrong
    # tier, too cloudy.
    ((205, 23), "L7", "2004-01-05T11:30:00Z", 1, 2.0),
    ((205, 23), "L5", "1995-07-06T11:30:00Z", 2, 1.0),
    ((207, 22), "L8", "2005-06-29T11:30:00Z", 1, 55.0),
]


def scene_identifier(satellite: str, tile: tuple[int, int], stamp: str) -> str:
    day = datetime.fromisoformat(stamp.replace("Z", "+00:00")).strftime("%Y%m%d")
    return f"{satellite}_{tile[0]:03d}{tile[1]:03d}_{day}"


def make_fixtures(out_dir, seed: int = 0, scene_size: int = 800, wedge: int = 48) -> Path:
    """Write the fixture dataset under ``out_dir`` and return that path.

    Layout: ``catalog.csv``, ``coastal_types.json``, ``scenes/``,
    ``masks/rough/``, ``masks/precise/``.  A training window must avoid the
    test rectangle entirely, which is only possible for every test-rectangle
    position when the scene is at least three crop sizes wide; the default
    800 therefore leaves room for the standard 256-pixel crops wherever the
    test window lands.
    """
    out = Path(out_dir)
    scenes_dir = out / "scenes"
    rough_dir = out / "masks" / "rough"
    precise_dir = out / "masks" / "precise"
    for d in (scenes_dir, rough_dir, precise_dir):
        d.mkdir(parents=True, exist_ok=True)

    rows = []
    for tile, satellite, stamp, cloud in _SELECTED:
        scene_id = scene_identifier(satellite, tile, stamp)
        scene, mask = make_scene(scene_id, tile, scene_size, scene_size, seed=seed, wedge=wedge)
        raster.write_raster(scene, scenes_dir / scene_id)
        raster.write_mask(mask, rough_dir / f"{scene_id}_mask")
        raster.write_mask(mask, precise_dir / f"{scene_id}_mask")
        lat, lon = TILE_CENTERS[tile]
        rows.append([scene_id, satellite, stamp, tile[0], tile[1], 1, cloud, lat, lon])
    for tile, satellite, stamp, tier, cloud in _REJECTS:
        scene_id = scene_identifier(satellite, tile, stamp)
        lat, lon = TILE_CENTERS[tile]
        rows.append([scene_id, satellite, stamp, tile[0], tile[1], tier, cloud, lat, lon])

    with open(out / "catalog.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["scene_id", "satellite", "acquired_at", "path", "row", "tier", "cloud_cover_pct", "center_lat", "center_lon"]
        )
        writer.writerows(rows)

    with open(out / "coastal_types.json", "w", encoding="utf-8") as fh:
        json.dump({f"{t[0]}_{t[1]}": kind for t, kind in sorted(COASTAL_TYPES.items())}, fh, indent=2)
        fh.write("\n")
    return out
