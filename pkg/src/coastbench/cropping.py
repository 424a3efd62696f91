"""Constrained crop sampling, flip augmentation, and the dataset manifest.

Each tile gets exactly one test window, sampled once on the tile's earliest
scene and reused for every scene of that tile so the test geography stays
fixed.  Training windows are rejection-sampled per scene: they must contain
no no-data pixels and must not intersect the tile's test rectangle; mutual
overlap between training crops is allowed.  Flips are drawn per crop, each
axis independently with probability 0.5; the vertical flip is applied before
the horizontal one.

The manifest is JSON lines: a meta record ``{"rng_seed": ...}`` followed by
one record per crop.  Together with the scenes it regenerates every crop
byte for byte.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from collections.abc import Mapping, Sequence

import numpy as np

from . import raster
from .catalog import AltitudeClass, SceneRecord
from .errors import NoFeasibleWindowError
from .metrics import CoastalType
from .raster import RasterScene, SegMask
from .seeding import derive_seed

CROP_SIZE = 256
TRAIN_CROPS_PER_SCENE = 300
OCEAN_FRACTION_RANGE = (0.40, 0.60)
MAX_ATTEMPTS = 10_000


class Split(enum.Enum):
    TRAIN = "train"
    TEST = "test"


class MaskSource(enum.Enum):
    ROUGH = "rough"
    PRECISE = "precise"


@dataclass(frozen=True)
class CropSpec:
    scene_id: str
    row0: int
    col0: int
    size: int
    split: Split
    flip_v: bool
    flip_h: bool
    seed: int

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError("crop size must be positive")
        if self.row0 < 0 or self.col0 < 0:
            raise ValueError("crop origin must be non-negative")
        if self.split is Split.TEST and (self.flip_v or self.flip_h):
            raise ValueError("test crops are never flipped")


@dataclass(frozen=True)
class ManifestEntry:
    spec: CropSpec
    index: int
    tile: tuple[int, int]
    acquired_at: datetime
    altitude_class: AltitudeClass
    coastal_type: CoastalType
    mask_source: MaskSource

    @property
    def crop_id(self) -> str:
        return f"{self.spec.scene_id}_{self.spec.split.value}_{self.index}"


@dataclass
class DatasetManifest:
    rng_seed: int
    entries: list[ManifestEntry]

    def test_entries(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.spec.split is Split.TEST]

    def train_entries(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.spec.split is Split.TRAIN]


def rects_intersect(r0a: int, c0a: int, sa: int, r0b: int, c0b: int, sb: int) -> bool:
    return not (r0a + sa <= r0b or r0b + sb <= r0a or c0a + sa <= c0b or c0b + sb <= c0a)


class _WindowStats:
    """O(1) window sums over the no-data / ocean / valid-mask indicators."""

    def __init__(self, scene: RasterScene, mask: SegMask | None = None):
        self._nodata = self._integral(scene.nodata_mask)
        if mask is not None:
            self._ocean = self._integral(mask.ocean)
            self._mask_valid = self._integral(mask.valid)
        else:
            self._ocean = self._mask_valid = None

    @staticmethod
    def _integral(indicator: np.ndarray) -> np.ndarray:
        table = np.zeros((indicator.shape[0] + 1, indicator.shape[1] + 1), dtype=np.int64)
        np.cumsum(np.cumsum(indicator, axis=0), axis=1, out=table[1:, 1:])
        return table

    @staticmethod
    def _window(table: np.ndarray, r0: int, c0: int, size: int) -> int:
        r1, c1 = r0 + size, c0 + size
        return int(table[r1, c1] - table[r0, c1] - table[r1, c0] + table[r0, c0])

    def nodata_count(self, r0: int, c0: int, size: int) -> int:
        return self._window(self._nodata, r0, c0, size)

    def ocean_fraction(self, r0: int, c0: int, size: int) -> float | None:
        valid = self._window(self._mask_valid, r0, c0, size)
        if valid == 0:
            return None
        return self._window(self._ocean, r0, c0, size) / valid


def sample_test_crop(
    scene: RasterScene,
    rough_mask: SegMask,
    seed: int,
    size: int = CROP_SIZE,
    ocean_range: tuple[float, float] = OCEAN_FRACTION_RANGE,
    max_attempts: int = MAX_ATTEMPTS,
) -> CropSpec:
    """Uniformly sample a test window: no no-data pixels, balanced land/ocean."""
    if scene.data.shape[1:] != rough_mask.values.shape:
        raise ValueError("scene and rough mask dimensions differ")
    if scene.height < size or scene.width < size:
        raise NoFeasibleWindowError(
            f"scene {scene.scene_id!r} ({scene.height}x{scene.width}) cannot host a {size}x{size} crop"
        )
    stats = _WindowStats(scene, rough_mask)
    rng = np.random.default_rng(seed)
    lo, hi = ocean_range
    for _ in range(max_attempts):
        r0 = int(rng.integers(0, scene.height - size + 1))
        c0 = int(rng.integers(0, scene.width - size + 1))
        if stats.nodata_count(r0, c0, size) != 0:
            continue
        fraction = stats.ocean_fraction(r0, c0, size)
        if fraction is None or not lo <= fraction <= hi:
            continue
        return CropSpec(
            scene_id=scene.scene_id,
            row0=r0,
            col0=c0,
            size=size,
            split=Split.TEST,
            flip_v=False,
            flip_h=False,
            seed=seed,
        )
    raise NoFeasibleWindowError(
        f"no feasible window on scene {scene.scene_id!r} after {max_attempts} attempts"
    )


def sample_train_crops(
    scene: RasterScene,
    test_crop: CropSpec,
    n: int = TRAIN_CROPS_PER_SCENE,
    seed: int = 0,
    size: int = CROP_SIZE,
    max_attempts: int = MAX_ATTEMPTS,
) -> list[CropSpec]:
    """Sample ``n`` training windows avoiding no-data and the test rectangle."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if scene.height < size or scene.width < size:
        raise NoFeasibleWindowError(
            f"scene {scene.scene_id!r} ({scene.height}x{scene.width}) cannot host a {size}x{size} crop"
        )
    stats = _WindowStats(scene)
    rng = np.random.default_rng(seed)
    crops: list[CropSpec] = []
    for _ in range(n):
        for _ in range(max_attempts):
            r0 = int(rng.integers(0, scene.height - size + 1))
            c0 = int(rng.integers(0, scene.width - size + 1))
            if stats.nodata_count(r0, c0, size) != 0:
                continue
            if rects_intersect(r0, c0, size, test_crop.row0, test_crop.col0, test_crop.size):
                continue
            crops.append(
                CropSpec(
                    scene_id=scene.scene_id,
                    row0=r0,
                    col0=c0,
                    size=size,
                    split=Split.TRAIN,
                    flip_v=bool(rng.random() < 0.5),
                    flip_h=bool(rng.random() < 0.5),
                    seed=seed,
                )
            )
            break
        else:
            raise NoFeasibleWindowError(
                f"no feasible window on scene {scene.scene_id!r} after {max_attempts} attempts "
                f"(found {len(crops)} of {n} crops)"
            )
    return crops


def extract_crop(scene: RasterScene, mask: SegMask, spec: CropSpec) -> tuple[RasterScene, SegMask]:
    """Cut the window out of scene and mask, applying the same flips to both."""
    if scene.data.shape[1:] != mask.values.shape:
        raise ValueError("scene and mask dimensions differ")
    r1 = spec.row0 + spec.size
    c1 = spec.col0 + spec.size
    if r1 > scene.height or c1 > scene.width:
        raise ValueError(
            f"crop ({spec.row0},{spec.col0})+{spec.size} out of bounds for "
            f"{scene.height}x{scene.width} scene"
        )
    data = scene.data[:, spec.row0 : r1, spec.col0 : c1]
    nodata = scene.nodata_mask[spec.row0 : r1, spec.col0 : c1]
    values = mask.values[spec.row0 : r1, spec.col0 : c1]
    if spec.flip_v:
        data = data[:, ::-1, :]
        nodata = nodata[::-1, :]
        values = values[::-1, :]
    if spec.flip_h:
        data = data[:, :, ::-1]
        nodata = nodata[:, ::-1]
        values = values[:, ::-1]
    crop_scene = RasterScene(
        scene_id=scene.scene_id,
        band_roles=scene.band_roles,
        data=data.copy(),
        nodata_mask=nodata.copy(),
        nodata_value=scene.nodata_value,
    )
    return crop_scene, SegMask(values=values.copy())


# ---------------------------------------------------------------------------
# Dataset build: sample, materialize crops as bundles, write the manifest.

def build_dataset(
    records: Sequence[SceneRecord],
    scene_dir,
    rough_mask_dir,
    out_dir,
    precise_mask_dir=None,
    train_per_scene: int = TRAIN_CROPS_PER_SCENE,
    crop_size: int = CROP_SIZE,
    ocean_range: tuple[float, float] = OCEAN_FRACTION_RANGE,
    rng_seed: int = 0,
    coastal_types: Mapping[tuple[int, int], CoastalType] | None = None,
) -> DatasetManifest:
    """Materialize crops for the selected scenes and write ``manifest.jsonl``.

    Expects ``<scene_id>`` bundles in ``scene_dir`` and ``<scene_id>_mask``
    bundles in ``rough_mask_dir`` (and optionally ``precise_mask_dir``, used
    for test-crop masks when present).
    """
    scene_dir = Path(scene_dir)
    rough_mask_dir = Path(rough_mask_dir)
    out_dir = Path(out_dir)
    crops_dir = out_dir / "crops"
    crops_dir.mkdir(parents=True, exist_ok=True)
    coastal_types = coastal_types or {}

    by_tile: dict[tuple[int, int], list[SceneRecord]] = {}
    for rec in records:
        if rec.altitude_class is None:
            raise ValueError(f"{rec.scene_id}: altitude class missing; run selection first")
        by_tile.setdefault(rec.tile, []).append(rec)

    entries: list[ManifestEntry] = []
    for tile in sorted(by_tile):
        tile_records = sorted(by_tile[tile], key=lambda r: (r.acquired_at, r.scene_id))
        test_rect: CropSpec | None = None
        for rec in tile_records:
            scene = raster.read_raster(scene_dir / rec.scene_id)
            rough = raster.read_mask(rough_mask_dir / f"{rec.scene_id}_mask")
            precise = None
            if precise_mask_dir is not None:
                precise_path = Path(precise_mask_dir) / f"{rec.scene_id}_mask.json"
                if precise_path.exists():
                    precise = raster.read_mask(precise_path)

            if test_rect is None:
                test_seed = derive_seed(rng_seed, "test-crop", tile[0], tile[1])
                test_rect = sample_test_crop(
                    scene, rough, seed=test_seed, size=crop_size, ocean_range=ocean_range
                )
            test_spec = replace(test_rect, scene_id=rec.scene_id)

            test_mask = precise if precise is not None else rough
            mask_source = MaskSource.PRECISE if precise is not None else MaskSource.ROUGH
            entry = ManifestEntry(
                spec=test_spec,
                index=0,
                tile=tile,
                acquired_at=rec.acquired_at,
                altitude_class=rec.altitude_class,
                coastal_type=coastal_types.get(tile, CoastalType.UNLABELED),
                mask_source=mask_source,
            )
            _materialize(entry, scene, test_mask, crops_dir)
            entries.append(entry)

            train_seed = derive_seed(rng_seed, "train-crops", rec.scene_id)
            train_specs = sample_train_crops(
                scene, test_spec, n=train_per_scene, seed=train_seed, size=crop_size
            )
            for i, spec in enumerate(train_specs):
                entry = ManifestEntry(
                    spec=spec,
                    index=i,
                    tile=tile,
                    acquired_at=rec.acquired_at,
                    altitude_class=rec.altitude_class,
                    coastal_type=coastal_types.get(tile, CoastalType.UNLABELED),
                    mask_source=MaskSource.ROUGH,
                )
                _materialize(entry, scene, rough, crops_dir)
                entries.append(entry)

    manifest = DatasetManifest(rng_seed=rng_seed, entries=entries)
    write_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest


def _materialize(entry: ManifestEntry, scene: RasterScene, mask: SegMask, crops_dir: Path) -> None:
    crop_scene, crop_mask = extract_crop(scene, mask, entry.spec)
    raster.write_raster(crop_scene.with_id(entry.crop_id), crops_dir / entry.crop_id)
    raster.write_mask(crop_mask, crops_dir / f"{entry.crop_id}_mask")


def entry_to_dict(entry: ManifestEntry) -> dict:
    return {
        "scene_id": entry.spec.scene_id,
        "row0": entry.spec.row0,
        "col0": entry.spec.col0,
        "size": entry.spec.size,
        "split": entry.spec.split.value,
        "flip_v": entry.spec.flip_v,
        "flip_h": entry.spec.flip_h,
        "seed": entry.spec.seed,
        "index": entry.index,
        "tile": list(entry.tile),
        "acquired_at": entry.acquired_at.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "altitude_class": entry.altitude_class.value,
        "coastal_type": entry.coastal_type.value,
        "mask_source": entry.mask_source.value,
    }


def entry_from_dict(payload: dict) -> ManifestEntry:
    spec = CropSpec(
        scene_id=payload["scene_id"],
        row0=payload["row0"],
        col0=payload["col0"],
        size=payload["size"],
        split=Split(payload["split"]),
        flip_v=payload["flip_v"],
        flip_h=payload["flip_h"],
        seed=payload["seed"],
    )
    return ManifestEntry(
        spec=spec,
        index=payload["index"],
        tile=tuple(payload["tile"]),
        acquired_at=datetime.fromisoformat(payload["acquired_at"].replace("Z", "+00:00")),
        altitude_class=AltitudeClass(payload["altitude_class"]),
        coastal_type=CoastalType(payload["coastal_type"]),
        mask_source=MaskSource(payload["mask_source"]),
    )


def write_manifest(manifest: DatasetManifest, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"rng_seed": manifest.rng_seed}, sort_keys=True) + "\n")
        for entry in manifest.entries:
            fh.write(json.dumps(entry_to_dict(entry), sort_keys=True) + "\n")


def read_manifest(path) -> DatasetManifest:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise ValueError(f"manifest {path} is empty")
    meta = json.loads(lines[0])
    entries = [entry_from_dict(json.loads(line)) for line in lines[1:]]
    return DatasetManifest(rng_seed=meta["rng_seed"], entries=entries)


def audit_manifest(
    manifest: DatasetManifest,
    scene_dir,
    rough_mask_dir,
    ocean_range: tuple[float, float] = OCEAN_FRACTION_RANGE,
) -> None:
    """Re-validate every manifest entry's constraints against the source data.

    Raises ValueError on the first violated constraint.
    """
    scene_dir = Path(scene_dir)
    rough_mask_dir = Path(rough_mask_dir)
    test_rects: dict[tuple[int, int], CropSpec] = {}
    for entry in manifest.test_entries():
        known = test_rects.setdefault(entry.tile, entry.spec)
        if (known.row0, known.col0, known.size) != (entry.spec.row0, entry.spec.col0, entry.spec.size):
            raise ValueError(f"tile {entry.tile} has more than one test crop region")

    cache: dict[str, tuple[RasterScene, _WindowStats]] = {}

    def load(scene_id: str) -> tuple[RasterScene, _WindowStats]:
        if scene_id not in cache:
            scene = raster.read_raster(scene_dir / scene_id)
            rough = raster.read_mask(rough_mask_dir / f"{scene_id}_mask")
            cache[scene_id] = (scene, _WindowStats(scene, rough))
        return cache[scene_id]

    lo, hi = ocean_range
    for entry in manifest.entries:
        spec = entry.spec
        scene, stats = load(spec.scene_id)
        if spec.row0 + spec.size > scene.height or spec.col0 + spec.size > scene.width:
            raise ValueError(f"{entry.crop_id}: crop out of scene bounds")
        if stats.nodata_count(spec.row0, spec.col0, spec.size) != 0:
            raise ValueError(f"{entry.crop_id}: crop contains no-data pixels")
        if spec.split is Split.TEST:
            fraction = stats.ocean_fraction(spec.row0, spec.col0, spec.size)
            if fraction is None or not lo <= fraction <= hi:
                raise ValueError(f"{entry.crop_id}: test crop ocean fraction {fraction} outside [{lo}, {hi}]")
        else:
            rect = test_rects.get(entry.tile)
            if rect is not None and rects_intersect(
                spec.row0, spec.col0, spec.size, rect.row0, rect.col0, rect.size
            ):
                raise ValueError(f"{entry.crop_id}: training crop intersects the test rectangle")
