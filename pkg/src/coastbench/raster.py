"""Multiband raster scenes, binary land/ocean masks, and their file format.

Everything downstream consumes :class:`RasterScene` and :class:`SegMask`.
On disk both live in the same minimal "bundle" layout: ``<name>.json``
carrying the header and ``<name>.bin`` carrying the raw payload,
band-sequential and row-major.  Scene payloads are little-endian float32
(``dtype: "f32le"``); mask payloads are single-band uint8 (``dtype: "u8"``)
with codes 0 = land, 1 = ocean, 255 = no-data.  A scene pixel is no-data
when the header's sentinel value (default -9999.0) occurs in every band.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import BundleFormatError

DEFAULT_NODATA = -9999.0
MASK_LAND = 0
MASK_OCEAN = 1
MASK_NODATA = 255
_MASK_CODES = frozenset((MASK_LAND, MASK_OCEAN, MASK_NODATA))


class BandRole(enum.IntEnum):
    """The seven-band roster shared by the supported sensors, in canonical order."""

    BLUE = 1
    GREEN = 2
    RED = 3
    NIR = 4
    SWIR1 = 5
    SWIR2 = 6
    THERMAL = 7

    @property
    def label(self) -> str:
        return _ROLE_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "BandRole":
        try:
            return _LABEL_ROLES[label]
        except KeyError:
            raise BundleFormatError(f"unknown band role {label!r}") from None


_ROLE_LABELS = {
    BandRole.BLUE: "Blue",
    BandRole.GREEN: "Green",
    BandRole.RED: "Red",
    BandRole.NIR: "NIR",
    BandRole.SWIR1: "SWIR1",
    BandRole.SWIR2: "SWIR2",
    BandRole.THERMAL: "Thermal",
}
_LABEL_ROLES = {label: role for role, label in _ROLE_LABELS.items()}

ALL_BANDS = tuple(BandRole)


@dataclass
class RasterScene:
    """A multi-band float32 image plus a per-pixel validity mask.

    ``data`` has shape ``(n_bands, height, width)``; ``band_roles`` names each
    plane in order.  ``nodata_mask`` is True where the pixel is invalid (e.g.
    the black bounding-box wedges at scene edges).  Instances are treated as
    immutable after construction.
    """

    scene_id: str
    band_roles: tuple[BandRole, ...]
    data: np.ndarray
    nodata_mask: np.ndarray
    nodata_value: float = DEFAULT_NODATA

    def __post_init__(self):
        self.band_roles = tuple(self.band_roles)
        self.data = np.asarray(self.data, dtype=np.float32)
        self.nodata_mask = np.asarray(self.nodata_mask, dtype=bool)
        if self.data.ndim != 3:
            raise ValueError("scene data must have shape (bands, height, width)")
        if len(self.band_roles) != self.data.shape[0]:
            raise ValueError("band role list does not match number of planes")
        if len(set(self.band_roles)) != len(self.band_roles):
            raise ValueError("duplicate band role in scene")
        if self.nodata_mask.shape != self.data.shape[1:]:
            raise ValueError("nodata mask dimensions do not match band planes")
        if self.height <= 0 or self.width <= 0:
            raise ValueError("scene dimensions must be positive")

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def has_band(self, role: BandRole) -> bool:
        return role in self.band_roles

    def band(self, role: BandRole) -> np.ndarray:
        """Return the 2-D plane for ``role`` (a view, do not mutate)."""
        try:
            idx = self.band_roles.index(role)
        except ValueError:
            raise KeyError(f"scene {self.scene_id!r} has no {role.label} band") from None
        return self.data[idx]

    def with_id(self, scene_id: str) -> "RasterScene":
        return replace(self, scene_id=scene_id)


@dataclass
class SegMask:
    """Binary land/ocean mask; codes 0 = land, 1 = ocean, 255 = no-data."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.uint8)
        if self.values.ndim != 2:
            raise ValueError("mask must be two-dimensional")
        if self.height <= 0 or self.width <= 0:
            raise ValueError("mask dimensions must be positive")
        codes = set(np.unique(self.values).tolist())
        if not codes <= _MASK_CODES:
            bad = sorted(codes - _MASK_CODES)
            raise ValueError(f"invalid mask code {bad[0]}")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return self.values != MASK_NODATA

    @property
    def ocean(self) -> np.ndarray:
        return self.values == MASK_OCEAN


def _bundle_paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        p = p.with_suffix("")
    return p.with_suffix(".json"), p.with_suffix(".bin")


def _read_header(header_path: Path) -> dict:
    try:
        with open(header_path, "r", encoding="utf-8") as fh:
            header = json.load(fh)
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleFormatError(f"unreadable bundle header {header_path}: {exc}") from exc
    for key in ("width", "height", "dtype", "bands", "nodata", "scene_id"):
        if key not in header:
            raise BundleFormatError(f"bundle header {header_path} missing field {key!r}")
    return header


def read_raster(path) -> RasterScene:
    """Read a float32 scene bundle from ``<path>.json`` + ``<path>.bin``."""
    header_path, payload_path = _bundle_paths(path)
    header = _read_header(header_path)
    if header["dtype"] != "f32le":
        raise BundleFormatError(f"expected dtype 'f32le' in {header_path}, got {header['dtype']!r}")
    width, height = int(header["width"]), int(header["height"])
    if width <= 0 or height <= 0:
        raise BundleFormatError(f"non-positive dimensions in {header_path}")
    roles = tuple(BandRole.from_label(name) for name in header["bands"])
    if len(set(roles)) != len(roles):
        raise BundleFormatError(f"duplicate band role in {header_path}")
    payload = payload_path.read_bytes()
    expected = width * height * len(roles) * 4
    if len(payload) != expected:
        raise BundleFormatError(
            f"payload size mismatch in {payload_path}: got {len(payload)} bytes, expected {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(len(roles), height, width)
    nodata = float(header["nodata"])
    nodata_mask = np.all(data == np.float32(nodata), axis=0)
    return RasterScene(
        scene_id=str(header["scene_id"]),
        band_roles=roles,
        data=data.astype(np.float32),
        nodata_mask=nodata_mask,
        nodata_value=nodata,
    )


def write_raster(scene: RasterScene, path) -> None:
    """Write a scene bundle; no-data pixels are stored as the sentinel in every band."""
    header_path, payload_path = _bundle_paths(path)
    data = scene.data.copy()
    data[:, scene.nodata_mask] = np.float32(scene.nodata_value)
    header = {
        "width": scene.width,
        "height": scene.height,
        "dtype": "f32le",
        "bands": [role.label for role in scene.band_roles],
        "nodata": scene.nodata_value,
        "scene_id": scene.scene_id,
    }
    header_path.parent.mkdir(parents=True, exist_ok=True)
    with open(header_path, "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    payload_path.write_bytes(data.astype("<f4").tobytes())


def read_mask(path) -> SegMask:
    """Read a mask bundle (dtype 'u8', single band named 'mask')."""
    header_path, payload_path = _bundle_paths(path)
    header = _read_header(header_path)
    if header["dtype"] != "u8":
        raise BundleFormatError(f"expected dtype 'u8' in {header_path}, got {header['dtype']!r}")
    if list(header["bands"]) != ["mask"]:
        raise BundleFormatError(f"mask bundle {header_path} must have a single 'mask' band")
    width, height = int(header["width"]), int(header["height"])
    payload = payload_path.read_bytes()
    if len(payload) != width * height:
        raise BundleFormatError(
            f"payload size mismatch in {payload_path}: got {len(payload)} bytes, expected {width * height}"
        )
    values = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    try:
        return SegMask(values=values.copy())
    except ValueError as exc:
        raise BundleFormatError(f"{payload_path}: {exc}") from exc


def write_mask(mask: SegMask, path) -> None:
    header_path, payload_path = _bundle_paths(path)
    header = {
        "width": mask.width,
        "height": mask.height,
        "dtype": "u8",
        "bands": ["mask"],
        "nodata": MASK_NODATA,
        "scene_id": Path(path).stem,
    }
    header_path.parent.mkdir(parents=True, exist_ok=True)
    with open(header_path, "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    payload_path.write_bytes(mask.values.astype(np.uint8).tobytes())
