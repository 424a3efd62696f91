"""Scene catalog ingestion, filtering, and selection.

The catalog is a CSV of per-scene metadata.  Records are filtered by sensor,
acquisition-era, processing-tier, and cloud-cover rules, enriched with the
solar altitude at the scene centre, binned into low/medium/high sun classes,
and finally thinned to one lowest-cloud scene per (year, altitude class)
plus optional per-tile extras.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone
from pathlib import Path
from collections.abc import Iterable, Mapping

from .parallel import parallel_map
from .solar import solar_altitude


class Satellite(enum.Enum):
    L5 = "L5"
    L7 = "L7"
    L8 = "L8"
    L9 = "L9"


class AltitudeClass(enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


@dataclass
class SceneRecord:
    scene_id: str
    satellite: Satellite
    acquired_at: datetime
    path: int
    row: int
    tier: int
    cloud_cover_pct: float
    center_lat: float
    center_lon: float
    solar_altitude_deg: float | None = None
    altitude_class: AltitudeClass | None = None

    def __post_init__(self):
        if not 0.0 <= self.cloud_cover_pct <= 100.0:
            raise ValueError(f"{self.scene_id}: cloud cover {self.cloud_cover_pct} outside [0, 100]")
        if not -90.0 <= self.center_lat <= 90.0:
            raise ValueError(f"{self.scene_id}: latitude {self.center_lat} outside [-90, 90]")
        if not -180.0 <= self.center_lon <= 180.0:
            raise ValueError(f"{self.scene_id}: longitude {self.center_lon} outside [-180, 180]")
        if self.acquired_at.tzinfo is None:
            self.acquired_at = self.acquired_at.replace(tzinfo=timezone.utc)
        else:
            self.acquired_at = self.acquired_at.astimezone(timezone.utc)

    @property
    def tile(self) -> tuple[int, int]:
        return (self.path, self.row)


@dataclass(frozen=True)
class SelectionPolicy:
    """Knobs for catalog filtering, sun-class binning, and scene selection."""

    max_cloud_pct: float = 10.0
    allowed_satellites: frozenset[Satellite] = frozenset(Satellite)
    l7_cutoff_date: date = date(2003, 5, 31)
    required_tier: int = 1
    low_max_deg: float = 30.0
    high_min_deg: float = 50.0
    per_tile_extra: Mapping[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.low_max_deg < self.high_min_deg:
            raise ValueError("altitude thresholds must satisfy low_max < high_min")


def classify_altitude(alt_deg: float, policy: SelectionPolicy | None = None) -> AltitudeClass:
    """High above ``high_min`` (strict), medium above ``low_max`` (strict), low otherwise."""
    policy = policy or SelectionPolicy()
    if alt_deg > policy.high_min_deg:
        return AltitudeClass.HIGH
    if alt_deg > policy.low_max_deg:
        return AltitudeClass.MEDIUM
    return AltitudeClass.LOW


def compute_altitudes(
    records: Iterable[SceneRecord],
    policy: SelectionPolicy | None = None,
    threads: int | None = None,
) -> list[SceneRecord]:
    """Return copies of ``records`` with solar altitude and class filled in."""
    policy = policy or SelectionPolicy()
    records = list(records)

    def enrich(rec: SceneRecord) -> SceneRecord:
        alt = solar_altitude(rec.center_lat, rec.center_lon, rec.acquired_at)
        return replace(rec, solar_altitude_deg=alt, altitude_class=classify_altitude(alt, policy))

    return parallel_map(enrich, records, threads=threads)


def filter_catalog(records: Iterable[SceneRecord], policy: SelectionPolicy | None = None) -> list[SceneRecord]:
    """Keep records passing the sensor/era/tier/cloud rules; order preserved."""
    policy = policy or SelectionPolicy()
    kept = []
    for rec in records:
        if rec.satellite not in policy.allowed_satellites:
            continue
        if rec.satellite is Satellite.L7 and rec.acquired_at.date() >= policy.l7_cutoff_date:
            continue
        if rec.tier != policy.required_tier:
            continue
        if not rec.cloud_cover_pct < policy.max_cloud_pct:
            continue
        kept.append(rec)
    return kept


def _pick_order(rec: SceneRecord):
    return (rec.cloud_cover_pct, rec.acquired_at, rec.scene_id)


def select_scenes(records: Iterable[SceneRecord], policy: SelectionPolicy | None = None) -> list[SceneRecord]:
    """One lowest-cloud scene per (UTC year, altitude class), plus per-tile extras.

    Ties break on earlier acquisition, then scene id.  The result is
    de-duplicated and sorted by acquisition time.  Records must already carry
    an altitude class (see :func:`compute_altitudes`).
    """
    policy = policy or SelectionPolicy()
    records = list(records)
    for rec in records:
        if rec.altitude_class is None:
            raise ValueError(f"{rec.scene_id}: altitude class not computed before selection")

    groups: dict[tuple[int, AltitudeClass], list[SceneRecord]] = {}
    for rec in records:
        groups.setdefault((rec.acquired_at.year, rec.altitude_class), []).append(rec)

    chosen: dict[str, SceneRecord] = {}
    for key in sorted(groups, key=lambda k: (k[0], k[1].value)):
        best = min(groups[key], key=_pick_order)
        chosen[best.scene_id] = best

    for tile in sorted(policy.per_tile_extra):
        extra = policy.per_tile_extra[tile]
        candidates = sorted(
            (r for r in records if r.tile == tile and r.scene_id not in chosen),
            key=_pick_order,
        )
        for rec in candidates[:extra]:
            chosen[rec.scene_id] = rec

    return sorted(chosen.values(), key=lambda r: (r.acquired_at, r.scene_id))


# ---------------------------------------------------------------------------
# CSV interface

CATALOG_FIELDS = [
    "scene_id",
    "satellite",
    "acquired_at",
    "path",
    "row",
    "tier",
    "cloud_cover_pct",
    "center_lat",
    "center_lon",
]
OUTPUT_FIELDS = CATALOG_FIELDS + ["solar_altitude_deg", "altitude_class"]


def _parse_timestamp(text: str) -> datetime:
    t = datetime.fromisoformat(text.replace("Z", "+00:00"))
    return t if t.tzinfo else t.replace(tzinfo=timezone.utc)


def _format_timestamp(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def read_catalog(path) -> list[SceneRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(CATALOG_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"catalog {path} missing columns: {sorted(missing)}")
        for line in reader:
            rec = SceneRecord(
                scene_id=line["scene_id"],
                satellite=Satellite(line["satellite"]),
                acquired_at=_parse_timestamp(line["acquired_at"]),
                path=int(line["path"]),
                row=int(line["row"]),
                tier=int(line["tier"]),
                cloud_cover_pct=float(line["cloud_cover_pct"]),
                center_lat=float(line["center_lat"]),
                center_lon=float(line["center_lon"]),
            )
            if line.get("solar_altitude_deg"):
                rec.solar_altitude_deg = float(line["solar_altitude_deg"])
            if line.get("altitude_class"):
                rec.altitude_class = AltitudeClass(line["altitude_class"])
            records.append(rec)
    return records


def write_catalog(records: Iterable[SceneRecord], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(OUTPUT_FIELDS)
        for rec in records:
            writer.writerow(
                [
                    rec.scene_id,
                    rec.satellite.value,
                    _format_timestamp(rec.acquired_at),
                    rec.path,
                    rec.row,
                    rec.tier,
                    repr(rec.cloud_cover_pct),
                    repr(rec.center_lat),
                    repr(rec.center_lon),
                    "" if rec.solar_altitude_deg is None else repr(rec.solar_altitude_deg),
                    "" if rec.altitude_class is None else rec.altitude_class.value,
                ]
            )


# ---------------------------------------------------------------------------
# CSV summaries of the catalog distributions (month -> mean altitude,
# cloud-cover histogram), emitted instead of plots.

def altitude_by_month(records: Iterable[SceneRecord]) -> list[tuple[int, float, int]]:
    sums: dict[int, tuple[float, int]] = {}
    for rec in records:
        if rec.solar_altitude_deg is None:
            raise ValueError(f"{rec.scene_id}: altitude not computed")
        total, n = sums.get(rec.acquired_at.month, (0.0, 0))
        sums[rec.acquired_at.month] = (total + rec.solar_altitude_deg, n + 1)
    return [(month, total / n, n) for month, (total, n) in sorted(sums.items())]


def cloud_histogram(records: Iterable[SceneRecord], bin_width: float = 10.0) -> list[tuple[float, int]]:
    counts: dict[int, int] = {}
    for rec in records:
        idx = min(int(rec.cloud_cover_pct // bin_width), int(100.0 // bin_width) - 1)
        counts[idx] = counts.get(idx, 0) + 1
    return [(idx * bin_width, counts[idx]) for idx in sorted(counts)]


def write_summaries(records: list[SceneRecord], out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "altitude_by_month.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", "mean_solar_altitude_deg", "n"])
        for month, mean_alt, n in altitude_by_month(records):
            writer.writerow([month, repr(mean_alt), n])
    with open(out / "cloud_histogram.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cloud_bin_low_pct", "count"])
        for bin_low, count in cloud_histogram(records):
            writer.writerow([repr(bin_low), count])
