"""Segmentation metrics: confusion-matrix scores, coastline-buffered
variants, mask edge maps, the edge figure of merit, and report aggregation.

Per-image scores are collected into :class:`MetricRow` objects; a report
macro-averages them (unweighted mean over images) overall and within each
stratum (tile, decade, altitude class, coastal type).
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple
from collections.abc import Iterable, Sequence

import numpy as np

from .edt import squared_edt
from .errors import EmptyRegionError
from .raster import MASK_NODATA, SegMask
from .validation import check_same_shape

DEFAULT_BUFFER_RADIUS = 10
DEFAULT_FOM_ALPHA = 1.0 / 9.0

METRIC_NAMES = [
    "accuracy",
    "precision",
    "recall",
    "f1",
    "fom",
    "buffered_accuracy",
    "buffered_precision",
    "buffered_recall",
    "buffered_f1",
]


class CoastalType(enum.Enum):
    SANDY = "sandy"
    ROCKY = "rocky"
    UNLABELED = "unlabeled"


class ConfusionCounts(NamedTuple):
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class EdgeMap:
    """Boolean image marking pixels where a mask's discrete gradient is nonzero."""

    edge: np.ndarray

    def __post_init__(self):
        self.edge = np.asarray(self.edge, dtype=bool)
        if self.edge.ndim != 2:
            raise ValueError("edge map must be two-dimensional")

    @property
    def count(self) -> int:
        return int(self.edge.sum())


@dataclass(frozen=True)
class Strata:
    tile: tuple[int, int] | None = None
    decade: int | None = None
    altitude_class: str | None = None
    coastal_type: str | None = None


@dataclass
class MetricRow:
    image_id: str
    accuracy: float
    precision: float
    recall: float
    f1: float
    fom: float
    buffered_accuracy: float
    buffered_precision: float
    buffered_recall: float
    buffered_f1: float
    strata: Strata = field(default_factory=Strata)

    def metric(self, name: str) -> float:
        return getattr(self, name)


@dataclass
class EvalReport:
    n_images: int
    overall: dict[str, float]
    by_tile: dict[str, dict[str, float]]
    by_decade: dict[str, dict[str, float]]
    by_altitude: dict[str, dict[str, float]]
    by_coastal_type: dict[str, dict[str, float]]


def confusion(pred: SegMask, truth: SegMask, region: np.ndarray | None = None) -> ConfusionCounts:
    """Count TP/FP/TN/FN over ``region`` (default: all pixels valid in both masks).

    Ocean (1) is the positive class.  No-data pixels never contribute; a
    supplied region is intersected with the valid set.
    """
    check_same_shape(pred.values, truth.values, "masks")
    evaluated = pred.valid & truth.valid
    if region is not None:
        region = np.asarray(region, dtype=bool)
        check_same_shape(region, truth.values, "region and mask")
        evaluated = evaluated & region
    p = pred.values[evaluated] == 1
    g = truth.values[evaluated] == 1
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(np.count_nonzero(~p & ~g))
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def metrics_from_counts(c: ConfusionCounts) -> tuple[float, float, float, float]:
    """(accuracy, precision, recall, f1) with explicit empty-denominator rules.

    Precision with no positive predictions is 1.0 when nothing was missed
    (fn == 0) and 0.0 otherwise; recall is symmetric.  F1 is 0 when
    precision + recall is 0.
    """
    if c.total == 0:
        raise EmptyRegionError("empty evaluation region")
    accuracy = (c.tp + c.tn) / c.total
    if c.tp + c.fp == 0:
        precision = 1.0 if c.fn == 0 else 0.0
    else:
        precision = c.tp / (c.tp + c.fp)
    if c.tp + c.fn == 0:
        recall = 1.0 if c.fp == 0 else 0.0
    else:
        recall = c.tp / (c.tp + c.fn)
    f1 = 0.0 if precision + recall == 0 else 2.0 * precision * recall / (precision + recall)
    return accuracy, precision, recall, f1


def _filled_values(mask: SegMask) -> np.ndarray:
    """Mask values with no-data pixels replaced by their 4-neighbour majority.

    Pixels whose in-bounds neighbours are all no-data stay unfilled (-1) and
    are skipped by the gradient.  Majority ties resolve to land (0).
    """
    v = mask.values.astype(np.int16)
    out = np.where(v == MASK_NODATA, -1, v)
    holes = v == MASK_NODATA
    if not holes.any():
        return out
    h, w = v.shape
    ones = np.zeros((h, w), dtype=np.int16)
    defined = np.zeros((h, w), dtype=np.int16)
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        shifted = np.full((h, w), -1, dtype=np.int16)
        rs, re = max(dr, 0), h + min(dr, 0)
        cs, ce = max(dc, 0), w + min(dc, 0)
        shifted[rs:re, cs:ce] = out[rs - dr : re - dr, cs - dc : ce - dc]
        ones += (shifted == 1).astype(np.int16)
        defined += (shifted >= 0).astype(np.int16)
    fillable = holes & (defined > 0)
    majority_ocean = ones * 2 > defined
    out[fillable] = majority_ocean[fillable].astype(np.int16)
    return out


def derive_edges(mask: SegMask) -> EdgeMap:
    """Edge map: a pixel is an edge iff some in-bounds 4-neighbour differs.

    This two-sided discrete gradient marks both shores of a boundary and is
    symmetric under land/ocean complement.
    """
    v = _filled_values(mask)
    edge = np.zeros(v.shape, dtype=bool)

    def differs(a, b):
        return (a >= 0) & (b >= 0) & (a != b)

    edge[1:, :] |= differs(v[1:, :], v[:-1, :])
    edge[:-1, :] |= differs(v[:-1, :], v[1:, :])
    edge[:, 1:] |= differs(v[:, 1:], v[:, :-1])
    edge[:, :-1] |= differs(v[:, :-1], v[:, 1:])
    return EdgeMap(edge=edge)


def fom(pred_edges: EdgeMap, truth_edges: EdgeMap, alpha: float = DEFAULT_FOM_ALPHA) -> float:
    """Edge figure of merit in [0, 1].

    Averages ``1 / (1 + alpha * d^2)`` over detected edge pixels, where d is
    the exact Euclidean distance to the nearest actual edge pixel, normalised
    by ``max(N_detected, N_actual)``.  Two empty maps agree perfectly (1.0);
    exactly one empty map scores 0.0.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    check_same_shape(pred_edges.edge, truth_edges.edge, "edge maps")
    n_e = pred_edges.count
    n_g = truth_edges.count
    if n_e == 0 and n_g == 0:
        return 1.0
    if n_e == 0 or n_g == 0:
        return 0.0
    d2 = squared_edt(truth_edges.edge)[pred_edges.edge]
    return float(np.sum(1.0 / (1.0 + alpha * d2)) / max(n_e, n_g))


def coastline_buffer(truth_edges: EdgeMap, radius: float = DEFAULT_BUFFER_RADIUS) -> np.ndarray:
    """Boolean region of pixels within ``radius`` (Euclidean) of a truth edge pixel."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if truth_edges.count == 0:
        return np.zeros(truth_edges.edge.shape, dtype=bool)
    return squared_edt(truth_edges.edge) <= float(radius) * float(radius)


def evaluate_image(
    pred: SegMask,
    truth: SegMask,
    image_id: str = "",
    strata: Strata | None = None,
    buffer_radius: float = DEFAULT_BUFFER_RADIUS,
    alpha: float = DEFAULT_FOM_ALPHA,
) -> MetricRow:
    """All per-image metrics: overall, coastline-buffered, and edge agreement.

    The buffer is anchored on the ground-truth coastline so that every method
    is scored on the same region.  When the truth mask has no coastline at
    all the buffered metrics are vacuously 1.0.
    """
    check_same_shape(pred.values, truth.values, "masks")
    accuracy, precision, recall, f1 = metrics_from_counts(confusion(pred, truth))
    truth_edges = derive_edges(truth)
    pred_edges = derive_edges(pred)
    fom_score = fom(pred_edges, truth_edges, alpha=alpha)
    buffer = coastline_buffer(truth_edges, radius=buffer_radius)
    if buffer.any():
        b_acc, b_prec, b_rec, b_f1 = metrics_from_counts(confusion(pred, truth, region=buffer))
    else:
        b_acc = b_prec = b_rec = b_f1 = 1.0
    return MetricRow(
        image_id=image_id,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        fom=fom_score,
        buffered_accuracy=b_acc,
        buffered_precision=b_prec,
        buffered_recall=b_rec,
        buffered_f1=b_f1,
        strata=strata or Strata(),
    )


def decade_of(year: int) -> int:
    return (year // 10) * 10


def _group_means(rows: Sequence[MetricRow], key) -> dict[str, dict[str, float]]:
    groups: dict[str, list[MetricRow]] = {}
    for row in rows:
        k = key(row)
        if k is None:
            continue
        groups.setdefault(k, []).append(row)
    out = {}
    for k in sorted(groups):
        members = groups[k]
        entry = {name: math.fsum(r.metric(name) for r in members) / len(members) for name in METRIC_NAMES}
        entry["n"] = len(members)
        out[k] = entry
    return out


def aggregate_report(rows: Sequence[MetricRow]) -> EvalReport:
    """Macro-average every metric overall and per stratum (sorted group keys)."""
    rows = list(rows)
    if not rows:
        raise ValueError("cannot aggregate an empty set of metric rows")
    overall = {name: math.fsum(r.metric(name) for r in rows) / len(rows) for name in METRIC_NAMES}
    return EvalReport(
        n_images=len(rows),
        overall=overall,
        by_tile=_group_means(rows, lambda r: None if r.strata.tile is None else f"{r.strata.tile[0]}_{r.strata.tile[1]}"),
        by_decade=_group_means(rows, lambda r: None if r.strata.decade is None else str(r.strata.decade)),
        by_altitude=_group_means(rows, lambda r: r.strata.altitude_class),
        by_coastal_type=_group_means(rows, lambda r: r.strata.coastal_type),
    )


# ---------------------------------------------------------------------------
# Report files: one CSV row per image plus a JSON summary.

ROW_FIELDS = ["image_id"] + METRIC_NAMES + ["tile_path", "tile_row", "decade", "altitude_class", "coastal_type"]


def write_rows_csv(rows: Iterable[MetricRow], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROW_FIELDS)
        for row in rows:
            s = row.strata
            writer.writerow(
                [row.image_id]
                + [repr(row.metric(name)) for name in METRIC_NAMES]
                + [
                    "" if s.tile is None else s.tile[0],
                    "" if s.tile is None else s.tile[1],
                    "" if s.decade is None else s.decade,
                    s.altitude_class or "",
                    s.coastal_type or "",
                ]
            )


def read_rows_csv(path) -> list[MetricRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in csv.DictReader(fh):
            tile = None
            if line["tile_path"]:
                tile = (int(line["tile_path"]), int(line["tile_row"]))
            strata = Strata(
                tile=tile,
                decade=int(line["decade"]) if line["decade"] else None,
                altitude_class=line["altitude_class"] or None,
                coastal_type=line["coastal_type"] or None,
            )
            rows.append(
                MetricRow(
                    image_id=line["image_id"],
                    strata=strata,
                    **{name: float(line[name]) for name in METRIC_NAMES},
                )
            )
    return rows


def report_to_dict(report: EvalReport) -> dict:
    return {
        "n_images": report.n_images,
        "overall": report.overall,
        "by_tile": report.by_tile,
        "by_decade": report.by_decade,
        "by_altitude": report.by_altitude,
        "by_coastal_type": report.by_coastal_type,
    }


def write_report_json(report: EvalReport, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
