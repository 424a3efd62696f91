"""Normalized-difference water index and threshold segmentation.

The per-pixel intensity is ``(Green - NIR) / (Green + NIR)``; pixels at or
above the threshold (default 0) are labelled ocean.  This baseline consumes
no training data.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .raster import MASK_LAND, MASK_NODATA, MASK_OCEAN, BandRole, RasterScene, SegMask


class IndexField:
    """Per-pixel spectral index values plus a definedness flag."""

    def __init__(self, values: np.ndarray, defined: np.ndarray, index_kind: str = "ndwi"):
        self.values = np.asarray(values, dtype=np.float64)
        self.defined = np.asarray(defined, dtype=bool)
        self.index_kind = index_kind
        if self.values.shape != self.defined.shape or self.values.ndim != 2:
            raise ValueError("index field values and defined flags must be matching 2-D arrays")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def compute_ndwi(scene: RasterScene) -> IndexField:
    """Water index per pixel; undefined where Green + NIR is zero or no-data."""
    green = scene.band(BandRole.GREEN).astype(np.float64)
    nir = scene.band(BandRole.NIR).astype(np.float64)
    denom = green + nir
    defined = ~scene.nodata_mask & (denom != 0.0)
    values = np.zeros_like(denom)
    np.divide(green - nir, denom, out=values, where=defined)
    return IndexField(values=values, defined=defined)


def threshold_segment(field: IndexField, threshold: float = 0.0) -> SegMask:
    """Ocean where the index is at or above ``threshold``; undefined -> no-data."""
    values = np.where(
        field.defined,
        np.where(field.values >= threshold, MASK_OCEAN, MASK_LAND),
        MASK_NODATA,
    ).astype(np.uint8)
    return SegMask(values=values)


class NdwiSegmenter(BaseEstimator):
    """Training-free water segmenter driven by the green/NIR index.

    ``fit`` is a no-op kept for pipeline compatibility.
    """

    def __init__(self, threshold: float = 0.0):
        self.threshold = threshold

    def fit(self, X=None, y=None) -> "NdwiSegmenter":
        return self

    def predict_mask(self, scene: RasterScene) -> SegMask:
        return threshold_segment(compute_ndwi(scene), threshold=self.threshold)
