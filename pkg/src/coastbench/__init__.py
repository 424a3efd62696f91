"""Coastal water-body segmentation baselines and coastline-aware benchmarking."""

__version__ = "0.1.0"

from .raster import (
    ALL_BANDS,
    BandRole,
    RasterScene,
    SegMask,
    read_mask,
    read_raster,
    write_mask,
    write_raster,
)
from .catalog import (
    AltitudeClass,
    Satellite,
    SceneRecord,
    SelectionPolicy,
    classify_altitude,
    compute_altitudes,
    filter_catalog,
    select_scenes,
)
from .solar import solar_altitude
from .cropping import (
    CropSpec,
    DatasetManifest,
    Split,
    build_dataset,
    extract_crop,
    sample_test_crop,
    sample_train_crops,
)
from .indices import IndexField, NdwiSegmenter, compute_ndwi, threshold_segment
from .gbdt import (
    GradientBoostedTrees,
    PixelSample,
    load_model,
    predict_gbdt,
    sample_training_pixels,
    save_model,
    train_gbdt,
)
from .metrics import (
    ConfusionCounts,
    EdgeMap,
    EvalReport,
    MetricRow,
    Strata,
    aggregate_report,
    coastline_buffer,
    confusion,
    derive_edges,
    evaluate_image,
    fom,
    metrics_from_counts,
)
from .importance import (
    BandImportance,
    band_importance,
    export_permuted_suite,
    permute_band,
    score_external_predictions,
)
from .fixtures import make_fixtures

__all__ = [
    "__version__",
    "ALL_BANDS",
    "AltitudeClass",
    "BandImportance",
    "BandRole",
    "ConfusionCounts",
    "CropSpec",
    "DatasetManifest",
    "EdgeMap",
    "EvalReport",
    "GradientBoostedTrees",
    "IndexField",
    "MetricRow",
    "NdwiSegmenter",
    "PixelSample",
    "RasterScene",
    "Satellite",
    "SceneRecord",
    "SegMask",
    "SelectionPolicy",
    "Split",
    "Strata",
    "aggregate_report",
    "band_importance",
    "build_dataset",
    "classify_altitude",
    "coastline_buffer",
    "compute_altitudes",
    "compute_ndwi",
    "confusion",
    "derive_edges",
    "evaluate_image",
    "export_permuted_suite",
    "extract_crop",
    "filter_catalog",
    "fom",
    "load_model",
    "make_fixtures",
    "metrics_from_counts",
    "permute_band",
    "predict_gbdt",
    "read_mask",
    "read_raster",
    "sample_test_crop",
    "sample_train_crops",
    "sample_training_pixels",
    "save_model",
    "score_external_predictions",
    "select_scenes",
    "solar_altitude",
    "threshold_segment",
    "train_gbdt",
    "write_mask",
    "write_raster",
]
