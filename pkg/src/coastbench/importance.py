"""Model-agnostic permutation band importance.

For each spectral band, the band's valid-pixel values are spatially shuffled
within every test image (an independent draw per image and band, derived
from one master seed) and the drop in macro accuracy is reported in
percentage points.  Predictors run either in process (any callable from
scene to mask) or through a file round trip: the permuted scenes are
exported as bundles, an external model writes one predicted mask per
variant, and the same scores are computed from the files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from collections.abc import Callable, Sequence

import numpy as np

from . import raster
from .errors import PredictorError
from .metrics import confusion, metrics_from_counts
from .raster import ALL_BANDS, BandRole, RasterScene, SegMask
from .seeding import derive_seed
from .validation import check_same_shape

Predictor = Callable[[RasterScene], SegMask]

BASELINE_VARIANT = "baseline"


def variant_name(band: BandRole | None) -> str:
    return BASELINE_VARIANT if band is None else f"perm_{band.label}"


@dataclass(frozen=True)
class BandImportance:
    band: BandRole
    score: float  # accuracy drop in percentage points
    baseline_accuracy: float
    permuted_accuracy: float
    seed: int


def permute_band(scene: RasterScene, band: BandRole, seed: int) -> RasterScene:
    """Copy of ``scene`` with one band's valid-pixel values spatially shuffled.

    The value multiset of the band is preserved; the no-data mask and all
    other bands are untouched.
    """
    plane_index = None
    for i, role in enumerate(scene.band_roles):
        if role is band:
            plane_index = i
    if plane_index is None:
        raise KeyError(f"scene {scene.scene_id!r} has no {band.label} band")
    data = scene.data.copy()
    plane = data[plane_index]
    rows, cols = np.nonzero(~scene.nodata_mask)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(rows.size)
    plane[rows, cols] = plane[rows[perm], cols[perm]]
    return RasterScene(
        scene_id=scene.scene_id,
        band_roles=scene.band_roles,
        data=data,
        nodata_mask=scene.nodata_mask,
        nodata_value=scene.nodata_value,
    )


def _image_accuracy(pred: SegMask, truth: SegMask) -> float:
    accuracy, _, _, _ = metrics_from_counts(confusion(pred, truth))
    return accuracy


def _macro_accuracy(pred_masks: Sequence[SegMask], truths: Sequence[SegMask]) -> float:
    return float(np.mean([_image_accuracy(p, t) for p, t in zip(pred_masks, truths)]))


def _run_predictor(predictor: Predictor, scene: RasterScene) -> SegMask:
    try:
        return predictor(scene)
    except Exception as exc:
        raise PredictorError(scene.scene_id, str(exc)) from exc


def _variant_seed(master_seed: int, scene_id: str, band: BandRole, repeat: int) -> int:
    return derive_seed(master_seed, "permute", scene_id, band.label, repeat)


def band_importance(
    predictor: Predictor,
    test_set: Sequence[tuple[RasterScene, SegMask]],
    seed: int = 0,
    repeats: int = 1,
) -> list[BandImportance]:
    """Permutation importance of every band for an in-process predictor."""
    if not test_set:
        raise ValueError("test set is empty")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    truths = [truth for _, truth in test_set]
    baseline_preds = [_run_predictor(predictor, scene) for scene, _ in test_set]
    baseline = _macro_accuracy(baseline_preds, truths)

    results = []
    for band in ALL_BANDS:
        repeat_accs = []
        for repeat in range(repeats):
            preds = []
            for scene, _ in test_set:
                shuffled = permute_band(
                    scene, band, seed=_variant_seed(seed, scene.scene_id, band, repeat)
                )
                preds.append(_run_predictor(predictor, shuffled))
            repeat_accs.append(_macro_accuracy(preds, truths))
        permuted = float(np.mean(repeat_accs))
        results.append(
            BandImportance(
                band=band,
                score=(baseline - permuted) * 100.0,
                baseline_accuracy=baseline,
                permuted_accuracy=permuted,
                seed=seed,
            )
        )
    return results


# ---------------------------------------------------------------------------
# File protocol for external predictors.

def export_permuted_suite(
    test_set: Sequence[tuple[RasterScene, SegMask]], out_dir, seed: int = 0
) -> dict:
    """Write baseline + per-band permuted bundles for every test image.

    Produces ``<image_id>__baseline`` and ``<image_id>__perm_<BAND>`` scene
    bundles plus ``manifest.json`` naming the prediction files an external
    predictor is expected to write back (``<image_id>__<variant>_pred``).
    Permutations are drawn exactly as in :func:`band_importance`, so the two
    routes score identically.
    """
    if not test_set:
        raise ValueError("test set is empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images = []
    for scene, _ in test_set:
        variants = {}
        expected = []
        for band in [None, *ALL_BANDS]:
            name = f"{scene.scene_id}__{variant_name(band)}"
            if band is None:
                exported = scene
            else:
                exported = permute_band(
                    scene, band, seed=_variant_seed(seed, scene.scene_id, band, 0)
                )
            raster.write_raster(exported.with_id(name), out / name)
            variants[variant_name(band)] = name
            expected.append(f"{name}_pred")
        images.append(
            {"image_id": scene.scene_id, "variants": variants, "expected_predictions": expected}
        )
    manifest = {"seed": seed, "images": images}
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def score_external_predictions(
    pred_dir, test_set: Sequence[tuple[RasterScene, SegMask]], seed: int = 0
) -> list[BandImportance]:
    """Score externally produced prediction masks for the exported suite."""
    if not test_set:
        raise ValueError("test set is empty")
    pred_dir = Path(pred_dir)
    truths = [truth for _, truth in test_set]

    def load(scene_id: str, variant: str) -> SegMask:
        path = pred_dir / f"{scene_id}__{variant}_pred"
        if not path.with_suffix(".json").exists():
            raise FileNotFoundError(f"missing prediction bundle {path}.json")
        mask = raster.read_mask(path)
        return mask

    baseline_preds = []
    for (scene, truth) in test_set:
        mask = load(scene.scene_id, BASELINE_VARIANT)
        check_same_shape(mask.values, truth.values, "prediction and truth masks")
        baseline_preds.append(mask)
    baseline = _macro_accuracy(baseline_preds, truths)

    results = []
    for band in ALL_BANDS:
        preds = []
        for (scene, truth) in test_set:
            mask = load(scene.scene_id, variant_name(band))
            check_same_shape(mask.values, truth.values, "prediction and truth masks")
            preds.append(mask)
        permuted = _macro_accuracy(preds, truths)
        results.append(
            BandImportance(
                band=band,
                score=(baseline - permuted) * 100.0,
                baseline_accuracy=baseline,
                permuted_accuracy=permuted,
                seed=seed,
            )
        )
    return results
