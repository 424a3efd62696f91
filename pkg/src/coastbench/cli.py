"""Command-line interface: the pipeline as subcommands.

Glue only; every subcommand delegates to a library function.  A JSON config
file can predefine any option; explicit flags win over the config, and the
config wins over built-in defaults.  Exit codes: 0 success, 1 runtime error
(with a JSON error line on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from datetime import date
from pathlib import Path
from collections.abc import Sequence

from . import __version__, catalog as cat, cropping, fixtures, importance, metrics, raster
from .catalog import Satellite, SelectionPolicy
from .errors import CoastBenchError
from .gbdt import load_model, sample_training_pixels, save_model, train_gbdt
from .indices import NdwiSegmenter
from .metrics import CoastalType, Strata, decade_of
from .parallel import parallel_map


@dataclass
class RunConfig:
    """Defaults for every knob exposed by the subcommands."""

    catalog: str | None = None
    scene_dir: str | None = None
    rough_mask_dir: str | None = None
    precise_mask_dir: str | None = None
    out: str | None = None
    max_cloud_pct: float = 10.0
    required_tier: int = 1
    l7_cutoff: str = "2003-05-31"
    satellites: str = "L5,L7,L8,L9"
    low_max_deg: float = 30.0
    high_min_deg: float = 50.0
    per_tile_extra: str = ""
    crop_size: int = 256
    train_per_scene: int = 300
    test_ocean_min: float = 0.40
    test_ocean_max: float = 0.60
    buffer_radius: float = 10.0
    threshold: float = 0.0
    trees: int = 500
    depth: int = 3
    learning_rate: float = 0.1
    pixels_per_image: int = 100
    method: str = "ndwi"
    seed: int = 0
    threads: int | None = None

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise CoastBenchError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)


def _pick(args: argparse.Namespace, config: RunConfig, name: str):
    value = getattr(args, name, None)
    return getattr(config, name) if value is None else value


def _parse_per_tile_extra(text: str) -> dict[tuple[int, int], int]:
    extra: dict[tuple[int, int], int] = {}
    if not text:
        return extra
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        tile_part, _, count = item.partition("=")
        path_str, _, row_str = tile_part.partition(",")
        try:
            extra[(int(path_str), int(row_str))] = int(count)
        except ValueError:
            raise CoastBenchError(f"bad per-tile-extra item {item!r}; expected 'path,row=N'") from None
    return extra


def _policy(args: argparse.Namespace, config: RunConfig) -> SelectionPolicy:
    names = str(_pick(args, config, "satellites")).split(",")
    return SelectionPolicy(
        max_cloud_pct=float(_pick(args, config, "max_cloud_pct")),
        allowed_satellites=frozenset(Satellite(n.strip()) for n in names if n.strip()),
        l7_cutoff_date=date.fromisoformat(str(_pick(args, config, "l7_cutoff"))),
        required_tier=int(_pick(args, config, "required_tier")),
        low_max_deg=float(_pick(args, config, "low_max_deg")),
        high_min_deg=float(_pick(args, config, "high_min_deg")),
        per_tile_extra=_parse_per_tile_extra(str(_pick(args, config, "per_tile_extra"))),
    )


def _require(args: argparse.Namespace, config: RunConfig, name: str):
    value = _pick(args, config, name)
    if value is None:
        raise CoastBenchError(f"missing required option --{name.replace('_', '-')}")
    return value


def _load_coastal_types(path) -> dict[tuple[int, int], CoastalType]:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    out = {}
    for key, kind in payload.items():
        path_str, _, row_str = key.partition("_")
        out[(int(path_str), int(row_str))] = CoastalType(kind)
    return out


def _load_test_set(dataset_dir) -> list[tuple[raster.RasterScene, raster.SegMask, cropping.ManifestEntry]]:
    dataset_dir = Path(dataset_dir)
    manifest = cropping.read_manifest(dataset_dir / "manifest.jsonl")
    triples = []
    for entry in manifest.test_entries():
        scene = raster.read_raster(dataset_dir / "crops" / entry.crop_id)
        truth = raster.read_mask(dataset_dir / "crops" / f"{entry.crop_id}_mask")
        triples.append((scene, truth, entry))
    return triples


def _entry_strata(entry: cropping.ManifestEntry) -> Strata:
    return Strata(
        tile=entry.tile,
        decade=decade_of(entry.acquired_at.year),
        altitude_class=entry.altitude_class.value,
        coastal_type=entry.coastal_type.value,
    )


def _segmenter(args: argparse.Namespace, config: RunConfig):
    method = _pick(args, config, "method")
    if method == "ndwi":
        return NdwiSegmenter(threshold=float(_pick(args, config, "threshold"))).predict_mask
    if method == "gbdt":
        model_path = getattr(args, "model", None)
        if model_path is None:
            raise CoastBenchError("--model is required for method 'gbdt'")
        return load_model(model_path).predict_mask
    raise CoastBenchError(f"unknown method {method!r}")


def _emit(args: argparse.Namespace, payload: dict, text: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


# ---------------------------------------------------------------------------
# Subcommands

def cmd_select_scenes(args: argparse.Namespace, config: RunConfig) -> int:
    policy = _policy(args, config)
    records = cat.read_catalog(_require(args, config, "catalog"))
    records = cat.compute_altitudes(records, policy, threads=_pick(args, config, "threads"))
    if args.summaries:
        cat.write_summaries(records, args.summaries)
    selected = cat.select_scenes(cat.filter_catalog(records, policy), policy)
    out = _require(args, config, "out")
    cat.write_catalog(selected, out)
    _emit(args, {"selected": len(selected), "out": str(out)}, f"selected {len(selected)} scenes -> {out}")
    return 0


def cmd_build_dataset(args: argparse.Namespace, config: RunConfig) -> int:
    records = cat.read_catalog(_require(args, config, "catalog"))
    manifest = cropping.build_dataset(
        records,
        scene_dir=_require(args, config, "scene_dir"),
        rough_mask_dir=_require(args, config, "rough_mask_dir"),
        precise_mask_dir=_pick(args, config, "precise_mask_dir"),
        out_dir=_require(args, config, "out"),
        train_per_scene=int(_pick(args, config, "train_per_scene")),
        crop_size=int(_pick(args, config, "crop_size")),
        ocean_range=(
            float(_pick(args, config, "test_ocean_min")),
            float(_pick(args, config, "test_ocean_max")),
        ),
        rng_seed=int(_pick(args, config, "seed")),
        coastal_types=_load_coastal_types(args.coastal_types),
    )
    n_test = len(manifest.test_entries())
    n_train = len(manifest.train_entries())
    _emit(
        args,
        {"out": str(_pick(args, config, "out")), "test_crops": n_test, "train_crops": n_train},
        f"built {n_train} training and {n_test} test crops -> {_pick(args, config, 'out')}",
    )
    return 0


def _predict_batch(args: argparse.Namespace, config: RunConfig, predict) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    triples = _load_test_set(args.dataset)
    masks = parallel_map(
        lambda triple: predict(triple[0]), triples, threads=_pick(args, config, "threads")
    )
    for (scene, _, entry), mask in zip(triples, masks):
        raster.write_mask(mask, out_dir / f"{entry.crop_id}_pred")
    _emit(
        args,
        {"predicted": len(triples), "out_dir": str(out_dir)},
        f"wrote {len(triples)} prediction masks -> {out_dir}",
    )
    return 0


def cmd_segment(args: argparse.Namespace, config: RunConfig) -> int:
    predict = _segmenter(args, config)
    if args.dataset:
        if not args.out_dir:
            raise CoastBenchError("batch segmentation needs --out-dir")
        return _predict_batch(args, config, predict)
    if not args.input or not args.out:
        raise CoastBenchError("segment needs --in and --out (or --dataset and --out-dir)")
    mask = predict(raster.read_raster(args.input))
    raster.write_mask(mask, args.out)
    _emit(args, {"out": str(args.out)}, f"wrote mask -> {args.out}")
    return 0


def cmd_train_gbdt(args: argparse.Namespace, config: RunConfig) -> int:
    dataset_dir = Path(_require(args, config, "dataset"))
    manifest = cropping.read_manifest(dataset_dir / "manifest.jsonl")
    crops = []
    for entry in manifest.train_entries():
        scene = raster.read_raster(dataset_dir / "crops" / entry.crop_id)
        mask = raster.read_mask(dataset_dir / "crops" / f"{entry.crop_id}_mask")
        crops.append((scene, mask))
    if not crops:
        raise CoastBenchError(f"no training crops in {dataset_dir}")
    samples = sample_training_pixels(
        crops, per_image=int(_pick(args, config, "pixels_per_image")), seed=int(_pick(args, config, "seed"))
    )
    model = train_gbdt(
        samples,
        n_trees=int(_pick(args, config, "trees")),
        max_depth=int(_pick(args, config, "depth")),
        learning_rate=float(_pick(args, config, "learning_rate")),
    )
    out = _require(args, config, "out")
    save_model(model, out)
    _emit(
        args,
        {"out": str(out), "samples": len(samples), "final_loss": model.train_losses_[-1]},
        f"trained on {len(samples)} pixels, final loss {model.train_losses_[-1]:.6f} -> {out}",
    )
    return 0


def cmd_predict_gbdt(args: argparse.Namespace, config: RunConfig) -> int:
    model = load_model(_require(args, config, "model"))
    if args.dataset:
        if not args.out_dir:
            raise CoastBenchError("batch prediction needs --out-dir")
        return _predict_batch(args, config, model.predict_mask)
    if not args.input or not args.out:
        raise CoastBenchError("predict-gbdt needs --in and --out (or --dataset and --out-dir)")
    mask = model.predict_mask(raster.read_raster(args.input))
    raster.write_mask(mask, args.out)
    _emit(args, {"out": str(args.out)}, f"wrote mask -> {args.out}")
    return 0


def _row_payload(row: metrics.MetricRow) -> dict:
    payload = {"image_id": row.image_id}
    payload.update({name: row.metric(name) for name in metrics.METRIC_NAMES})
    return payload


def cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> int:
    radius = float(_pick(args, config, "buffer_radius"))
    if args.pred and args.truth:
        row = metrics.evaluate_image(
            raster.read_mask(args.pred),
            raster.read_mask(args.truth),
            image_id=Path(args.pred).stem,
            buffer_radius=radius,
        )
        print(json.dumps(_row_payload(row), sort_keys=True))
        return 0
    if not args.dataset or not args.pred_dir or not args.out:
        raise CoastBenchError("evaluate needs --pred/--truth or --dataset/--pred-dir/--out")
    triples = _load_test_set(args.dataset)
    pred_dir = Path(args.pred_dir)

    def one(triple):
        scene, truth, entry = triple
        pred = raster.read_mask(pred_dir / f"{entry.crop_id}_pred")
        return metrics.evaluate_image(
            pred, truth, image_id=entry.crop_id, strata=_entry_strata(entry), buffer_radius=radius
        )

    rows = parallel_map(one, triples, threads=_pick(args, config, "threads"))
    rows.sort(key=lambda r: r.image_id)
    metrics.write_rows_csv(rows, args.out)
    _emit(args, {"rows": len(rows), "out": str(args.out)}, f"evaluated {len(rows)} images -> {args.out}")
    return 0


def cmd_report(args: argparse.Namespace, config: RunConfig) -> int:
    rows = metrics.read_rows_csv(_require(args, config, "rows"))
    report = metrics.aggregate_report(rows)
    out = _require(args, config, "out")
    metrics.write_report_json(report, out)
    _emit(
        args,
        metrics.report_to_dict(report),
        f"aggregated {report.n_images} images -> {out} "
        f"(macro accuracy {report.overall['accuracy']:.4f})",
    )
    return 0


def cmd_perm_importance(args: argparse.Namespace, config: RunConfig) -> int:
    triples = _load_test_set(_require(args, config, "dataset"))
    test_set = [(scene, truth) for scene, truth, _ in triples]
    seed = int(_pick(args, config, "seed"))
    if args.export:
        manifest = importance.export_permuted_suite(test_set, args.export, seed=seed)
        _emit(
            args,
            {"export": str(args.export), "images": len(manifest["images"])},
            f"exported {len(manifest['images'])} x {1 + len(raster.ALL_BANDS)} bundles -> {args.export}",
        )
        return 0
    if args.score_dir:
        scores = importance.score_external_predictions(args.score_dir, test_set, seed=seed)
    else:
        scores = importance.band_importance(
            _segmenter(args, config), test_set, seed=seed, repeats=args.repeats
        )
    payload = {
        "baseline_accuracy": scores[0].baseline_accuracy,
        "scores": {s.band.label: s.score for s in scores},
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("band,score_pct_points,baseline_accuracy,permuted_accuracy\n")
            for s in scores:
                fh.write(f"{s.band.label},{s.score!r},{s.baseline_accuracy!r},{s.permuted_accuracy!r}\n")
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_make_fixtures(args: argparse.Namespace, config: RunConfig) -> int:
    out = fixtures.make_fixtures(
        _require(args, config, "out"),
        seed=int(_pick(args, config, "seed")),
        scene_size=args.scene_size,
        wedge=args.wedge,
    )
    _emit(args, {"out": str(out)}, f"fixtures -> {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser wiring

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file with option defaults")
    parser.add_argument("--seed", type=int, help="master random seed")
    parser.add_argument("--threads", type=int, help="worker thread cap (default: all cores)")
    parser.add_argument("--json", action="store_true", help="machine-readable stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coastbench",
        description="Coastal water-body segmentation baselines and coastline-aware benchmarking.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--make-fixtures",
        metavar="DIR",
        help="write the bundled synthetic fixture dataset to DIR and exit",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("select-scenes", help="filter the catalog and pick scenes per year and sun class")
    _add_common(p)
    p.add_argument("--catalog", help="input catalog CSV")
    p.add_argument("--out", help="output CSV of selected scenes")
    p.add_argument("--summaries", help="directory for altitude/cloud summary CSVs")
    p.add_argument("--max-cloud", dest="max_cloud_pct", type=float)
    p.add_argument("--tier", dest="required_tier", type=int)
    p.add_argument("--l7-cutoff", dest="l7_cutoff")
    p.add_argument("--satellites")
    p.add_argument("--low-max", dest="low_max_deg", type=float)
    p.add_argument("--high-min", dest="high_min_deg", type=float)
    p.add_argument("--per-tile-extra", dest="per_tile_extra", help="e.g. '207,22=8;205,23=1'")
    p.set_defaults(func=cmd_select_scenes)

    p = sub.add_parser("build-dataset", help="sample, augment, and materialize crops")
    _add_common(p)
    p.add_argument("--catalog", help="selected-scene CSV (with altitude columns)")
    p.add_argument("--scene-dir", dest="scene_dir")
    p.add_argument("--rough-mask-dir", dest="rough_mask_dir")
    p.add_argument("--precise-mask-dir", dest="precise_mask_dir")
    p.add_argument("--out", help="dataset output directory")
    p.add_argument("--train-per-scene", dest="train_per_scene", type=int)
    p.add_argument("--crop-size", dest="crop_size", type=int)
    p.add_argument("--test-ocean-min", dest="test_ocean_min", type=float)
    p.add_argument("--test-ocean-max", dest="test_ocean_max", type=float)
    p.add_argument("--coastal-types", dest="coastal_types", help="JSON map tile -> sandy|rocky")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("segment", help="threshold-segment scenes with a spectral index")
    _add_common(p)
    p.add_argument("--method", choices=["ndwi", "gbdt"])
    p.add_argument("--threshold", type=float)
    p.add_argument("--model", help="model file (for --method gbdt)")
    p.add_argument("--in", dest="input", help="input scene bundle")
    p.add_argument("--out", help="output mask bundle")
    p.add_argument("--dataset", help="dataset directory for batch mode")
    p.add_argument("--out-dir", dest="out_dir", help="prediction directory for batch mode")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("train-gbdt", help="train the boosted-tree pixel classifier")
    _add_common(p)
    p.add_argument("--dataset", help="dataset directory from build-dataset")
    p.add_argument("--out", help="output model JSON")
    p.add_argument("--trees", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--pixels-per-image", dest="pixels_per_image", type=int)
    p.set_defaults(func=cmd_train_gbdt)

    p = sub.add_parser("predict-gbdt", help="classify scene pixels with a trained model")
    _add_common(p)
    p.add_argument("--model", help="model JSON from train-gbdt")
    p.add_argument("--in", dest="input", help="input scene bundle")
    p.add_argument("--out", help="output mask bundle")
    p.add_argument("--dataset", help="dataset directory for batch mode")
    p.add_argument("--out-dir", dest="out_dir", help="prediction directory for batch mode")
    p.set_defaults(func=cmd_predict_gbdt)

    p = sub.add_parser("evaluate", help="score predictions against truth masks")
    _add_common(p)
    p.add_argument("--pred", help="single predicted mask bundle")
    p.add_argument("--truth", help="single truth mask bundle")
    p.add_argument("--dataset", help="dataset directory for batch mode")
    p.add_argument("--pred-dir", dest="pred_dir", help="directory of <crop_id>_pred bundles")
    p.add_argument("--out", help="output per-image metrics CSV (batch mode)")
    p.add_argument("--buffer-radius", dest="buffer_radius", type=float)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate per-image metrics into a stratified report")
    _add_common(p)
    p.add_argument("--rows", help="per-image metrics CSV from evaluate")
    p.add_argument("--out", help="output report JSON")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("perm-importance", help="permutation band importance")
    _add_common(p)
    p.add_argument("--dataset", help="dataset directory with test crops")
    p.add_argument("--method", choices=["ndwi", "gbdt"])
    p.add_argument("--model", help="model file (for --method gbdt)")
    p.add_argument("--threshold", type=float)
    p.add_argument("--export", help="export permuted bundles for an external predictor")
    p.add_argument("--score-dir", dest="score_dir", help="score externally produced predictions")
    p.add_argument("--repeats", type=int, default=1, help="permutation draws averaged per band")
    p.add_argument("--out", help="output scores CSV")
    p.set_defaults(func=cmd_perm_importance)

    p = sub.add_parser("make-fixtures", help="write the bundled synthetic fixture dataset")
    _add_common(p)
    p.add_argument("--out", help="fixture output directory")
    p.add_argument("--scene-size", dest="scene_size", type=int, default=800)
    p.add_argument("--wedge", type=int, default=48)
    p.set_defaults(func=cmd_make_fixtures)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "make_fixtures", None):
        args.command = "make-fixtures"
        args.func = cmd_make_fixtures
        args.out = args.make_fixtures
        args.scene_size = 800
        args.wedge = 48
        args.json = False
    elif args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    config = RunConfig()
    try:
        if getattr(args, "config", None):
            config = RunConfig.from_file(args.config)
        return args.func(args, config)
    except CoastBenchError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
