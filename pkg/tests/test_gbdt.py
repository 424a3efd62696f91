import json

import numpy as np
import pytest

from coastbench.gbdt import (
    GradientBoostedTrees,
    _best_split,
    load_model,
    predict_gbdt,
    sample_training_pixels,
    save_model,
    train_gbdt,
)
from coastbench.raster import ALL_BANDS, SegMask
from coastbench.validation import check_feature_matrix

from conftest import build_scene, separable_scene
from oracles import brute_best_split, naive_logloss, naive_tree_output


def xor_blobs(rng, n_per_blob=100, spread=0.1):
    centers = [((0, 0), 0), ((1, 1), 0), ((0, 1), 1), ((1, 0), 1)]
    X, y = [], []
    for (cx, cy), label in centers:
        X.append(rng.normal((cx, cy), spread, size=(n_per_blob, 2)))
        y.append(np.full(n_per_blob, label))
    return np.vstack(X), np.concatenate(y)


class TestBestSplit:
    def test_matches_brute_force_on_random_data(self, rng):
        for trial in range(20):
            n = int(rng.integers(5, 60))
            d = int(rng.integers(1, 5))
            X = rng.normal(size=(n, d))
            g = rng.normal(size=n)
            h = rng.uniform(0.05, 1.0, size=n)
            got = _best_split(X, g, h, reg_lambda=1.0)
            expected = brute_best_split(X, g, h, reg_lambda=1.0)
            assert got is not None and expected is not None
            assert got[1] == expected[1], f"trial {trial}: feature differs"
            assert got[2] == expected[2], f"trial {trial}: threshold differs"
            assert got[0] == pytest.approx(expected[0], abs=1e-9)

    def test_constant_feature_yields_no_split(self):
        X = np.ones((10, 1))
        assert _best_split(X, np.ones(10), np.ones(10), 1.0) is None

    def test_tie_breaks_to_lowest_feature(self):
        # identical columns: identical gains; the lower feature index wins
        col = np.array([0.0, 0.0, 1.0, 1.0])
        X = np.column_stack([col, col])
        g = np.array([1.0, 1.0, -1.0, -1.0])
        h = np.ones(4)
        gain, feature, threshold = _best_split(X, g, h, 1.0)
        assert feature == 0
        assert threshold == 0.5


class TestTraining:
    def test_separable_1d_single_stump(self, rng):
        # feature < 0.5 -> class 0, else class 1; one depth-1 tree
        x0 = rng.uniform(0.0, 0.4, 50)
        x1 = rng.uniform(0.6, 1.0, 50)
        X = np.concatenate([x0, x1]).reshape(-1, 1)
        y = np.concatenate([np.zeros(50), np.ones(50)])
        model = GradientBoostedTrees(n_trees=1, max_depth=1).fit(X, y)
        tree = model.trees_[0]
        assert tree.feature[0] == 0
        assert x0.max() < tree.threshold[0] < x1.min()
        oracle = brute_best_split(X, *_first_round_grad_hess(y), reg_lambda=1.0)
        assert tree.threshold[0] == oracle[2]

    def test_single_class_degenerate_model(self):
        X = np.random.default_rng(0).normal(size=(20, 3))
        y = np.ones(20)
        with pytest.warns(UserWarning, match="single class"):
            model = GradientBoostedTrees(n_trees=50).fit(X, y)
        assert model.single_class_
        assert model.trees_ == []
        p = model.predict_proba(np.array([[5.0, -3.0, 0.0]]))[:, 1]
        assert p[0] > 0.99

    def test_xor_needs_depth_and_reaches_99(self, rng):
        X, y = xor_blobs(rng)
        model = GradientBoostedTrees(n_trees=100, max_depth=3).fit(X, y)
        accuracy = (model.predict(X) == y).mean()
        assert accuracy >= 0.99
        assert max(t.depth() for t in model.trees_) <= 3

    def test_depth_one_cannot_solve_xor(self, rng):
        X, y = xor_blobs(rng)
        model = GradientBoostedTrees(n_trees=100, max_depth=1).fit(X, y)
        assert (model.predict(X) == y).mean() < 0.9

    def test_loss_non_increasing(self, rng):
        X = rng.normal(size=(500, 4))
        y = (X[:, 0] + 0.5 * X[:, 1] + rng.normal(0, 0.3, 500) > 0).astype(float)
        model = GradientBoostedTrees(n_trees=60, max_depth=3).fit(X, y)
        losses = np.array(model.train_losses_)
        assert np.all(np.diff(losses) <= 1e-12)

    def test_loss_agrees_with_naive_logloss(self, rng):
        X = rng.normal(size=(80, 3))
        y = (X[:, 0] > 0).astype(float)
        model = GradientBoostedTrees(n_trees=10, max_depth=2).fit(X, y)
        p = model.predict_proba(X)[:, 1]
        assert model.train_losses_[-1] == pytest.approx(naive_logloss(y, p), abs=1e-12)

    def test_rejects_non_binary_targets(self):
        with pytest.raises(ValueError, match="binary"):
            GradientBoostedTrees(n_trees=1).fit(np.zeros((3, 2)), np.array([0.0, 1.0, 2.0]))


def _first_round_grad_hess(y):
    prior = y.mean()
    base = np.log(prior / (1 - prior))
    p = 1.0 / (1.0 + np.exp(-base))
    return np.full_like(y, p) - y, np.full_like(y, p * (1 - p))


class TestPrediction:
    def test_zero_tree_base_zero_classifies_ocean(self):
        model = GradientBoostedTrees(n_trees=0)
        model.trees_ = []
        model.base_score_ = 0.0
        model.single_class_ = False
        model.n_features_in_ = len(ALL_BANDS)
        model.classes_ = np.array([0, 1])
        scene = build_scene(height=4, width=4)
        mask = predict_gbdt(model, scene)
        assert (mask.values == 1).all()  # p = 0.5 everywhere, ties -> ocean

    def test_ensemble_equals_naive_traversal_sum(self, rng):
        X = rng.normal(size=(300, 5))
        y = (X[:, 1] - X[:, 3] > 0).astype(float)
        model = GradientBoostedTrees(n_trees=25, max_depth=3).fit(X, y)
        queries = rng.normal(size=(1000, 5))
        margins = model.decision_function(queries)
        for i in range(0, 1000, 37):
            expected = model.base_score_ + model.learning_rate * sum(
                naive_tree_output(tree, queries[i]) for tree in model.trees_
            )
            assert margins[i] == pytest.approx(expected, rel=0, abs=1e-12)

    def test_separable_scene_generalizes(self, rng):
        ocean_a = np.zeros((64, 64), dtype=bool)
        ocean_a[:, 20:] = True
        train_scene, train_mask = separable_scene(ocean_a, "train", rng=rng)
        samples = sample_training_pixels([(train_scene, train_mask)], per_image=400, seed=3)
        model = train_gbdt(samples, n_trees=30, max_depth=3)
        ocean_b = np.zeros((64, 64), dtype=bool)
        ocean_b[:, 40:] = True
        held_out, held_mask = separable_scene(ocean_b, "test", rng=rng)
        pred = predict_gbdt(model, held_out)
        assert (pred.values == held_mask.values).mean() == 1.0

    def test_nodata_pixels_map_to_255(self, rng):
        nodata = np.zeros((6, 6), dtype=bool)
        nodata[0, :3] = True
        scene = build_scene(height=6, width=6, nodata_mask=nodata)
        X = rng.normal(size=(30, 7))
        y = (X[:, 0] > 0).astype(float)
        model = GradientBoostedTrees(n_trees=3).fit(X, y)
        mask = predict_gbdt(model, scene)
        assert (mask.values[nodata] == 255).all()
        assert (mask.values[~nodata] != 255).all()

    def test_band_roster_mismatch_rejected(self, rng):
        X = rng.normal(size=(30, 3))
        y = (X[:, 0] > 0).astype(float)
        model = GradientBoostedTrees(n_trees=2).fit(X, y)
        with pytest.raises(ValueError, match="model expects 3 features"):
            predict_gbdt(model, build_scene(height=4, width=4))


class TestSerialization:
    def test_round_trip_bit_identical_predictions(self, tmp_path, rng):
        X = rng.normal(size=(200, 7))
        y = (X[:, 2] + X[:, 4] > 0).astype(float)
        model = GradientBoostedTrees(n_trees=40, max_depth=3).fit(X, y)
        save_model(model, tmp_path / "model.json")
        loaded = load_model(tmp_path / "model.json")
        queries = rng.normal(size=(500, 7))
        a = model.decision_function(queries)
        b = loaded.decision_function(queries)
        np.testing.assert_array_equal(a, b)  # bitwise, no tolerance

    def test_versioned_format(self, tmp_path, rng):
        X = rng.normal(size=(20, 2))
        y = (X[:, 0] > 0).astype(float)
        model = GradientBoostedTrees(n_trees=1, max_depth=1).fit(X, y)
        save_model(model, tmp_path / "m.json")
        payload = json.loads((tmp_path / "m.json").read_text())
        assert payload["format"] == "coastbench-gbdt"
        assert payload["format_version"] == 1
        payload["format_version"] = 99
        (tmp_path / "bad.json").write_text(json.dumps(payload))
        with pytest.raises(ValueError, match="unsupported model format version"):
            load_model(tmp_path / "bad.json")

    def test_sklearn_get_params(self):
        params = GradientBoostedTrees(n_trees=7, learning_rate=0.3).get_params()
        assert params["n_trees"] == 7
        assert params["learning_rate"] == 0.3
        assert set(params) == {"n_trees", "max_depth", "learning_rate", "reg_lambda"}


class TestSampleTrainingPixels:
    def _crops(self, rng, n=2, size=16):
        crops = []
        for i in range(n):
            ocean = rng.random((size, size)) < 0.5
            scene, mask = separable_scene(ocean, f"crop{i}", rng=rng)
            crops.append((scene, mask))
        return crops

    def test_counts_and_validity(self, rng):
        crops = self._crops(rng)
        samples = sample_training_pixels(crops, per_image=3, seed=1)
        assert len(samples) == 6
        for s in samples:
            assert s.features.shape == (7,)
            assert s.label in (0, 1)

    def test_fully_nodata_crop_rejected(self):
        scene = build_scene(height=4, width=4, nodata_mask=np.ones((4, 4), dtype=bool))
        mask = SegMask(values=np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError, match="valid pixels"):
            sample_training_pixels([(scene, mask)], per_image=1, seed=0)

    def test_without_replacement(self, rng):
        crops = self._crops(rng, n=1, size=4)
        samples = sample_training_pixels(crops, per_image=16, seed=5)
        coords = {tuple(s.features.tolist()) for s in samples}
        assert len(samples) == 16
        # features carry per-pixel noise: 16 distinct pixels -> 16 distinct rows
        assert len(coords) == 16

    def test_fixed_seed_reproduces_sample_multiset(self, rng):
        crops = self._crops(rng)
        a = sample_training_pixels(crops, per_image=10, seed=9)
        b = sample_training_pixels(crops, per_image=10, seed=9)
        assert [(s.features.tolist(), s.label) for s in a] == [
            (s.features.tolist(), s.label) for s in b
        ]
        c = sample_training_pixels(crops, per_image=10, seed=10)
        assert [(s.features.tolist(), s.label) for s in a] != [
            (s.features.tolist(), s.label) for s in c
        ]

    def test_labels_match_mask(self, rng):
        ocean = np.zeros((8, 8), dtype=bool)
        ocean[:, 4:] = True
        scene, mask = separable_scene(ocean, rng=rng)
        samples = sample_training_pixels([(scene, mask)], per_image=30, seed=2)
        for s in samples:
            # ocean iff green > NIR by construction
            green, nir = s.features[1], s.features[3]
            assert s.label == (1 if green > nir else 0)


class TestValidationHelpers:
    def test_feature_matrix_contract(self):
        with pytest.raises(ValueError, match="non-finite"):
            check_feature_matrix(np.array([[np.nan, 1.0]]))
        with pytest.raises(ValueError, match="expected 3 features"):
            check_feature_matrix(np.ones((2, 2)), n_features=3)
