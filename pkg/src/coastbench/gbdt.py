"""Gradient-boosted regression trees for per-pixel land/ocean classification.

Second-order boosting on the logistic loss: each round fits a depth-limited
regression tree to the per-sample gradients g = p - y and hessians
h = p (1 - p), with exact greedy splits over every midpoint between
consecutive distinct feature values and leaf values -G / (H + lambda).
Prediction is ``sigmoid(base_score + learning_rate * sum(tree outputs))``
thresholded at 0.5 (ties classify as ocean).

The trainer is deliberately simple (no subsampling, no histograms, no
column sampling) so its splits can be verified against a brute-force
oracle.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple
from collections.abc import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .raster import MASK_NODATA, MASK_OCEAN, MASK_LAND, ALL_BANDS, RasterScene, SegMask
from .seeding import derive_rng
from .validation import check_binary_targets, check_feature_matrix

MODEL_FORMAT = "coastbench-gbdt"
MODEL_FORMAT_VERSION = 1
_PRIOR_EPS = 1e-6
_LOSS_SLACK = 1e-9


class PixelSample(NamedTuple):
    """One labelled pixel: band intensities in roster order plus a 0/1 label."""

    features: np.ndarray
    label: int


def sample_training_pixels(
    crops: Sequence[tuple[RasterScene, SegMask]],
    per_image: int = 100,
    seed: int = 0,
) -> list[PixelSample]:
    """Draw ``per_image`` valid pixels uniformly without replacement per crop."""
    if per_image < 1:
        raise ValueError("per_image must be >= 1")
    samples: list[PixelSample] = []
    for i, (scene, mask) in enumerate(crops):
        if scene.data.shape[1:] != mask.values.shape:
            raise ValueError(f"crop {i}: scene and mask dimensions differ")
        valid = ~scene.nodata_mask & mask.valid
        rows, cols = np.nonzero(valid)
        if rows.size < per_image:
            raise ValueError(
                f"crop {i} ({scene.scene_id!r}) has {rows.size} valid pixels, need {per_image}"
            )
        rng = derive_rng(seed, "pixel-sample", i, scene.scene_id)
        pick = rng.choice(rows.size, size=per_image, replace=False)
        planes = np.stack([scene.band(role) for role in ALL_BANDS])
        feats = planes[:, rows[pick], cols[pick]].T.astype(np.float64)
        labels = mask.values[rows[pick], cols[pick]]
        for f, lab in zip(feats, labels):
            samples.append(PixelSample(features=f, label=int(lab)))
    return samples


def samples_to_arrays(samples: Iterable[PixelSample]) -> tuple[np.ndarray, np.ndarray]:
    samples = list(samples)
    X = np.stack([s.features for s in samples]).astype(np.float64)
    y = np.array([s.label for s in samples], dtype=np.float64)
    return X, y


@dataclass
class Tree:
    """Flat node arrays; ``feature < 0`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                break
            idx = np.nonzero(internal)[0]
            sub = node[idx]
            go_left = X[idx, feat[idx]] < self.threshold[sub]
            node[idx] = np.where(go_left, self.left[sub], self.right[sub])
        return self.value[node]

    def depth(self) -> int:
        def walk(i: int) -> int:
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _logloss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1.0 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _best_split(X: np.ndarray, g: np.ndarray, h: np.ndarray, reg_lambda: float):
    """Exact greedy search over all (feature, midpoint) candidates.

    Returns ``(gain, feature, threshold)`` or None.  Ties resolve to the
    lowest feature index, then the lowest threshold, so results do not depend
    on evaluation order.
    """
    n, d = X.shape
    if n < 2:
        return None
    g_total = float(g.sum())
    h_total = float(h.sum())
    parent = g_total * g_total / (h_total + reg_lambda)

    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    gl = np.cumsum(g[order], axis=0)[:-1]
    hl = np.cumsum(h[order], axis=0)[:-1]
    gr = g_total - gl
    hr = h_total - hl
    gain = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent)
    gain[xs[1:] <= xs[:-1]] = -np.inf  # only between distinct consecutive values

    best = None
    for j in range(d):
        col = gain[:, j]
        i = int(np.argmax(col))  # first occurrence = lowest threshold
        if not np.isfinite(col[i]):
            continue
        if best is None or col[i] > best[0]:
            a, b = xs[i, j], xs[i + 1, j]
            thr = a + (b - a) / 2.0
            if thr <= a:  # midpoint rounded down onto the left value
                thr = b
            best = (float(col[i]), j, float(thr))
    return best


class GradientBoostedTrees(BaseEstimator, ClassifierMixin):
    """Boosted depth-limited regression trees with a logistic objective.

    Parameters mirror the usual boosted-tree knobs: ``n_trees``,
    ``max_depth``, ``learning_rate``, and the L2 leaf penalty
    ``reg_lambda``.  After ``fit`` the ensemble is in ``trees_`` and the
    log-odds of the training prior in ``base_score_``.
    """

    def __init__(
        self,
        n_trees: int = 500,
        max_depth: int = 3,
        learning_rate: float = 0.1,
        reg_lambda: float = 1.0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.reg_lambda = reg_lambda

    def fit(self, X, y) -> "GradientBoostedTrees":
        X = check_feature_matrix(X)
        y = check_binary_targets(y, X.shape[0])
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])

        prior = float(np.clip(y.mean(), _PRIOR_EPS, 1.0 - _PRIOR_EPS))
        self.base_score_ = float(np.log(prior / (1.0 - prior)))
        self.trees_: list[Tree] = []
        self.single_class_ = bool(y.min() == y.max())
        if self.single_class_:
            warnings.warn("training data contains a single class; returning prior-only model")
            self.train_losses_ = [_logloss(y, _sigmoid(np.full(len(y), self.base_score_)))]
            return self

        margin = np.full(X.shape[0], self.base_score_)
        losses = [_logloss(y, _sigmoid(margin))]
        for _ in range(self.n_trees):
            p = _sigmoid(margin)
            tree = self._grow_tree(X, g=p - y, h=p * (1.0 - p))
            self.trees_.append(tree)
            margin = margin + self.learning_rate * tree.predict(X)
            loss = _logloss(y, _sigmoid(margin))
            if loss > losses[-1] + _LOSS_SLACK:
                raise RuntimeError(
                    f"training loss increased on round {len(self.trees_)}: "
                    f"{losses[-1]:.12f} -> {loss:.12f}"
                )
            losses.append(loss)
        self.train_losses_ = losses
        return self

    def _grow_tree(self, X: np.ndarray, g: np.ndarray, h: np.ndarray) -> Tree:
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        value: list[float] = []

        def leaf_value(idx: np.ndarray) -> float:
            return float(-g[idx].sum() / (h[idx].sum() + self.reg_lambda))

        def build(idx: np.ndarray, depth: int) -> int:
            node = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            split = None
            if depth < self.max_depth:
                split = _best_split(X[idx], g[idx], h[idx], self.reg_lambda)
            if split is None or split[0] <= 0.0:
                value[node] = leaf_value(idx)
                return node
            _, feat, thr = split
            feature[node] = feat
            threshold[node] = thr
            goes_left = X[idx, feat] < thr
            left[node] = build(idx[goes_left], depth + 1)
            right[node] = build(idx[~goes_left], depth + 1)
            return node

        build(np.arange(X.shape[0]), 0)
        return Tree(
            feature=np.array(feature, dtype=np.int32),
            threshold=np.array(threshold, dtype=np.float64),
            left=np.array(left, dtype=np.int32),
            right=np.array(right, dtype=np.int32),
            value=np.array(value, dtype=np.float64),
        )

    def decision_function(self, X) -> np.ndarray:
        if not hasattr(self, "trees_"):
            raise NotFittedError("estimator is not fitted; call fit or load a model first")
        X = check_feature_matrix(X, self.n_features_in_)
        margin = np.full(X.shape[0], self.base_score_)
        for tree in self.trees_:
            margin = margin + self.learning_rate * tree.predict(X)
        return margin

    def predict_proba(self, X) -> np.ndarray:
        p = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)

    def used_features(self) -> set[int]:
        """Indices of features appearing in at least one split."""
        used: set[int] = set()
        for tree in self.trees_:
            used.update(int(f) for f in tree.feature if f >= 0)
        return used

    def predict_mask(self, scene: RasterScene) -> SegMask:
        return predict_gbdt(self, scene)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "format_version": MODEL_FORMAT_VERSION,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "learning_rate": self.learning_rate,
            "reg_lambda": self.reg_lambda,
            "n_features": self.n_features_in_,
            "base_score": self.base_score_,
            "single_class": self.single_class_,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in self.trees_
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GradientBoostedTrees":
        if payload.get("format") != MODEL_FORMAT:
            raise ValueError("not a boosted-tree model file")
        if payload.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {payload.get('format_version')}")
        model = cls(
            n_trees=payload["n_trees"],
            max_depth=payload["max_depth"],
            learning_rate=payload["learning_rate"],
            reg_lambda=payload["reg_lambda"],
        )
        model.n_features_in_ = payload["n_features"]
        model.classes_ = np.array([0, 1])
        model.base_score_ = payload["base_score"]
        model.single_class_ = payload["single_class"]
        model.trees_ = [
            Tree(
                feature=np.array(t["feature"], dtype=np.int32),
                threshold=np.array(t["threshold"], dtype=np.float64),
                left=np.array(t["left"], dtype=np.int32),
                right=np.array(t["right"], dtype=np.int32),
                value=np.array(t["value"], dtype=np.float64),
            )
            for t in payload["trees"]
        ]
        return model


def save_model(model: GradientBoostedTrees, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh)
        fh.write("\n")


def load_model(path) -> GradientBoostedTrees:
    with open(path, "r", encoding="utf-8") as fh:
        return GradientBoostedTrees.from_dict(json.load(fh))


def train_gbdt(
    samples: Iterable[PixelSample],
    n_trees: int = 500,
    max_depth: int = 3,
    learning_rate: float = 0.1,
    reg_lambda: float = 1.0,
) -> GradientBoostedTrees:
    X, y = samples_to_arrays(samples)
    model = GradientBoostedTrees(
        n_trees=n_trees, max_depth=max_depth, learning_rate=learning_rate, reg_lambda=reg_lambda
    )
    return model.fit(X, y)


def predict_gbdt(model: GradientBoostedTrees, scene: RasterScene) -> SegMask:
    """Classify every pixel of ``scene``; no-data pixels map to 255."""
    missing = [role.label for role in ALL_BANDS if not scene.has_band(role)]
    if missing:
        raise ValueError(f"scene {scene.scene_id!r} is missing bands: {missing}")
    if getattr(model, "n_features_in_", len(ALL_BANDS)) != len(ALL_BANDS):
        raise ValueError(
            f"model expects {model.n_features_in_} features, scene provides {len(ALL_BANDS)} bands"
        )
    planes = np.stack([scene.band(role) for role in ALL_BANDS]).astype(np.float64)
    X = planes.reshape(len(ALL_BANDS), -1).T
    proba = model.predict_proba(X)[:, 1].reshape(scene.height, scene.width)
    values = np.where(proba >= 0.5, MASK_OCEAN, MASK_LAND).astype(np.uint8)
    values[scene.nodata_mask] = MASK_NODATA
    return SegMask(values=values)
