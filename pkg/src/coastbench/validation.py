"""Input validation helpers shared by the estimators and metric functions."""

from __future__ import annotations

import numpy as np


def check_feature_matrix(X, n_features: int | None = None) -> np.ndarray:
    """Coerce ``X`` to a 2-D float64 array and optionally pin its width."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("feature matrix is empty")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite values")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def check_binary_targets(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n_samples,):
        raise ValueError(f"expected {n_samples} targets, got shape {y.shape}")
    y = y.astype(np.float64)
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("targets must be binary (0/1)")
    return y


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "arrays") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} have mismatched dimensions: {a.shape} vs {b.shape}")
