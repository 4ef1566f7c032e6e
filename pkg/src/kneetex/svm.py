"""Soft-margin linear SVM with per-fold standardization."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import KneeTexError, SingleClassError

DEFAULT_C = 1.0
DEFAULT_TOL = 1e-6
DEFAULT_MAX_EPOCHS = 10_000


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray
    degenerate: np.ndarray

    def apply(self, rows) -> np.ndarray:
        return standardize_apply(self, rows)


def standardize_fit(rows) -> Standardizer:
    """Column means and population standard deviations of the training rows.

    Columns whose deviation is (numerically) zero are flagged and mapped to 0.
    """
    X = np.asarray(rows, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise KneeTexError("standardize_fit needs a non-empty 2-D array")
    if X.shape[0] < 2:
        raise KneeTexError("standardize_fit needs at least 2 rows")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    degenerate = stds <= 1e-12 * np.maximum(1.0, np.abs(means))
    return Standardizer(means=means, stds=np.where(degenerate, 1.0, stds), degenerate=degenerate)


def standardize_apply(std: Standardizer, rows) -> np.ndarray:
    X = np.asarray(rows, dtype=float)
    Z = (X - std.means) / std.stds
    if std.degenerate.any():
        Z[..., std.degenerate] = 0.0
    return Z


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    C: float
    duality_gap: float
    primal: float
    dual: float
    epochs: int
    alpha: np.ndarray
    standardizer: Optional[Standardizer] = None
    feature_names: Sequence[str] = ()

    def to_dict(self) -> dict:
        std = self.standardizer
        n = len(self.weights)
        return {
            "features": list(self.feature_names),
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "C": float(self.C),
            "means": [float(m) for m in std.means] if std else [0.0] * n,
            "stds": [float(s) for s in std.stds] if std else [1.0] * n,
        }


def _check_xy(X, y):
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise KneeTexError(f"X must be (n, d) with n == len(y); got {X.shape} and {y.size}")
    if not np.all(np.isfinite(X)):
        raise KneeTexError("non-finite feature values")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise KneeTexError("labels must be -1 or +1")
    if (y > 0).all() or (y < 0).all():
        raise SingleClassError("SVM training needs both classes")
    return X, y


def svm_train(X, y, C: float = DEFAULT_C, tol: float = DEFAULT_TOL,
              max_epochs: int = DEFAULT_MAX_EPOCHS, seed: int = 0,
              return_history: bool = False):
    """Minimize ``0.5*|w|^2 + C * sum(hinge)`` over already standardized rows.

    The bias is learned as the weight of an appended constant feature and is
    therefore regularized. With ``return_history`` the per-epoch dual
    objective is returned alongside the model.
    """
    if not C > 0:
        raise KneeTexError("C must be positive")
    X, y = _check_xy(X, y)
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    alpha = np.zeros(X.shape[0])
    w = np.zeros(Xa.shape[1])
    history = np.full(max_epochs if return_history else 0, np.nan)
    epochs, primal, dual = _kernels.dual_cd(Xa, y, float(C), float(tol), int(max_epochs),
                                            np.uint64(seed), alpha, w, history)
    model = LinearModel(weights=w[:-1].copy(), bias=float(w[-1]), C=float(C),
                        duality_gap=float(primal - dual), primal=float(primal),
                        dual=float(dual), epochs=int(epochs), alpha=alpha)
    if return_history:
        return model, history[:epochs]
    return model


def fit_standardized(X, y, C: float = DEFAULT_C, seed: int = 0,
                     feature_names: Sequence[str] = (), **kw) -> LinearModel:
    """Standardize on ``X`` then train; the standardizer is kept on the model."""
    std = standardize_fit(X)
    model = svm_train(standardize_apply(std, X), y, C=C, seed=seed, **kw)
    return replace(model, standardizer=std, feature_names=tuple(feature_names))


def decision_scores(model: LinearModel, rows) -> np.ndarray:
    """``w . x + b`` per row, after the model's standardizer when it has one."""
    X = np.asarray(rows, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.weights.size:
        raise KneeTexError(f"rows have {X.shape[1]} features, model expects {model.weights.size}")
    if model.standardizer is not None:
        X = standardize_apply(model.standardizer, X)
    return X @ model.weights + model.bias


def signed_labels(labels) -> np.ndarray:
    """Map case=1/control=0 to +1/-1."""
    lab = np.asarray(labels)
    return np.where(lab == 1, 1.0, -1.0)
