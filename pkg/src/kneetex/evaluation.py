"""ROC/AUC, repeated stratified cross-validation and SVM-driven 2-D projections.

Seeds
-----
``mix64(seed, k)`` is the ``k``-th output (0-based) of a splitmix64 stream
started at ``seed``::

    z = (seed + (k + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    return z ^ (z >> 31)

Repeat ``r`` draws its folds from ``mix64(base_seed, r)``; the SVM trained on
fold ``f`` of that repeat for feature mask ``m`` shuffles with
``mix64(mix64(mix64(base_seed, r), m), f)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import _kernels
from .dataset import FeatureMatrix, mask_indices
from .errors import KneeTexError, SingleClassError
from .svm import DEFAULT_C, DEFAULT_MAX_EPOCHS, DEFAULT_TOL, LinearModel, standardize_apply

_U64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(seed: int, k: int) -> int:
    z = (seed + (k + 1) * _GOLDEN) & _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


def _binary(scores, labels):
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise KneeTexError("scores and labels differ in length")
    pos = y == 1
    if pos.all() or not pos.any():
        raise SingleClassError("AUC needs both classes")
    return s, pos


def auc(scores, labels) -> float:
    """Probability that a case (label 1) outscores a control, ties counting 1/2."""
    s, pos = _binary(scores, labels)
    return float(_kernels.rank_auc(np.ascontiguousarray(s), pos))


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_curve(scores, labels) -> RocCurve:
    """Threshold sweep from high to low score; tied scores move diagonally."""
    s, pos = _binary(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, pos = s[order], pos[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.r_[0, np.cumsum(pos)[last]]
    fp = np.r_[0, np.cumsum(~pos)[last]]
    n_pos, n_neg = tp[-1], fp[-1]
    # trapezoids in integer counts: exact up to the final division
    area = float(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])) / (2.0 * n_pos * n_neg))
    return RocCurve(fpr=fp / n_neg, tpr=tp / n_pos, auc=area)


@dataclass(frozen=True)
class CvSpec:
    folds: int = 5
    repeats: int = 100
    base_seed: int = 0

    def __post_init__(self):
        if self.folds < 2 or self.repeats < 1:
            raise KneeTexError("need folds >= 2 and repeats >= 1")
        if not 0 <= self.base_seed <= _U64:
            raise KneeTexError("base_seed must be an unsigned 64-bit integer")


def _fold_ids(labels, k: int, seed: int) -> np.ndarray:
    y = np.asarray(labels).ravel()
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise SingleClassError("stratified folds need both classes")
    if counts.min() < k:
        raise KneeTexError(f"smallest class has {counts.min()} members, fewer than k={k}")
    rng = np.random.Generator(np.random.PCG64(seed))
    fold_of = np.empty(y.size, dtype=np.int64)
    offset = 0
    for c in classes:
        members = rng.permutation(np.flatnonzero(y == c))
        fold_of[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return fold_of


def stratified_kfold(labels, k: int, seed: int) -> List[np.ndarray]:
    """``k`` disjoint test-index arrays; each class is dealt round-robin after a shuffle."""
    fold_of = _fold_ids(labels, k, seed)
    return [np.flatnonzero(fold_of == f) for f in range(k)]


def fold_table(labels, spec: CvSpec) -> np.ndarray:
    """(repeats, n) fold ids; row ``r`` comes from seed ``mix64(base_seed, r)``."""
    return np.stack([_fold_ids(labels, spec.folds, mix64(spec.base_seed, r))
                     for r in range(spec.repeats)])


def svm_seeds(spec: CvSpec, mask: int) -> np.ndarray:
    out = np.empty((spec.repeats, spec.folds), dtype=np.uint64)
    for r in range(spec.repeats):
        ms = mix64(mix64(spec.base_seed, r), mask)
        for f in range(spec.folds):
            out[r, f] = mix64(ms, f)
    return out


def _prepare(matrix: FeatureMatrix, mask: int, spec: CvSpec):
    mask_indices(mask)
    y = matrix.labels
    if np.bincount(y, minlength=2).min() < spec.folds:
        raise KneeTexError(f"each class needs at least {spec.folds} subjects")
    return matrix.columns(mask), np.where(y == 1, 1.0, -1.0)


def cv_aucs(matrix: FeatureMatrix, mask: int, spec: CvSpec, C: float = DEFAULT_C,
            pooled: bool = True, folds: Optional[np.ndarray] = None,
            tol: float = DEFAULT_TOL, max_epochs: int = DEFAULT_MAX_EPOCHS) -> np.ndarray:
    """One AUC per cross-validation repeat.

    With ``pooled`` the out-of-fold scores of all folds form a single ROC;
    otherwise the per-fold AUCs are averaged. ``folds`` may be a precomputed
    ``fold_table`` for the same labels and spec.
    """
    if not C > 0:
        raise KneeTexError("C must be positive")
    X, y = _prepare(matrix, mask, spec)
    if folds is None:
        folds = fold_table(matrix.labels, spec)
    return _kernels.cv_repeat_aucs(X, y, folds, spec.folds, float(C), float(tol),
                                   int(max_epochs), svm_seeds(spec, mask), bool(pooled))


def cv_auc(matrix: FeatureMatrix, mask: int, spec: CvSpec, C: float = DEFAULT_C,
           pooled: bool = True, folds: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """Mean and standard deviation (ddof=1) of the per-repeat AUCs."""
    aucs = cv_aucs(matrix, mask, spec, C=C, pooled=pooled, folds=folds)
    std = float(aucs.std(ddof=1)) if aucs.size > 1 else 0.0
    return float(aucs.mean()), std


def oof_scores(matrix: FeatureMatrix, mask: int, spec: CvSpec, repeat: int = 0,
               C: float = DEFAULT_C) -> np.ndarray:
    """Pooled out-of-fold decision scores of one repeat (for ROC export)."""
    X, y = _prepare(matrix, mask, spec)
    fold_of = _fold_ids(matrix.labels, spec.folds, mix64(spec.base_seed, repeat))
    seeds = np.array([mix64(mix64(mix64(spec.base_seed, repeat), mask), f)
                      for f in range(spec.folds)], dtype=np.uint64)
    return _kernels.cv_oof_scores(X, y, fold_of, spec.folds, float(C), DEFAULT_TOL,
                                  DEFAULT_MAX_EPOCHS, seeds)


@dataclass(frozen=True)
class Projection:
    x: np.ndarray
    y: np.ndarray
    direction: np.ndarray
    second_direction: np.ndarray
    threshold: float


def project_2d(rows, model: LinearModel, decorrelate: bool = False) -> Projection:
    """SVM-driven 2-D view of standardized rows.

    ``x`` is the coordinate along the unit weight vector; ``y`` is the
    coordinate along the highest-variance direction orthogonal to it. The
    separating hyperplane is the vertical line ``x = threshold = -b/|w|``.
    With ``decorrelate`` the residual is regressed on ``x`` instead of
    projected, so ``x`` and ``y`` are exactly uncorrelated.
    """
    Z = np.asarray(rows, dtype=float)
    if model.standardizer is not None:
        Z = standardize_apply(model.standardizer, Z)
    norm = float(np.linalg.norm(model.weights))
    if norm == 0.0:
        raise KneeTexError("projection needs a non-zero weight vector")
    w_hat = model.weights / norm
    x = Z @ w_hat
    Zc = Z - Z.mean(axis=0)
    xc = x - x.mean()
    if decorrelate:
        beta = Zc.T @ xc / (xc @ xc) if xc @ xc > 0 else np.zeros_like(w_hat)
        resid = Zc - np.outer(xc, beta)
    else:
        resid = Zc - np.outer(Zc @ w_hat, w_hat)
    if Z.shape[1] < 2:
        v = np.zeros_like(w_hat)
    else:
        _, _, vt = np.linalg.svd(resid, full_matrices=False)
        v = vt[0]
        if not decorrelate:
            v = v - (v @ w_hat) * w_hat
            v /= np.linalg.norm(v)
        # deterministic sign: largest component positive
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
    y = resid @ v if decorrelate else Z @ v
    return Projection(x=x, y=y, direction=w_hat, second_direction=v,
                      threshold=-model.bias / norm)
