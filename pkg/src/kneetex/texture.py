"""Per-ROI texture descriptors: Shannon entropy and the Hurst coefficient."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from ._kernels import intensity_counts
from .errors import FeatureVectorError, KneeTexError, PatchSizeError, UndefinedRoughnessError
from .geometry import MAX_INTENSITY, ROI_NAMES, Patch, RoiLayout, extract_patch

FEATURE_NAMES = tuple(f"H_{r}" for r in ROI_NAMES) + tuple(f"E_{r}" for r in ROI_NAMES)
MIN_HURST_SIZE = 16


def _pixels(patch) -> np.ndarray:
    return patch.pixels if isinstance(patch, Patch) else np.asarray(patch)


def entropy(patch) -> float:
    """Shannon entropy in bits of the patch's exact-value intensity histogram."""
    px = _pixels(patch).ravel()
    if px.size == 0:
        raise KneeTexError("entropy of an empty patch")
    counts = np.zeros(0, dtype=np.int64)
    if np.issubdtype(px.dtype, np.integer):
        counts = intensity_counts(px, MAX_INTENSITY + 1)
        counts = counts[counts > 0]
    if counts.size == 0:
        _, counts = np.unique(px, return_counts=True)
    if counts.size == 1:
        return 0.0
    # sorted so the sum does not depend on which values occur
    p = np.sort(counts) / px.size
    return float(-np.sum(p * np.log2(p)))


@dataclass(frozen=True)
class HurstEstimate:
    value: float
    slope: float
    clamped: bool
    lags: np.ndarray
    mean_sq_increments: np.ndarray


def dyadic_lags(shape) -> np.ndarray:
    limit = min(shape) // 4
    lags = []
    d = 1
    while d <= limit:
        lags.append(d)
        d *= 2
    return np.array(lags)


def _variogram(img: np.ndarray, lags: Sequence[int]) -> np.ndarray:
    out = np.empty(len(lags))
    for k, d in enumerate(lags):
        dx = img[:, d:] - img[:, :-d]
        dy = img[d:, :] - img[:-d, :]
        out[k] = (np.einsum("ij,ij->", dx, dx) + np.einsum("ij,ij->", dy, dy)) / (dx.size + dy.size)
    return out


def hurst_variogram(patch) -> HurstEstimate:
    """Variance-of-increments estimator.

    For dyadic lags ``d <= min(shape)/4`` the mean squared horizontal and
    vertical increment ``m(d)`` is regressed on ``d`` in log-log space; the
    Hurst coefficient is half the slope, clamped to [0, 1].
    """
    img = np.asarray(_pixels(patch), dtype=float)
    if img.ndim != 2 or min(img.shape) < MIN_HURST_SIZE:
        raise PatchSizeError(f"Hurst estimation needs at least {MIN_HURST_SIZE}x{MIN_HURST_SIZE} "
                             f"pixels, got {img.shape}")
    lags = dyadic_lags(img.shape)
    m = _variogram(img, lags)
    keep = m > 0
    if keep.sum() < 3:
        raise UndefinedRoughnessError("patch has (almost) no intensity variation")
    x, y = np.log(lags[keep]), np.log(m[keep])
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    h = slope / 2
    clamped = not 0.0 <= h <= 1.0
    return HurstEstimate(value=min(max(h, 0.0), 1.0), slope=slope, clamped=clamped,
                         lags=lags, mean_sq_increments=m)


HURST_ESTIMATORS: Dict[str, Callable[..., HurstEstimate]] = {
    "variogram": hurst_variogram,
}


def estimate_hurst(patch, method: str = "variogram") -> HurstEstimate:
    try:
        fn = HURST_ESTIMATORS[method]
    except KeyError:
        raise KneeTexError(f"unknown Hurst estimator {method!r}; "
                           f"available: {sorted(HURST_ESTIMATORS)}") from None
    return fn(patch)


def hurst(patch, method: str = "variogram") -> float:
    return estimate_hurst(patch, method).value


@dataclass(frozen=True)
class FeatureVector:
    subject_id: str
    values: np.ndarray
    label: Optional[int] = None
    clamped: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(FEATURE_NAMES),):
            raise KneeTexError(f"feature vector needs {len(FEATURE_NAMES)} values, got {v.shape}")
        object.__setattr__(self, "values", v)

    def as_dict(self):
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


def patch_features(patch, method: str = "variogram"):
    """``(H, E, clamped)`` for one patch."""
    est = estimate_hurst(patch, method)
    return est.value, entropy(patch), est.clamped


def feature_vector(image, layout: RoiLayout, subject_id: str = "", label=None,
                   method: str = "variogram") -> FeatureVector:
    hs, es, clamped, failures = {}, {}, [], {}
    for roi in layout:
        try:
            patch = extract_patch(image, roi)
            es[roi.name] = entropy(patch)
            est = estimate_hurst(patch, method)
        except KneeTexError as exc:
            failures[roi.name] = str(exc)
            continue
        hs[roi.name] = est.value
        if est.clamped:
            clamped.append(roi.name)
    if failures:
        raise FeatureVectorError(failures)
    values = [hs[r] for r in ROI_NAMES] + [es[r] for r in ROI_NAMES]
    return FeatureVector(subject_id=subject_id, values=np.array(values), label=label,
                         clamped=tuple(clamped))
