"""Synthetic ground truth: fBm textures, entropy-shaped patches, planted cohorts.

fBm patches come from spectral synthesis. The power spectrum is the lattice
sum of ``|f + k|^-(2H+2)`` over the nearest aliases ``k``, synthesized on a
torus four times larger than the patch. A random linear ramp stands in for
the frequencies below the torus resolution. Without these corrections the
increment-variance slope is biased by several hundredths.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from typing import Dict, List, Tuple

import numpy as np

from .dataset import FeatureMatrix
from .errors import KneeTexError, UnreachableTargetError
from .evaluation import mix64
from .geometry import (MAX_INTENSITY, ROI_NAMES, TIBIA_BOX, LandmarkSet, Patch, build_layout,
                       femoral_offset_px, reflect_landmarks)
from .texture import FEATURE_NAMES, entropy, hurst

H_RANGE = (0.05, 0.95)
SIZE_RANGE = (16, 4096)
_PAD = 4
_MAX_TORUS = 2048


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@lru_cache(maxsize=8)
def _alias_log_r2(n: int):
    fy = np.fft.fftfreq(n)[:, None]
    fx = np.fft.rfftfreq(n)[None, :]
    out = []
    for kx in (-1, 0, 1):
        for ky in (-1, 0, 1):
            r2 = (fx + kx) ** 2 + (fy + ky) ** 2
            if kx == 0 and ky == 0:
                r2[0, 0] = 1.0
            out.append(np.log(r2))
    return tuple(out)


def fbm_field(H: float, shape: Tuple[int, int], seed: int) -> np.ndarray:
    """Float fBm surface of the given (rows, cols) shape."""
    if not H_RANGE[0] < H < H_RANGE[1]:
        raise KneeTexError(f"H must lie in {H_RANGE}, got {H}")
    rows, cols = shape
    size = max(rows, cols)
    if not (SIZE_RANGE[0] <= min(rows, cols) and size <= SIZE_RANGE[1]):
        raise KneeTexError(f"patch size must lie in {SIZE_RANGE}, got {shape}")
    n = size * max(1, min(_PAD, _MAX_TORUS // size))
    power = sum(np.exp(-(H + 1.0) * lr) for lr in _alias_log_r2(n))
    amp = np.sqrt(power)
    amp[0, 0] = 0.0
    rng = _rng(seed)
    noise = rng.standard_normal(amp.shape) + 1j * rng.standard_normal(amp.shape)
    # the Hermitian half-spectrum doubles the variance of a full complex one
    field = np.fft.irfft2(amp * noise, s=(n, n))[:rows, :cols] / math.sqrt(2.0)
    # power missing below the lowest torus frequency, as a random gradient
    f0 = 1.0 / (n * math.sqrt(math.pi))
    grad_sd = math.sqrt(4 * math.pi ** 3 * f0 ** (2 - 2 * H) / (2 - 2 * H)) / n
    gx, gy = rng.standard_normal(2) * grad_sd
    yy, xx = np.mgrid[:rows, :cols]
    return field + gx * xx + gy * yy


def _to_14bit(field: np.ndarray) -> np.ndarray:
    lo, hi = field.min(), field.max()
    scaled = (field - lo) / (hi - lo) * MAX_INTENSITY
    return np.clip(np.rint(scaled), 0, MAX_INTENSITY).astype(np.uint16)


def fbm_patch(H: float, size: int, seed: int) -> Patch:
    """Square fBm texture rescaled to the full 14-bit range."""
    if not SIZE_RANGE[0] <= size <= SIZE_RANGE[1]:
        raise KneeTexError(f"size must lie in {SIZE_RANGE}, got {size}")
    return Patch(_to_14bit(fbm_field(H, (size, size), seed)), roi_name=f"fbm_H{H:g}")


def _spread_entropy(n: int, k: int, m: int) -> float:
    """Entropy of n pixels: m spread evenly over k-1 symbols, n-m on one symbol."""
    counts = np.full(k - 1, m // (k - 1))
    counts[: m % (k - 1)] += 1
    counts = np.r_[n - m, counts]
    counts = np.sort(counts[counts > 0])
    p = counts / n
    return float(-np.sum(p * np.log2(p))) if counts.size > 1 else 0.0


def entropy_shaped_patch(target_bits: float, size: int, seed: int,
                         tol: float = 0.05) -> Patch:
    """Patch whose intensity histogram has ``target_bits`` of entropy.

    Uses ``ceil(2**target)`` symbols: a point mass mixed with a uniform
    support. The integer number of pixels on the uniform part is found by
    bisection, then pixels are placed in random order.
    """
    if not 0.5 < target_bits <= 14:
        raise KneeTexError(f"target entropy must lie in (0.5, 14], got {target_bits}")
    n = size * size
    k = int(math.ceil(2.0 ** target_bits - 1e-9))
    if n < k:
        raise UnreachableTargetError(
            f"{target_bits} bits needs {k} distinct values but a {size}x{size} patch has {n} pixels")
    lo, hi = 0, n - -(-n // k)  # hi: as uniform as possible
    if _spread_entropy(n, k, hi) < target_bits - tol:
        raise UnreachableTargetError(f"cannot reach {target_bits} bits with {n} pixels")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _spread_entropy(n, k, mid) < target_bits:
            lo = mid
        else:
            hi = mid
    m = min((lo, hi), key=lambda c: abs(_spread_entropy(n, k, c) - target_bits))
    if abs(_spread_entropy(n, k, m) - target_bits) > tol:
        raise UnreachableTargetError(f"closest achievable entropy misses {target_bits} by > {tol}")
    counts = np.full(k - 1, m // (k - 1))
    counts[: m % (k - 1)] += 1
    counts = np.r_[n - m, counts]
    rng = _rng(seed)
    offset = int(rng.integers(0, MAX_INTENSITY + 2 - k))
    values = offset + rng.permutation(k)
    pixels = rng.permutation(np.repeat(values, counts)).reshape(size, size)
    return Patch(pixels.astype(np.uint16), roi_name=f"entropy_{target_bits:g}")


def textured_patch(H: float, target_bits: float, shape: Tuple[int, int], seed: int,
                   tol: float = 0.01, base: float = 8192.0) -> Patch:
    """fBm texture of roughness ``H`` quantized so its entropy is ``target_bits``.

    The intensity scale is found by bisection; the Hurst estimate is unaffected
    by the affine rescaling apart from quantization.
    """
    z = fbm_field(H, shape, seed)
    z = (z - z.mean()) / z.std()
    limit = (MAX_INTENSITY - base) / max(np.abs(z).max(), 1e-12)

    def quantize(scale):
        return np.clip(np.rint(base + scale * z), 0, MAX_INTENSITY).astype(np.uint16)

    if entropy(quantize(limit)) < target_bits - tol:
        raise UnreachableTargetError(f"{target_bits} bits not reachable on a {shape} patch")
    lo, hi = math.log(1e-3), math.log(limit)
    best = quantize(limit)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        q = quantize(math.exp(mid))
        e = entropy(q)
        if abs(e - target_bits) < abs(entropy(best) - target_bits):
            best = q
        if abs(e - target_bits) <= tol:
            break
        if e < target_bits:
            lo = mid
        else:
            hi = mid
    return Patch(best)


def _six(values, name) -> Tuple[float, ...]:
    if isinstance(values, (int, float)):
        return (float(values),) * len(ROI_NAMES)
    vals = tuple(float(v) for v in values)
    if len(vals) != len(ROI_NAMES):
        raise KneeTexError(f"{name} needs one value per ROI {ROI_NAMES}")
    return vals


@dataclass(frozen=True)
class CohortSpec:
    """Class-conditional texture targets per ROI, in ROI order F0, F1, T0..T3.

    ``noise_sd`` jitters each subject's Hurst targets, ``entropy_noise_sd``
    its entropy targets. ``patch_size`` is the tibia ROI width in pixels.
    """

    n_case: int = 67
    n_control: int = 86
    h_case: Tuple[float, ...] = (0.35,) * 6
    h_control: Tuple[float, ...] = (0.35,) * 6
    e_case: Tuple[float, ...] = (10.0,) * 6
    e_control: Tuple[float, ...] = (10.0,) * 6
    patch_size: int = 70
    noise_sd: float = 0.03
    entropy_noise_sd: float = 0.3
    seed: int = 0

    def __post_init__(self):
        for name in ("h_case", "h_control", "e_case", "e_control"):
            object.__setattr__(self, name, _six(getattr(self, name), name))
        if self.n_case <= 0 or self.n_control <= 0:
            raise KneeTexError("cohort needs at least one case and one control")
        for h in self.h_case + self.h_control:
            if not H_RANGE[0] < h < H_RANGE[1]:
                raise KneeTexError(f"target H {h} outside {H_RANGE}")
        max_bits = math.log2(self.patch_size * round(self.patch_size * 0.16 / 0.175))
        for e in self.e_case + self.e_control:
            if not 0 < e < min(14.0, max_bits):
                raise KneeTexError(f"entropy target {e} outside (0, {min(14.0, max_bits):.2f})")
        if self.noise_sd < 0 or self.entropy_noise_sd < 0:
            raise KneeTexError("noise levels must be non-negative")
        if round(self.patch_size * 0.16 / 0.175) < 16:
            raise KneeTexError("patch_size too small for Hurst estimation")

    @classmethod
    def with_effects(cls, effects: Dict[str, float], h: float = 0.35, e: float = 10.0,
                     **kw) -> "CohortSpec":
        """Equal classes except ``effects``: feature name -> case minus control shift."""
        hc, hk = [h] * 6, [h] * 6
        ec, ek = [e] * 6, [e] * 6
        for feat, delta in effects.items():
            if feat not in FEATURE_NAMES:
                raise KneeTexError(f"unknown feature {feat!r}")
            kind, roi = feat.split("_")
            j = ROI_NAMES.index(roi)
            if kind == "H":
                hc[j] += delta / 2
                hk[j] -= delta / 2
            else:
                ec[j] += delta / 2
                ek[j] -= delta / 2
        return cls(h_case=tuple(hc), h_control=tuple(hk), e_case=tuple(ec), e_control=tuple(ek),
                   **kw)

    @property
    def informative(self) -> List[str]:
        out = []
        for kind, case, ctrl in (("H", self.h_case, self.h_control),
                                 ("E", self.e_case, self.e_control)):
            out += [f"{kind}_{r}" for r, a, b in zip(ROI_NAMES, case, ctrl) if a != b]
        return [f for f in FEATURE_NAMES if f in out]

    def ground_truth(self) -> dict:
        effects = {}
        for j, r in enumerate(ROI_NAMES):
            effects[f"H_{r}"] = self.h_case[j] - self.h_control[j]
            effects[f"E_{r}"] = self.e_case[j] - self.e_control[j]
        return {"informative_features": self.informative,
                "effects_case_minus_control": effects,
                "spec": asdict(self)}


@dataclass(frozen=True)
class SyntheticSubject:
    subject_id: str
    label: int
    laterality: str
    patches: Dict[str, Patch]


def unit_distance(patch_size: int) -> float:
    """Plateau landmark distance giving tibia ROIs ``patch_size`` px wide."""
    return patch_size / ((TIBIA_BOX[1][0] - TIBIA_BOX[0][0]) / 4)


def roi_shapes(patch_size: int) -> Dict[str, Tuple[int, int]]:
    d = unit_distance(patch_size)
    h = int(round((TIBIA_BOX[1][1] - TIBIA_BOX[0][1]) * d))
    return {r: ((patch_size, patch_size) if r.startswith("F") else (h, patch_size))
            for r in ROI_NAMES}


def _subject_order(spec: CohortSpec) -> np.ndarray:
    labels = np.r_[np.ones(spec.n_case, int), np.zeros(spec.n_control, int)]
    return _rng(mix64(spec.seed, 0xC0)).permutation(labels)


def synth_subject(spec: CohortSpec, index: int, label: int) -> SyntheticSubject:
    seed = mix64(spec.seed, 1000 + index)
    rng = _rng(seed)
    hs = spec.h_case if label == 1 else spec.h_control
    es = spec.e_case if label == 1 else spec.e_control
    shapes = roi_shapes(spec.patch_size)
    patches = {}
    laterality = "left" if rng.random() < 0.58 else "right"
    for j, roi in enumerate(ROI_NAMES):
        h = float(np.clip(hs[j] + spec.noise_sd * rng.standard_normal(), 0.06, 0.94))
        e = float(es[j] + spec.entropy_noise_sd * rng.standard_normal())
        e = min(max(e, 1.0), math.log2(shapes[roi][0] * shapes[roi][1]) - 0.5)
        p = textured_patch(h, e, shapes[roi], mix64(seed, j))
        patches[roi] = Patch(p.pixels, roi_name=roi)
    return SyntheticSubject(f"S{index:04d}", int(label), laterality, patches)


def cohort_subjects(spec: CohortSpec) -> List[SyntheticSubject]:
    return [synth_subject(spec, i, lab) for i, lab in enumerate(_subject_order(spec))]


def subject_features(subject: SyntheticSubject) -> np.ndarray:
    hs = [hurst(subject.patches[r]) for r in ROI_NAMES]
    es = [entropy(subject.patches[r]) for r in ROI_NAMES]
    return np.array(hs + es)


def planted_cohort(spec: CohortSpec) -> FeatureMatrix:
    """Fast mode: descriptors computed straight from the synthesized ROI patches."""
    subjects = cohort_subjects(spec)
    return FeatureMatrix(tuple(s.subject_id for s in subjects),
                         np.array([subject_features(s) for s in subjects]),
                         np.array([s.label for s in subjects]))


BACKGROUND = 1000


def synthetic_landmarks(patch_size: int, pixel_spacing: float = 0.075, margin: int = 20):
    """Canonical (left knee) landmarks plus the canvas shape that contains every ROI."""
    d = unit_distance(patch_size)
    side = patch_size
    lift = femoral_offset_px(pixel_spacing)
    gap = int(round(0.05 * d))
    mx = float(margin)
    py = float(margin + side + lift + gap)
    cond_len = (TIBIA_BOX[1][0] - TIBIA_BOX[0][0]) * d
    lm = LandmarkSet(
        medial_plateau=(mx, py),
        lateral_plateau=(mx + d, py),
        medial_condyle_tip=(mx + TIBIA_BOX[0][0] * d, py - gap),
        lateral_condyle_tip=(mx + TIBIA_BOX[1][0] * d, py - gap),
        medial_condyle_extent=(0.0, cond_len / 2),
        lateral_condyle_extent=(cond_len / 2, cond_len),
        pixel_spacing=pixel_spacing,
    )
    rows = int(math.ceil(py + TIBIA_BOX[1][1] * d)) + margin
    cols = int(math.ceil(mx + d)) + margin
    return lm, (rows, cols)


def render_subject(subject: SyntheticSubject, patch_size: int, pixel_spacing: float = 0.075):
    """Composite the ROI patches into a radiograph-sized canvas.

    Right knees are rendered canonically and then mirrored together with
    their landmarks, so extraction exercises the laterality handling.
    """
    lm, shape = synthetic_landmarks(patch_size, pixel_spacing)
    canvas = np.full(shape, BACKGROUND, dtype=np.uint16)
    for roi in build_layout(lm):
        x0, y0 = (int(round(c)) for c in roi.origin)
        px = subject.patches[roi.name].pixels
        canvas[y0:y0 + px.shape[0], x0:x0 + px.shape[1]] = px
    label = "case" if subject.label == 1 else "control"
    lm = replace(lm, label=label, subject_id=subject.subject_id)
    if subject.laterality == "right":
        canvas = canvas[:, ::-1].copy()
        lm = replace(reflect_landmarks(lm, shape[1]), laterality="right")
    return canvas, lm


def write_synthetic_cohort(spec: CohortSpec, out_dir, image_format: str = "pgm",
                           pixel_spacing: float = 0.075) -> FeatureMatrix:
    """Write images, ``landmarks.json`` and ``ground_truth.json``; return the fast-mode matrix."""
    from .imageio import write_pgm, write_png
    from .landmarks import landmarks_to_json

    if image_format not in ("pgm", "png"):
        raise KneeTexError("image_format must be pgm or png")
    os.makedirs(out_dir, exist_ok=True)
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    subjects = cohort_subjects(spec)
    records = []
    for s in subjects:
        canvas, lm = render_subject(s, spec.patch_size, pixel_spacing)
        rel = f"images/{s.subject_id}.{image_format}"
        (write_pgm if image_format == "pgm" else write_png)(os.path.join(out_dir, rel), canvas)
        records.append(landmarks_to_json(replace(lm, image=rel)))
    with open(os.path.join(out_dir, "landmarks.json"), "w") as fh:
        json.dump(records, fh, indent=1)
    with open(os.path.join(out_dir, "ground_truth.json"), "w") as fh:
        json.dump(spec.ground_truth(), fh, indent=1)
    return FeatureMatrix(tuple(s.subject_id for s in subjects),
                         np.array([subject_features(s) for s in subjects]),
                         np.array([s.label for s in subjects]))
