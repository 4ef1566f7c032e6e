"""Landmark-anchored ROI layout and oriented patch extraction.

Image coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row
(y grows downwards). Integer coordinates address pixel centres.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from .errors import DegenerateFrameError, KneeTexError, OutOfBoundsError

ROI_NAMES = ("F0", "F1", "T0", "T1", "T2", "T3")
TIBIA_NAMES = ROI_NAMES[2:]
FEMUR_NAMES = ROI_NAMES[:2]

# unit-frame box spanned by the tibia ROIs
TIBIA_BOX = ((0.15, 0.07), (0.85, 0.23))
FEMUR_OFFSET_MM = 4.0
MAX_INTENSITY = 16383

LATERALITIES = ("left", "right")
LABELS = ("case", "control", None)


def _point(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape != (2,) or not np.all(np.isfinite(a)):
        raise KneeTexError(f"expected a finite 2-D point, got {p!r}")
    return a


def _rot90(v: np.ndarray) -> np.ndarray:
    # +90 degrees in y-down image coordinates: +x maps to +y
    return np.array([-v[1], v[0]])


@dataclass(frozen=True)
class LandmarkSet:
    """Anatomical anchors for one radiograph.

    Condyle extents are intervals of the coordinate ``s = (p - medial_condyle_tip) . a``
    where ``a`` is the unit vector from the medial to the lateral condyle tip.
    """

    medial_plateau: Tuple[float, float]
    lateral_plateau: Tuple[float, float]
    medial_condyle_tip: Tuple[float, float]
    lateral_condyle_tip: Tuple[float, float]
    medial_condyle_extent: Tuple[float, float]
    lateral_condyle_extent: Tuple[float, float]
    pixel_spacing: float
    laterality: str = "left"
    label: Optional[str] = None
    subject_id: str = ""
    image: Optional[str] = None

    def __post_init__(self):
        for name in ("medial_plateau", "lateral_plateau",
                     "medial_condyle_tip", "lateral_condyle_tip"):
            object.__setattr__(self, name, tuple(float(c) for c in _point(getattr(self, name))))
        for name in ("medial_condyle_extent", "lateral_condyle_extent"):
            lo, hi = (float(c) for c in getattr(self, name))
            if not hi > lo:
                raise KneeTexError(f"{name} must have positive length, got [{lo}, {hi}]")
            object.__setattr__(self, name, (lo, hi))
        if not self.pixel_spacing > 0:
            raise KneeTexError(f"pixel_spacing must be > 0, got {self.pixel_spacing}")
        if self.laterality not in LATERALITIES:
            raise KneeTexError(f"laterality must be one of {LATERALITIES}, got {self.laterality!r}")
        if self.label not in LABELS:
            raise KneeTexError(f"label must be case, control or None, got {self.label!r}")
        if np.allclose(self.medial_plateau, self.lateral_plateau, rtol=0, atol=0):
            raise DegenerateFrameError("medial and lateral plateau landmarks coincide")


@dataclass(frozen=True)
class OrientedRect:
    """Rectangle with top-left ``origin`` spanned by ``width*u_axis`` and ``height*v_axis``."""

    name: str
    origin: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    width: float
    height: float
    out_of_bone: bool = False

    def __post_init__(self):
        u = np.asarray(self.u_axis, float)
        v = np.asarray(self.v_axis, float)
        if abs(np.linalg.norm(u) - 1) > 1e-9 or abs(np.linalg.norm(v) - 1) > 1e-9 or abs(u @ v) > 1e-9:
            raise KneeTexError(f"{self.name}: axes must be orthonormal")
        if not (self.width > 0 and self.height > 0):
            raise KneeTexError(f"{self.name}: width and height must be positive")
        object.__setattr__(self, "origin", np.asarray(self.origin, float))
        object.__setattr__(self, "u_axis", u)
        object.__setattr__(self, "v_axis", v)

    def corners(self) -> np.ndarray:
        """Four corners, clockwise on screen starting at the origin."""
        o, u, v = self.origin, self.u_axis * self.width, self.v_axis * self.height
        return np.array([o, o + u, o + u + v, o + v])


@dataclass(frozen=True)
class RoiLayout:
    rois: Tuple[OrientedRect, ...]

    def __post_init__(self):
        names = tuple(r.name for r in self.rois)
        if names != ROI_NAMES:
            raise KneeTexError(f"layout must list ROIs as {ROI_NAMES}, got {names}")

    def __getitem__(self, name: str) -> OrientedRect:
        return self.rois[ROI_NAMES.index(name)]

    def __iter__(self):
        return iter(self.rois)

    @property
    def warnings(self) -> Tuple[str, ...]:
        return tuple(r.name for r in self.rois if r.out_of_bone)


@dataclass(frozen=True)
class PlateauFrame:
    """Similarity map from the unit plateau frame to pixels.

    ``(0, 0)`` is the medial landmark, ``(1, 0)`` the lateral one and the second
    axis is the first rotated by +90 degrees, so positive unit-y points into the
    tibia on a canonically oriented image.
    """

    origin: np.ndarray
    x_axis: np.ndarray
    y_axis: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "y_axis", _rot90(self.x_axis))

    @property
    def scale(self) -> float:
        return float(np.hypot(*self.x_axis))

    def __call__(self, unit_point) -> np.ndarray:
        u, v = unit_point
        return self.origin + u * self.x_axis + v * self.y_axis

    def inverse(self, point) -> np.ndarray:
        d = np.asarray(point, float) - self.origin
        s2 = self.scale ** 2
        return np.array([d @ self.x_axis, d @ self.y_axis]) / s2


def plateau_frame(medial, lateral) -> PlateauFrame:
    m, l = _point(medial), _point(lateral)
    axis = l - m
    if not np.hypot(*axis) > 0:
        raise DegenerateFrameError(f"plateau landmarks coincide at {tuple(m)}")
    return PlateauFrame(origin=m, x_axis=axis)


def tibia_rois(frame: PlateauFrame):
    """Split the tibia box into four equal ROIs ordered medial to lateral."""
    (x0, y0), (x1, y1) = TIBIA_BOX
    step = (x1 - x0) / 4
    u = frame.x_axis / frame.scale
    v = frame.y_axis / frame.scale
    rois = []
    for i, name in enumerate(TIBIA_NAMES):
        rois.append(OrientedRect(
            name=name,
            origin=frame((x0 + i * step, y0)),
            u_axis=u, v_axis=v,
            width=step * frame.scale,
            height=(y1 - y0) * frame.scale,
        ))
    return rois


def femoral_offset_px(pixel_spacing: float) -> int:
    return int(round(FEMUR_OFFSET_MM / pixel_spacing))


def femoral_rois(landmarks: LandmarkSet, tibia_roi_width: float):
    """Square femoral ROIs F0 (medial) and F1 (lateral).

    Both are aligned with the condyle-tip line, have their bottom edge
    ``round(4 mm / pixel_spacing)`` px above it and are centred on their
    condyle extent. A square wider than its extent is flagged ``out_of_bone``.
    """
    if not tibia_roi_width > 0:
        raise KneeTexError("tibia_roi_width must be positive")
    tip = _point(landmarks.medial_condyle_tip)
    axis = _point(landmarks.lateral_condyle_tip) - tip
    length = np.hypot(*axis)
    if not length > 0:
        raise DegenerateFrameError("condyle tips coincide")
    a = axis / length
    down = _rot90(a)
    lift = femoral_offset_px(landmarks.pixel_spacing)
    side = float(tibia_roi_width)
    rois = []
    for name, (lo, hi) in zip(FEMUR_NAMES, (landmarks.medial_condyle_extent,
                                            landmarks.lateral_condyle_extent)):
        centre = 0.5 * (lo + hi)
        origin = tip + (centre - side / 2) * a - (lift + side) * down
        rois.append(OrientedRect(name=name, origin=origin, u_axis=a, v_axis=down,
                                 width=side, height=side, out_of_bone=(hi - lo) < side))
    return rois


def build_layout(landmarks: LandmarkSet) -> RoiLayout:
    frame = plateau_frame(landmarks.medial_plateau, landmarks.lateral_plateau)
    tibia = tibia_rois(frame)
    femur = femoral_rois(landmarks, tibia[0].width)
    return RoiLayout(tuple(femur + tibia))


@dataclass(frozen=True)
class Patch:
    pixels: np.ndarray
    roi_name: str = ""

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise KneeTexError(f"patch {self.roi_name!r} must be a non-empty 2-D grid")
        if not np.issubdtype(px.dtype, np.integer):
            raise KneeTexError(f"patch {self.roi_name!r} must hold integer intensities")
        if px.min() < 0 or px.max() > MAX_INTENSITY:
            raise KneeTexError(f"patch {self.roi_name!r} has intensities outside 0..{MAX_INTENSITY}")
        object.__setattr__(self, "pixels", px)

    @property
    def shape(self):
        return self.pixels.shape


def extract_patch(image: np.ndarray, roi: OrientedRect, eps: float = 1e-6) -> Patch:
    """Resample ``roi`` from ``image`` on a 1-px grid with bilinear interpolation."""
    image = np.asarray(image)
    w, h = int(round(roi.width)), int(round(roi.height))
    if w < 1 or h < 1:
        raise KneeTexError(f"ROI {roi.name} rounds to an empty grid")
    jj, ii = np.meshgrid(np.arange(w), np.arange(h))
    xs = roi.origin[0] + jj * roi.u_axis[0] + ii * roi.v_axis[0]
    ys = roi.origin[1] + jj * roi.u_axis[1] + ii * roi.v_axis[1]
    rows, cols = image.shape
    if (xs.min() < -eps or ys.min() < -eps
            or xs.max() > cols - 1 + eps or ys.max() > rows - 1 + eps):
        raise OutOfBoundsError(
            f"ROI {roi.name} spans x=[{xs.min():.1f}, {xs.max():.1f}], "
            f"y=[{ys.min():.1f}, {ys.max():.1f}] outside a {cols}x{rows} image")
    xs = np.clip(xs, 0, cols - 1)
    ys = np.clip(ys, 0, rows - 1)
    vals = ndimage.map_coordinates(image.astype(float), [ys, xs], order=1, mode="nearest")
    pixels = np.clip(np.rint(vals), 0, MAX_INTENSITY).astype(np.uint16)
    return Patch(pixels=pixels, roi_name=roi.name)


def reflect_landmarks(landmarks: LandmarkSet, image_width: int) -> LandmarkSet:
    """Reflect all landmark points about the vertical midline: x' = (W - 1) - x.

    Condyle extents are distances along the medial-to-lateral axis and are
    therefore unchanged.
    """
    flip = lambda p: ((image_width - 1) - p[0], p[1])
    return replace(
        landmarks,
        medial_plateau=flip(landmarks.medial_plateau),
        lateral_plateau=flip(landmarks.lateral_plateau),
        medial_condyle_tip=flip(landmarks.medial_condyle_tip),
        lateral_condyle_tip=flip(landmarks.lateral_condyle_tip),
    )


def mirror_for_laterality(landmarks: LandmarkSet, image_width: int,
                          canonical: str = "left") -> LandmarkSet:
    """Reflect non-canonical knees so the medial side sits on the image left.

    The ``laterality`` field is kept, so applying this twice restores the input.
    """
    if canonical not in LATERALITIES:
        raise KneeTexError(f"canonical side must be one of {LATERALITIES}")
    if landmarks.laterality == canonical:
        return landmarks
    return reflect_landmarks(landmarks, image_width)


def canonical_view(image: np.ndarray, landmarks: LandmarkSet, canonical: str = "left"):
    """Return ``(image, landmarks)`` mirrored together when the knee is non-canonical."""
    if landmarks.laterality == canonical:
        return image, landmarks
    image = np.asarray(image)
    return image[:, ::-1], mirror_for_laterality(landmarks, image.shape[1], canonical)


def layout_corners(layout: RoiLayout):
    """Rows ``(roi, corner_index, x, y)`` for CSV export."""
    rows = []
    for roi in layout:
        for k, (x, y) in enumerate(roi.corners()):
            rows.append((roi.name, k, float(x), float(y)))
    return rows

