"""Landmark JSON files: one object per radiograph."""
from __future__ import annotations

import json
import os
from typing import List

from .errors import KneeTexError, ParseError
from .geometry import LandmarkSet

REQUIRED_KEYS = ("medial_plateau", "lateral_plateau", "medial_condyle_tip",
                 "lateral_condyle_tip", "medial_condyle_extent", "lateral_condyle_extent",
                 "pixel_spacing_mm", "laterality", "label", "image")
_LATERALITY = {"L": "left", "R": "right"}


def landmarks_from_json(obj: dict, default_id: str = "") -> LandmarkSet:
    subject = obj.get("subject_id") or (os.path.splitext(os.path.basename(str(obj.get("image", ""))))[0]
                                        if obj.get("image") else default_id)
    for key in REQUIRED_KEYS:
        if key not in obj:
            raise ParseError(f"subject {subject!r}: missing landmark key {key!r}")
    lat = obj["laterality"]
    if lat not in _LATERALITY:
        raise ParseError(f"subject {subject!r}: laterality must be 'L' or 'R', got {lat!r}")
    try:
        return LandmarkSet(
            medial_plateau=tuple(obj["medial_plateau"]),
            lateral_plateau=tuple(obj["lateral_plateau"]),
            medial_condyle_tip=tuple(obj["medial_condyle_tip"]),
            lateral_condyle_tip=tuple(obj["lateral_condyle_tip"]),
            medial_condyle_extent=tuple(obj["medial_condyle_extent"]),
            lateral_condyle_extent=tuple(obj["lateral_condyle_extent"]),
            pixel_spacing=float(obj["pixel_spacing_mm"]),
            laterality=_LATERALITY[lat],
            label=obj["label"],
            subject_id=str(subject),
            image=obj["image"],
        )
    except (KneeTexError, TypeError, ValueError) as exc:
        raise ParseError(f"subject {subject!r}: {exc}") from None


def landmarks_to_json(lm: LandmarkSet) -> dict:
    return {
        "subject_id": lm.subject_id,
        "image": lm.image,
        "medial_plateau": list(lm.medial_plateau),
        "lateral_plateau": list(lm.lateral_plateau),
        "medial_condyle_tip": list(lm.medial_condyle_tip),
        "lateral_condyle_tip": list(lm.lateral_condyle_tip),
        "medial_condyle_extent": list(lm.medial_condyle_extent),
        "lateral_condyle_extent": list(lm.lateral_condyle_extent),
        "pixel_spacing_mm": lm.pixel_spacing,
        "laterality": "L" if lm.laterality == "left" else "R",
        "label": lm.label,
    }


def load_landmarks(path) -> List[LandmarkSet]:
    """Read a file holding one landmark object or a list of them."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None
    items = data if isinstance(data, list) else [data]
    out = []
    for k, obj in enumerate(items):
        if not isinstance(obj, dict):
            raise ParseError(f"{path}: entry {k} is not an object")
        out.append(landmarks_from_json(obj, default_id=f"subject{k}"))
    return out
