"""
ROI geometry on a knee radiograph
=================================

Four tibial ROIs tile a box defined in plateau-relative units, and two
square femoral ROIs sit a fixed 4 mm above the condyle-tip line.
"""

# %%
# Landmarks for a left knee in pixel coordinates (x right, y down).
import numpy as np

from kneetex.geometry import LandmarkSet, build_layout, extract_patch, layout_corners

lm = LandmarkSet(medial_plateau=(100, 200), lateral_plateau=(300, 200),
                 medial_condyle_tip=(120, 180), lateral_condyle_tip=(280, 180),
                 medial_condyle_extent=(0, 80), lateral_condyle_extent=(80, 160),
                 pixel_spacing=0.075)
layout = build_layout(lm)

# %%
# Each ROI is an oriented rectangle; corners run origin, +u, +u+v, +v.
for name, k, x, y in layout_corners(layout):
    if k == 0:
        print(f"{name}: first corner ({x:.1f}, {y:.1f})", end="  ")
        print(f"size {layout[name].width:.1f} x {layout[name].height:.1f}")

# %%
# Patches are sampled bilinearly along the ROI axes.
image = np.add.outer(np.arange(300.0), np.arange(400.0)).astype(np.uint16)
patch = extract_patch(image, layout["T0"])
print("T0 patch", patch.shape, "value range", patch.pixels.min(), patch.pixels.max())

# %%
# A right knee is handled by mirroring x -> W - 1 - x before layout.
from dataclasses import replace

from kneetex.geometry import canonical_view, reflect_landmarks

right = replace(reflect_landmarks(lm, image_width=400), laterality="right")
mirrored, canon = canonical_view(image[:, ::-1], right)
print("right knee T0 matches left:", np.array_equal(
    extract_patch(mirrored, build_layout(canon)["T0"]).pixels, patch.pixels))
