import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kneetex.errors import DegenerateFrameError, KneeTexError, OutOfBoundsError
from kneetex.geometry import (LandmarkSet, OrientedRect, build_layout, canonical_view,
                              extract_patch, femoral_offset_px, femoral_rois, layout_corners,
                              mirror_for_laterality, plateau_frame, reflect_landmarks,
                              tibia_rois)

GOLD = 1e-9


def straight_knee(**kw):
    base = dict(medial_plateau=(100, 200), lateral_plateau=(300, 200),
                medial_condyle_tip=(120, 180), lateral_condyle_tip=(280, 180),
                medial_condyle_extent=(0, 80), lateral_condyle_extent=(80, 160),
                pixel_spacing=0.075)
    base.update(kw)
    return LandmarkSet(**base)


# -- plateau frame ----------------------------------------------------------

def test_frame_midpoint():
    f = plateau_frame((100, 200), (300, 200))
    np.testing.assert_allclose(f((0.5, 0.0)), (200, 200), atol=GOLD, rtol=0)


def test_frame_second_axis_points_down():
    f = plateau_frame((100, 200), (300, 200))
    np.testing.assert_allclose(f((0.0, 1.0)), (100, 400), atol=GOLD, rtol=0)


def test_frame_degenerate():
    with pytest.raises(DegenerateFrameError):
        plateau_frame((0, 0), (0, 0))


coord = st.floats(-2000, 2000, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(coord, coord, coord, coord, st.floats(-3, 3), st.floats(-3, 3))
def test_frame_round_trip(mx, my, lx, ly, u, v):
    if np.hypot(lx - mx, ly - my) < 1e-3:
        return
    f = plateau_frame((mx, my), (lx, ly))
    np.testing.assert_allclose(f.inverse(f((u, v))), (u, v), atol=1e-6)
    np.testing.assert_allclose(f((1.0, 0.0)), (lx, ly), atol=1e-9 * max(1, abs(lx), abs(ly)))


# -- tibia ROIs -------------------------------------------------------------

def _box(rect: OrientedRect):
    c = rect.corners()
    return c[:, 0].min(), c[:, 0].max(), c[:, 1].min(), c[:, 1].max()


def test_tibia_t0_golden():
    rois = tibia_rois(plateau_frame((100, 200), (300, 200)))
    np.testing.assert_allclose(_box(rois[0]), (130, 165, 214, 246), atol=GOLD, rtol=0)


def test_tibia_t3_golden():
    rois = tibia_rois(plateau_frame((100, 200), (300, 200)))
    np.testing.assert_allclose(_box(rois[3]), (235, 270, 214, 246), atol=GOLD, rtol=0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 500), st.floats(0, 500), st.floats(-np.pi, np.pi), st.floats(20, 2000))
def test_tibia_aspect_and_tiling(mx, my, angle, length):
    lateral = (mx + length * np.cos(angle), my + length * np.sin(angle))
    rois = tibia_rois(plateau_frame((mx, my), lateral))
    assert [r.name for r in rois] == ["T0", "T1", "T2", "T3"]
    for r in rois:
        assert r.height / r.width == pytest.approx(0.16 / 0.175, rel=1e-12)
    # adjacent ROIs share an edge
    for a, b in zip(rois, rois[1:]):
        np.testing.assert_allclose(a.corners()[1], b.corners()[0], atol=1e-9 * length)


# -- femoral ROIs -----------------------------------------------------------

def test_offset_53px():
    assert femoral_offset_px(0.075) == 53


def test_femoral_square_side_and_centering():
    lm = straight_knee(medial_condyle_tip=(100, 100), lateral_condyle_tip=(400, 100),
                       medial_condyle_extent=(50, 150), lateral_condyle_extent=(200, 300))
    f0, f1 = femoral_rois(lm, 35.0)
    assert f0.width == f0.height == 35.0
    # extent [50, 150] along the axis, side 35 -> [82.5, 117.5]
    s = f0.corners()[:, 0] - 100
    np.testing.assert_allclose([s.min(), s.max()], [82.5, 117.5], atol=GOLD, rtol=0)
    # bottom edge 53 px above the tip line
    np.testing.assert_allclose(f0.corners()[:, 1].max(), 100 - 53, atol=GOLD, rtol=0)
    np.testing.assert_allclose(f0.corners()[:, 1].min(), 100 - 53 - 35, atol=GOLD, rtol=0)
    assert not f0.out_of_bone and not f1.out_of_bone


def test_femoral_out_of_bone_flag():
    lm = straight_knee(medial_condyle_extent=(0, 20))
    layout = build_layout(lm)
    assert layout["F0"].out_of_bone
    assert layout.warnings == ("F0",)


def test_layout_golden_corners():
    layout = build_layout(straight_knee())
    corners = {r: [] for r in ("F0", "F1", "T0", "T1", "T2", "T3")}
    for name, k, x, y in layout_corners(layout):
        corners[name].append((x, y))
    assert len(layout_corners(layout)) == 24
    # F0: side 35, centred on s=40 from tip (120,180), bottom at y=180-53
    np.testing.assert_allclose(corners["F0"], [(142.5, 92), (177.5, 92), (177.5, 127),
                                               (142.5, 127)], atol=GOLD, rtol=0)
    np.testing.assert_allclose(corners["F1"], [(222.5, 92), (257.5, 92), (257.5, 127),
                                               (222.5, 127)], atol=GOLD, rtol=0)
    np.testing.assert_allclose(corners["T1"], [(165, 214), (200, 214), (200, 246),
                                               (165, 246)], atol=GOLD, rtol=0)


def test_layout_rotates_with_landmarks():
    lm = straight_knee()
    theta = 0.3
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    rot = lambda p: tuple(R @ np.asarray(p, float))
    lm_r = LandmarkSet(rot(lm.medial_plateau), rot(lm.lateral_plateau),
                       rot(lm.medial_condyle_tip), rot(lm.lateral_condyle_tip),
                       lm.medial_condyle_extent, lm.lateral_condyle_extent, lm.pixel_spacing)
    for a, b in zip(build_layout(lm), build_layout(lm_r)):
        np.testing.assert_allclose(a.corners() @ R.T, b.corners(), atol=1e-9)


# -- patch extraction -------------------------------------------------------

def test_axis_aligned_patch_is_subimage():
    img = np.arange(50 * 60, dtype=np.uint16).reshape(50, 60) % 16384
    roi = OrientedRect("T0", (7, 11), (1, 0), (0, 1), 20, 13)
    patch = extract_patch(img, roi)
    np.testing.assert_array_equal(patch.pixels, img[11:24, 7:27])


@settings(max_examples=30, deadline=None)
@given(st.floats(-np.pi, np.pi))
def test_constant_image_any_orientation(angle):
    img = np.full((200, 200), 500, dtype=np.uint16)
    u = (np.cos(angle), np.sin(angle))
    v = (-np.sin(angle), np.cos(angle))
    patch = extract_patch(img, OrientedRect("F0", (100, 100), u, v, 40, 30))
    assert (patch.pixels == 500).all()


def test_out_of_bounds_patch():
    img = np.zeros((50, 50), dtype=np.uint16)
    with pytest.raises(OutOfBoundsError):
        extract_patch(img, OrientedRect("F0", (-5, 10), (1, 0), (0, 1), 10, 10))
    with pytest.raises(OutOfBoundsError):
        extract_patch(img, OrientedRect("F0", (45, 10), (1, 0), (0, 1), 10, 10))


def test_patch_range_enforced():
    from kneetex.geometry import Patch
    with pytest.raises(KneeTexError):
        Patch(np.array([[0, 16384]]))
    with pytest.raises(KneeTexError):
        Patch(np.zeros((0, 3), dtype=np.uint16))


# -- laterality -------------------------------------------------------------

def test_left_unchanged():
    lm = straight_knee()
    assert mirror_for_laterality(lm, 3072) is lm


def test_reflection_formula():
    lm = straight_knee(medial_plateau=(10, 5), laterality="right")
    assert reflect_landmarks(lm, 3072).medial_plateau == (3061.0, 5.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(400, 5000))
def test_mirror_involution(width):
    lm = straight_knee(laterality="right")
    twice = mirror_for_laterality(mirror_for_laterality(lm, width), width)
    assert twice == lm


def test_canonical_view_mirrors_image_and_patches():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 16384, (300, 420)).astype(np.uint16)
    lm = straight_knee()
    right_img = img[:, ::-1]
    right_lm = reflect_landmarks(lm, img.shape[1])
    right_lm = LandmarkSet(**{**{k: getattr(right_lm, k) for k in (
        "medial_plateau", "lateral_plateau", "medial_condyle_tip", "lateral_condyle_tip",
        "medial_condyle_extent", "lateral_condyle_extent", "pixel_spacing")}, "laterality": "right"})
    img2, lm2 = canonical_view(right_img, right_lm)
    np.testing.assert_array_equal(img2, img)
    for a, b in zip(build_layout(lm), build_layout(lm2)):
        np.testing.assert_array_equal(extract_patch(img, a).pixels, extract_patch(img2, b).pixels)
