"""Kinematics tests: closed-form pose oracles, marker construction
invariants, and the geometry text format.
"""

import math

import numpy as np
import pytest

from proprio.errors import ConfigError, ValidationError
from proprio.kinematics import (COMPONENT_NAMES, ArmGeometry, Configuration, MarkerMount,
                                default_marker_mounts, denormalize, forward_kinematics,
                                geometry_from_text, geometry_to_text, load_geometry,
                                marker_world_corners, save_geometry, validate_configuration)

GEOM = ArmGeometry()


def _fk(a):
    return forward_kinematics(np.asarray(a, dtype=float), GEOM)


# --- configuration validation ----------------------------------------------


def test_component_names():
    assert COMPONENT_NAMES == ("height", "distance", "heading", "wrist_angle",
                               "wrist_rotation", "gripper")


def test_validate_accepts_boundaries():
    validate_configuration(np.zeros(6))
    validate_configuration(np.ones(6))


def test_validate_rejects_wrong_shape():
    with pytest.raises(ValidationError):
        validate_configuration(np.zeros(5))


def test_validate_rejects_out_of_range_and_names_component():
    with pytest.raises(ValidationError, match="heading"):
        validate_configuration([0.5, 0.5, 1.5, 0.5, 0.5, 0.5])


def test_validate_rejects_nan():
    with pytest.raises(ValidationError):
        validate_configuration([0.5, 0.5, np.nan, 0.5, 0.5, 0.5])


def test_configuration_dataclass_round_trip():
    c = Configuration(0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
    np.testing.assert_array_equal(Configuration.from_array(c.as_array()).as_array(), c.as_array())


def test_configuration_dataclass_validates():
    with pytest.raises(ValidationError):
        Configuration(0.1, 0.2, 0.3, 0.4, 0.5, 1.6)


# --- denormalization --------------------------------------------------------


def test_denormalize_endpoints():
    r, z, heading, pitch, roll, jaw = denormalize(np.zeros(6), GEOM)
    assert (r, z, jaw) == (GEOM.r_range[0], GEOM.z_range[0], 0.0)
    assert heading == pytest.approx(-math.pi / 2)
    assert pitch == pytest.approx(-math.pi / 2)
    assert roll == pytest.approx(-math.pi / 2)
    r, z, heading, pitch, roll, jaw = denormalize(np.ones(6), GEOM)
    assert (r, z, jaw) == (GEOM.r_range[1], GEOM.z_range[1], GEOM.jaw_max)
    assert heading == pytest.approx(math.pi / 2)


def test_denormalize_midpoint():
    r, z, heading, pitch, roll, jaw = denormalize(np.full(6, 0.5), GEOM)
    assert r == pytest.approx(0.21)
    assert z == pytest.approx(0.14)
    assert heading == pytest.approx(0.0)
    assert jaw == pytest.approx(0.015)


# --- forward kinematics ----------------------------------------------------


def test_wrist_matches_cylindrical_closed_form():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = rng.uniform(0, 1, 6)
        r, z, heading, _, _, _ = denormalize(a, GEOM)
        want = np.array([r * math.cos(heading), r * math.sin(heading), z])
        np.testing.assert_allclose(_fk(a).wrist, want, atol=1e-12)


def test_wrist_at_center_configuration():
    np.testing.assert_allclose(_fk(np.full(6, 0.5)).wrist, [0.21, 0.0, 0.14], atol=1e-15)


def test_link_lengths_preserved():
    rng = np.random.default_rng(1)
    for _ in range(100):
        pose = _fk(rng.uniform(0, 1, 6))
        assert np.linalg.norm(pose.elbow - pose.shoulder) == pytest.approx(GEOM.l1, abs=1e-9)
        assert np.linalg.norm(pose.wrist - pose.elbow) == pytest.approx(GEOM.l2, abs=1e-9)
        assert np.linalg.norm(pose.gripper_center - pose.wrist) == pytest.approx(GEOM.lw, abs=1e-9)


def test_elbow_up_branch():
    # The elbow stays above the shoulder-to-wrist chord.
    rng = np.random.default_rng(2)
    for _ in range(100):
        pose = _fk(rng.uniform(0, 1, 6))
        t = np.dot(pose.elbow[:2] - pose.shoulder[:2], pose.wrist[:2] - pose.shoulder[:2])
        t /= max(np.dot(pose.wrist[:2] - pose.shoulder[:2], pose.wrist[:2] - pose.shoulder[:2]), 1e-12)
        chord_z = pose.shoulder[2] + t * (pose.wrist[2] - pose.shoulder[2])
        assert pose.elbow[2] > chord_z - 1e-12


def test_zero_heading_keeps_arm_chain_in_xz_plane():
    a = np.array([0.3, 0.7, 0.5, 0.2, 0.5, 0.5])
    pose = _fk(a)
    for p in (pose.shoulder, pose.elbow, pose.wrist):
        assert abs(p[1]) < 1e-12


def test_heading_equivariance():
    # Changing only the heading rotates the whole pose about the base axis.
    rng = np.random.default_rng(3)
    for _ in range(25):
        a = rng.uniform(0, 1, 6)
        b = a.copy()
        b[2] = rng.uniform(0, 1)
        da = denormalize(a, GEOM)
        db = denormalize(b, GEOM)
        ang = db[2] - da[2]
        rz = np.array([[math.cos(ang), -math.sin(ang), 0.0],
                       [math.sin(ang), math.cos(ang), 0.0],
                       [0.0, 0.0, 1.0]])
        pa, pb = _fk(a), _fk(b)
        np.testing.assert_allclose(pb.wrist, rz @ pa.wrist, atol=1e-12)
        np.testing.assert_allclose(pb.jaw_tips, pa.jaw_tips @ rz.T, atol=1e-12)
        for ma, mb in zip(pa.markers, pb.markers):
            np.testing.assert_allclose(mb.corners, ma.corners @ rz.T, atol=1e-12)
            np.testing.assert_allclose(mb.normal, rz @ ma.normal, atol=1e-12)


def test_jaw_tip_separation_equals_opening():
    rng = np.random.default_rng(4)
    for _ in range(100):
        a = rng.uniform(0, 1, 6)
        jaw = denormalize(a, GEOM)[5]
        pose = _fk(a)
        assert np.linalg.norm(pose.jaw_tips[0] - pose.jaw_tips[1]) == pytest.approx(jaw, abs=1e-12)


def test_gripper_center_sits_on_wrist_axis():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = rng.uniform(0, 1, 6)
        pose = _fk(a)
        axis = pose.gripper_center - pose.wrist
        assert np.linalg.norm(axis) == pytest.approx(GEOM.lw, abs=1e-12)


# --- marker construction ---------------------------------------------------


def test_ten_markers_in_id_order():
    pose = _fk(np.full(6, 0.5))
    assert len(pose.markers) == 10
    assert [m.marker_id for m in pose.markers] == list(range(10))


def test_markers_are_exact_squares():
    rng = np.random.default_rng(6)
    for _ in range(25):
        pose = _fk(rng.uniform(0, 1, 6))
        for m, mount in zip(pose.markers, GEOM.mounts):
            c = m.corners
            sides = [np.linalg.norm(c[(i + 1) % 4] - c[i]) for i in range(4)]
            np.testing.assert_allclose(sides, mount.side_len, atol=1e-12)
            diag1 = np.linalg.norm(c[2] - c[0])
            diag2 = np.linalg.norm(c[3] - c[1])
            assert diag1 == pytest.approx(diag2, abs=1e-12)
            assert diag1 == pytest.approx(mount.side_len * math.sqrt(2), abs=1e-12)


def test_marker_corners_are_planar_with_unit_normal():
    rng = np.random.default_rng(7)
    for _ in range(25):
        pose = _fk(rng.uniform(0, 1, 6))
        for m in pose.markers:
            assert np.linalg.norm(m.normal) == pytest.approx(1.0, abs=1e-12)
            center = m.corners.mean(axis=0)
            for corner in m.corners:
                assert abs(np.dot(corner - center, m.normal)) < 1e-12


def test_marker_winding_matches_normal():
    # Cross of the first two edges points along the stored normal.
    pose = _fk(np.array([0.4, 0.6, 0.3, 0.7, 0.2, 0.8]))
    for m in pose.markers:
        c = m.corners
        w = np.cross(c[1] - c[0], c[3] - c[0])
        w /= np.linalg.norm(w)
        np.testing.assert_allclose(w, m.normal, atol=1e-12)


def test_opposite_face_pairs_have_opposed_normals():
    # Upper and forearm markers mirror across the link; their normals
    # must point away from each other.
    rng = np.random.default_rng(8)
    pairs = [(0, 5), (1, 6), (2, 7), (3, 8)]
    for _ in range(25):
        pose = _fk(rng.uniform(0, 1, 6))
        for i, j in pairs:
            assert np.dot(pose.markers[i].normal, pose.markers[j].normal) < 0.0


def test_collar_marker_separation_tracks_jaw():
    # Centers sit at +/-(lateral + jaw/2) on counter-rotated collar axes, so
    # their distance is 2 (lateral + jaw/2) cos(swing).
    rng = np.random.default_rng(9)
    mount = GEOM.mounts[4]
    for _ in range(50):
        a = rng.uniform(0, 1, 6)
        jaw = denormalize(a, GEOM)[5]
        swing = math.radians(GEOM.jaw_swing_deg) * (jaw / GEOM.jaw_max)
        want = 2.0 * (mount.lateral + 0.5 * jaw) * math.cos(swing)
        pose = _fk(a)
        c_left = pose.markers[4].corners.mean(axis=0)
        c_right = pose.markers[9].corners.mean(axis=0)
        assert np.linalg.norm(c_left - c_right) == pytest.approx(want, abs=1e-12)


def test_marker_world_corners_order():
    pose = _fk(np.full(6, 0.5))
    out = marker_world_corners(pose)
    assert len(out) == 10
    for (corners, normal), m in zip(out, pose.markers):
        np.testing.assert_array_equal(corners, m.corners)
        np.testing.assert_array_equal(normal, m.normal)


def test_every_configuration_is_reachable():
    rng = np.random.default_rng(10)
    for _ in range(5000):
        pose = _fk(rng.uniform(0, 1, 6))
        assert np.all(np.isfinite(pose.wrist))


# --- geometry validation and text format -----------------------------------


def test_geometry_requires_ten_mounts():
    with pytest.raises(ConfigError, match="10"):
        ArmGeometry(mounts=default_marker_mounts()[:8])


def test_geometry_requires_ordered_ids():
    mounts = list(default_marker_mounts())
    mounts[0], mounts[1] = mounts[1], mounts[0]
    with pytest.raises(ConfigError, match="order"):
        ArmGeometry(mounts=tuple(mounts))


def test_geometry_rejects_unreachable_workspace():
    with pytest.raises(ConfigError, match="annulus"):
        ArmGeometry(r_range=(0.01, 0.40))


def test_mount_validation():
    with pytest.raises(ConfigError, match="parent"):
        MarkerMount(0, "hand", 0.5, 0.01, 1, 0.0, 0.02)
    with pytest.raises(ConfigError, match="side"):
        MarkerMount(0, "upper", 0.5, 0.01, 2, 0.0, 0.02)
    with pytest.raises(ConfigError, match="side_len"):
        MarkerMount(0, "upper", 0.5, 0.01, 1, 0.0, 0.0)


def test_geometry_text_round_trip():
    geom = ArmGeometry()
    again = geometry_from_text(geometry_to_text(geom))
    assert again == geom


def test_geometry_file_round_trip(tmp_path):
    path = tmp_path / "geometry.txt"
    save_geometry(path, GEOM)
    assert load_geometry(path) == GEOM


def test_geometry_text_rejects_unknown_key():
    with pytest.raises(ConfigError, match="unknown key"):
        geometry_from_text("l1 = 0.146\nwingspan = 2.0\n")


def test_geometry_text_rejects_short_marker_line():
    with pytest.raises(ConfigError, match="7 fields"):
        geometry_from_text("marker = 0 upper 0.5\n")


def test_geometry_text_ignores_comments_and_blanks():
    text = geometry_to_text(GEOM) + "\n# trailing comment\n\n"
    assert geometry_from_text(text) == GEOM
