"""Dataset tests: trajectory smoothness and coverage, four-way split
protocol, and the on-disk format with its validation rules.
"""

import csv
import dataclasses
import os

import numpy as np
import pytest

from proprio.dataset import (SPLIT_NAMES, build_datasets, frame_rng, generate_trajectory,
                             load_split, save_split, validate_disjoint, verify_detections)
from proprio.errors import ValidationError
from proprio.scene import NoiseModel

SMALL = {"unsupervised": 5, "finetune": 5, "regression": 8, "test": 6}


def _small_set(seed=0, noise=None):
    return build_datasets(noise=noise or NoiseModel(0.5, 0.2), sizes=SMALL,
                          seed=seed, traj_len=4, waypoint_interval=2, camera_name="side")


# --- trajectories -------------------------------------------------------------


def test_trajectory_step_bound():
    for i in range(100):
        t = generate_trajectory(200, 25, np.random.default_rng(i))
        steps = np.abs(np.diff(t, axis=0))
        assert steps.max() <= 2.0 / 25


def test_trajectory_stays_in_unit_box():
    t = generate_trajectory(500, 10, np.random.default_rng(0))
    assert t.min() >= 0.0 and t.max() <= 1.0


def test_trajectory_covers_configuration_space():
    chunks = [generate_trajectory(200, 25, np.random.default_rng([7, i])) for i in range(500)]
    samples = np.concatenate(chunks)
    assert samples.shape[0] == 100_000
    assert np.all(samples.min(axis=0) < 0.05)
    assert np.all(samples.max(axis=0) > 0.95)


def test_trajectory_deterministic():
    a = generate_trajectory(50, 5, np.random.default_rng(3))
    b = generate_trajectory(50, 5, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)


def test_trajectory_validation():
    with pytest.raises(ValidationError):
        generate_trajectory(1, 5, np.random.default_rng(0))
    with pytest.raises(ValidationError):
        generate_trajectory(10, 1, np.random.default_rng(0))


# --- split building ------------------------------------------------------------


def test_build_datasets_sizes_and_disjointness():
    data = _small_set()
    assert set(data.splits) == set(SPLIT_NAMES)
    for name, size in SMALL.items():
        assert len(data.splits[name]) == size
    ids = [set(data.traj_ids(name)) for name in SPLIT_NAMES]
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            assert not (ids[i] & ids[j])


def test_build_datasets_test_split_ordered():
    data = _small_set()
    keys = [(f.traj_id, f.frame_idx) for f in data.splits["test"]]
    assert keys == sorted(keys)


def test_build_datasets_frame_contents():
    data = _small_set()
    f = data.splits["regression"][0]
    assert f.image.dtype == np.uint8
    assert f.image.shape == (64, 64)
    assert len(f.detections) == 10
    assert f.image_name == f"img_{f.traj_id}_{f.frame_idx}.pgm"
    assert f.config.shape == (6,)
    assert data.configurations("regression").shape == (8, 6)
    assert data.images_float("test").shape == (6, 64, 64)


def test_build_datasets_truncates_last_trajectory():
    data = _small_set()
    reg = data.splits["regression"]  # 8 frames over trajectories of 4
    assert [f.frame_idx for f in reg] == [0, 1, 2, 3, 0, 1, 2, 3]
    assert len({f.traj_id for f in reg}) == 2


def test_build_datasets_deterministic():
    a = _small_set(seed=9)
    b = _small_set(seed=9)
    c = _small_set(seed=10)
    for name in SPLIT_NAMES:
        for fa, fb in zip(a.splits[name], b.splits[name]):
            np.testing.assert_array_equal(fa.config, fb.config)
            np.testing.assert_array_equal(fa.image, fb.image)
            for da, db in zip(fa.detections, fb.detections):
                assert da.visible == db.visible
                np.testing.assert_array_equal(da.coords, db.coords)
    assert not np.array_equal(a.splits["test"][0].config, c.splits["test"][0].config)


def test_build_datasets_validation():
    with pytest.raises(ValidationError, match="unknown split"):
        build_datasets(sizes={"training": 10})
    with pytest.raises(ValidationError, match="size"):
        build_datasets(sizes={"test": 0})


def test_validate_disjoint_catches_overlap():
    data = _small_set()
    splits = dict(data.splits)
    splits["finetune"] = splits["regression"]
    with pytest.raises(ValidationError, match="share trajectories"):
        validate_disjoint(splits)


def test_frame_rng_streams_are_distinct():
    a = frame_rng(0, 1, 2).uniform(size=4)
    b = frame_rng(0, 1, 3).uniform(size=4)
    c = frame_rng(0, 1, 2).uniform(size=4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, c)


# --- persistence ----------------------------------------------------------------


def test_save_load_round_trip(tmp_path):
    data = _small_set(seed=4)
    save_split(data, tmp_path / "ds")
    loaded = load_split(tmp_path / "ds")
    assert loaded.seed == data.seed
    assert loaded.traj_len == data.traj_len
    assert loaded.waypoint_interval == data.waypoint_interval
    assert loaded.camera_name == "side"
    assert loaded.noise == data.noise
    assert loaded.geometry == data.geometry
    np.testing.assert_allclose(loaded.camera.position, data.camera.position, atol=0)
    for name in SPLIT_NAMES:
        assert len(loaded.splits[name]) == len(data.splits[name])
        for fa, fb in zip(data.splits[name], loaded.splits[name]):
            assert (fa.traj_id, fa.frame_idx) == (fb.traj_id, fb.frame_idx)
            np.testing.assert_array_equal(fa.config, fb.config)
            np.testing.assert_array_equal(fa.image, fb.image)
            for da, db in zip(fa.detections, fb.detections):
                assert da.visible == db.visible
                np.testing.assert_array_equal(da.coords, db.coords)
    verify_detections(loaded)


def test_load_missing_manifest(tmp_path):
    with pytest.raises(ValidationError, match="manifest"):
        load_split(tmp_path / "nowhere")


def test_load_missing_image_names_file(tmp_path):
    data = _small_set()
    save_split(data, tmp_path / "ds")
    victim = data.splits["finetune"][2]
    os.remove(tmp_path / "ds" / "finetune" / victim.image_name)
    with pytest.raises(ValidationError, match=victim.image_name):
        load_split(tmp_path / "ds")


def test_load_detects_checksum_mismatch(tmp_path):
    data = _small_set()
    save_split(data, tmp_path / "ds")
    victim = data.splits["test"][0]
    img_path = tmp_path / "ds" / "test" / victim.image_name
    blob = bytearray(img_path.read_bytes())
    blob[-1] ^= 0xFF
    img_path.write_bytes(bytes(blob))
    with pytest.raises(ValidationError, match="checksum"):
        load_split(tmp_path / "ds")


def _edit_csv(path, row_idx, col_idx, value):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows[row_idx][col_idx] = value
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def test_load_rejects_out_of_range_detection(tmp_path):
    data = _small_set()
    save_split(data, tmp_path / "ds")
    csv_path = tmp_path / "ds" / "regression" / "frames.csv"
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    # find a visible marker and push one coordinate out of range
    target = None
    for r in range(1, len(rows)):
        for m in range(10):
            if rows[r][8 + 9 * m + 8] == "1":
                target = (r, 8 + 9 * m)
                break
        if target:
            break
    assert target, "expected at least one visible marker"
    _edit_csv(csv_path, target[0], target[1], "1.5")
    with pytest.raises(ValidationError, match="outside"):
        load_split(tmp_path / "ds")


def test_load_rejects_invisible_with_coords(tmp_path):
    data = _small_set()
    save_split(data, tmp_path / "ds")
    csv_path = tmp_path / "ds" / "regression" / "frames.csv"
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    target = None
    for r in range(1, len(rows)):
        for m in range(10):
            if rows[r][8 + 9 * m + 8] == "0":
                target = (r, 8 + 9 * m)
                break
        if target:
            break
    assert target, "expected at least one invisible marker"
    _edit_csv(csv_path, target[0], target[1], "0.5")
    with pytest.raises(ValidationError, match="invisible"):
        load_split(tmp_path / "ds")


def test_load_rejects_bad_config_naming_frame(tmp_path):
    data = _small_set()
    save_split(data, tmp_path / "ds")
    _edit_csv(tmp_path / "ds" / "unsupervised" / "frames.csv", 1, 2, "2.5")
    with pytest.raises(ValidationError, match="unsupervised frame"):
        load_split(tmp_path / "ds")


def test_load_rejects_unordered_test_split(tmp_path):
    data = _small_set()
    save_split(data, tmp_path / "ds")
    csv_path = tmp_path / "ds" / "test" / "frames.csv"
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows[1], rows[2] = rows[2], rows[1]
    with open(csv_path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    with pytest.raises(ValidationError, match="order"):
        load_split(tmp_path / "ds")


def test_load_rejects_header_tampering(tmp_path):
    data = _small_set()
    save_split(data, tmp_path / "ds")
    _edit_csv(tmp_path / "ds" / "finetune" / "frames.csv", 0, 0, "trajectory")
    with pytest.raises(ValidationError, match="column layout"):
        load_split(tmp_path / "ds")


def test_load_rejects_size_mismatch(tmp_path):
    data = _small_set()
    save_split(data, tmp_path / "ds")
    csv_path = tmp_path / "ds" / "unsupervised" / "frames.csv"
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    with open(csv_path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows[:-1])
    with pytest.raises(ValidationError, match="manifest says"):
        load_split(tmp_path / "ds")


def test_load_rejects_unknown_format(tmp_path):
    data = _small_set()
    save_split(data, tmp_path / "ds")
    manifest = tmp_path / "ds" / "manifest.txt"
    manifest.write_text(manifest.read_text().replace("format = 1", "format = 2"))
    with pytest.raises(ValidationError, match="format"):
        load_split(tmp_path / "ds")


def test_verify_detections_catches_drift():
    data = _small_set()
    frames = list(data.splits["test"])
    det = frames[0].detections[0]
    coords = det.coords.copy()
    coords[0] = min(1.0, coords[0] + 0.25) if det.visible else coords[0]
    # force a visible marker so the tampering is observable
    tampered = dataclasses.replace(
        frames[0],
        detections=(dataclasses.replace(det, visible=1, coords=np.full(8, 0.5)),)
        + frames[0].detections[1:])
    frames[0] = tampered
    data.splits["test"] = frames
    with pytest.raises(ValidationError, match="does not match regeneration"):
        verify_detections(data)
