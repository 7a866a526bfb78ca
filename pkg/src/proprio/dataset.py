"""Trajectory generation, rendering, and the four-way split protocol.

Configurations follow smooth random trajectories: uniform waypoints every
K frames joined by a Catmull-Rom spline, clamped to [0,1]. Frames are
rendered to 64x64 grayscale observations plus simulated marker
detections. The four splits (unsupervised, finetune, regression, test)
never share a trajectory id, so no information leaks between training
stages; the test split keeps its original frame order while training
splits are flagged for shuffling.

On disk a dataset is a directory: ``manifest.txt``, ``geometry.txt``,
and per split ``<name>/frames.csv`` plus ``<name>/img_<traj>_<frame>.pgm``
images. Loading re-validates every invariant and checksum.
"""

import csv
import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .kinematics import (ArmGeometry, forward_kinematics, geometry_from_text,
                         geometry_to_text, validate_configuration)
from .scene import (CameraModel, MarkerDetection, NoiseModel, camera_preset,
                    detect_markers, make_background, rasterize)

SPLIT_NAMES = ("unsupervised", "finetune", "regression", "test")
SHUFFLE_ON_LOAD = {"unsupervised": True, "finetune": True, "regression": True, "test": False}
DEFAULT_SIZES = {name: 1000 for name in SPLIT_NAMES}


def _spline_point(w, seg, u):
    """Catmull-Rom with tangents (w[i+1]-w[i-1])/2 on segment seg at u."""
    p0, p1, p2, p3 = w[seg], w[seg + 1], w[seg + 2], w[seg + 3]
    m1 = 0.5 * (p2 - p0)
    m2 = 0.5 * (p3 - p1)
    u2 = u * u
    u3 = u2 * u
    h00 = 2 * u3 - 3 * u2 + 1
    h10 = u3 - 2 * u2 + u
    h01 = -2 * u3 + 3 * u2
    h11 = u3 - u2
    return h00 * p1 + h10 * m1 + h01 * p2 + h11 * m2


def generate_trajectory(length, waypoint_interval, rng):
    """Smooth random configuration sequence of the given frame count.

    Waypoints are uniform in [0,1]^6 every ``waypoint_interval`` frames;
    the spline interpolates them and is clamped to [0,1]. The per-frame
    step never exceeds 2 / waypoint_interval per component.
    """
    if length < 2:
        raise ValidationError(f"trajectory length must be >= 2, got {length}")
    if waypoint_interval < 2:
        raise ValidationError(f"waypoint interval must be >= 2, got {waypoint_interval}")
    n_seg = (length - 1) // waypoint_interval + 1
    w = rng.uniform(0.0, 1.0, (n_seg + 3, 6))
    out = np.empty((length, 6))
    for t in range(length):
        seg, rem = divmod(t, waypoint_interval)
        out[t] = _spline_point(w, seg, rem / waypoint_interval)
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class Frame:
    traj_id: int
    frame_idx: int
    config: np.ndarray  # (6,)
    detections: tuple  # 10 MarkerDetections
    image_name: str
    image: np.ndarray  # (H, W) uint8

    @property
    def image_float(self):
        return self.image.astype(np.float64) / 255.0


@dataclass
class SplitSet:
    """Four disjoint splits plus everything needed to regenerate them."""

    splits: dict
    seed: int
    geometry: ArmGeometry
    camera: CameraModel
    noise: NoiseModel
    traj_len: int
    waypoint_interval: int
    camera_name: str = ""

    def traj_ids(self, name):
        return sorted({f.traj_id for f in self.splits[name]})

    def configurations(self, name):
        return np.stack([f.config for f in self.splits[name]])

    def images_float(self, name):
        return np.stack([f.image_float for f in self.splits[name]])


def frame_rng(seed, traj_id, frame_idx):
    """Detection noise stream for one frame; independent per frame."""
    return np.random.default_rng([seed, traj_id, frame_idx])


def validate_disjoint(splits):
    names = list(splits)
    for i, a in enumerate(names):
        ids_a = {f.traj_id for f in splits[a]}
        for b in names[i + 1:]:
            clash = ids_a & {f.traj_id for f in splits[b]}
            if clash:
                raise ValidationError(
                    f"splits {a!r} and {b!r} share trajectories {sorted(clash)}")


def build_datasets(geom=None, camera=None, noise=None, sizes=None, seed=0,
                   traj_len=200, waypoint_interval=25, camera_name=""):
    """Generate the four-way split set, rendered and ready to save.

    Trajectory ids are assigned globally, so the splits are disjoint by
    construction; the invariant is still re-checked before returning.
    """
    geom = geom or ArmGeometry()
    if camera is None:
        camera_name = camera_name or "side"
        camera = camera_preset(camera_name)
    noise = noise or NoiseModel()
    sizes = dict(DEFAULT_SIZES, **(sizes or {}))
    unknown = set(sizes) - set(SPLIT_NAMES)
    if unknown:
        raise ValidationError(f"unknown split names {sorted(unknown)}")
    for name, size in sizes.items():
        if size < 1:
            raise ValidationError(f"split {name!r} size must be >= 1, got {size}")
    background = make_background(camera.width, camera.height, seed=seed)
    splits = {}
    next_traj = 0
    for name in SPLIT_NAMES:
        frames = []
        while len(frames) < sizes[name]:
            traj_id = next_traj
            next_traj += 1
            configs = generate_trajectory(traj_len, waypoint_interval,
                                          np.random.default_rng([seed, traj_id]))
            for frame_idx in range(min(traj_len, sizes[name] - len(frames))):
                a = configs[frame_idx]
                pose = forward_kinematics(a, geom)
                dets = tuple(detect_markers(pose, camera, noise,
                                            frame_rng(seed, traj_id, frame_idx)))
                img = rasterize(pose, camera, background)
                frames.append(Frame(traj_id, frame_idx, a, dets,
                                    f"img_{traj_id}_{frame_idx}.pgm",
                                    np.round(img * 255.0).astype(np.uint8)))
        splits[name] = frames
    validate_disjoint(splits)
    return SplitSet(splits, int(seed), geom, camera, noise, traj_len,
                    waypoint_interval, camera_name)


# --- persistence -------------------------------------------------------------

_CSV_HEADER = (["traj_id", "frame_idx"]
               + [f"a{i}" for i in range(1, 7)]
               + [f"m{m}_{c}" for m in range(10)
                  for c in ("x1", "y1", "x2", "y2", "x3", "y3", "x4", "y4", "vis")]
               + ["image", "sha256"])


def _pgm_bytes(image_u8):
    h, w = image_u8.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + image_u8.tobytes()


def _camera_lines(camera):
    r = camera.rotation.reshape(-1)
    return [
        "camera_position = " + " ".join(f"{v:.17g}" for v in camera.position),
        "camera_rotation = " + " ".join(f"{v:.17g}" for v in r),
        f"camera_focal = {camera.focal:.17g}",
        f"camera_cx = {camera.cx:.17g}",
        f"camera_cy = {camera.cy:.17g}",
        f"camera_width = {camera.width}",
        f"camera_height = {camera.height}",
    ]


def save_split(split_set, path):
    """Write manifest, geometry, per-split CSVs, and PGM images."""
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "geometry.txt"), "w") as fh:
        fh.write(geometry_to_text(split_set.geometry))
    lines = [
        "# proprio dataset manifest",
        "format = 1",
        f"seed = {split_set.seed}",
        f"camera_name = {split_set.camera_name or '-'}",
        *_camera_lines(split_set.camera),
        f"noise_sigma_px = {split_set.noise.sigma_px:.17g}",
        f"noise_dropout = {split_set.noise.dropout:.17g}",
        f"noise_facing_min = {split_set.noise.facing_min:.17g}",
        f"traj_len = {split_set.traj_len}",
        f"waypoint_interval = {split_set.waypoint_interval}",
        "# frames.csv columns: " + ",".join(_CSV_HEADER),
        "# detection coords are normalized to [0,1]; invisible markers are all-zero",
        "# split = name size shuffle_on_load",
    ]
    for name in SPLIT_NAMES:
        frames = split_set.splits[name]
        lines.append(f"split = {name} {len(frames)} {int(SHUFFLE_ON_LOAD[name])}")
    with open(os.path.join(path, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    for name in SPLIT_NAMES:
        split_dir = os.path.join(path, name)
        os.makedirs(split_dir, exist_ok=True)
        with open(os.path.join(split_dir, "frames.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_HEADER)
            for f in split_set.splits[name]:
                blob = _pgm_bytes(f.image)
                with open(os.path.join(split_dir, f.image_name), "wb") as imgfh:
                    imgfh.write(blob)
                row = [f.traj_id, f.frame_idx]
                row += [f"{v:.17g}" for v in f.config]
                for det in f.detections:
                    row += [f"{v:.17g}" for v in det.coords] + [det.visible]
                row += [f.image_name, hashlib.sha256(blob).hexdigest()]
                writer.writerow(row)


def _parse_manifest(path):
    fields = {}
    splits = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "split":
                name, size, shuffle = value.split()
                splits.append((name, int(size), bool(int(shuffle))))
            else:
                fields[key] = value
    return fields, splits


def load_split(path):
    """Load a dataset directory, re-validating every stored invariant."""
    manifest_path = os.path.join(path, "manifest.txt")
    if not os.path.exists(manifest_path):
        raise ValidationError(f"{manifest_path}: missing manifest")
    fields, split_rows = _parse_manifest(manifest_path)
    if fields.get("format") != "1":
        raise ValidationError(f"{manifest_path}: unsupported format {fields.get('format')!r}")
    with open(os.path.join(path, "geometry.txt")) as fh:
        geom = geometry_from_text(fh.read())
    camera = CameraModel(
        np.array([float(v) for v in fields["camera_position"].split()]),
        np.array([float(v) for v in fields["camera_rotation"].split()]).reshape(3, 3),
        float(fields["camera_focal"]), float(fields["camera_cx"]),
        float(fields["camera_cy"]), int(fields["camera_width"]),
        int(fields["camera_height"]))
    noise = NoiseModel(float(fields["noise_sigma_px"]), float(fields["noise_dropout"]),
                       float(fields["noise_facing_min"]))
    names = [row[0] for row in split_rows]
    if sorted(names) != sorted(SPLIT_NAMES):
        raise ValidationError(f"manifest splits {names} != expected {list(SPLIT_NAMES)}")
    splits = {}
    for name, size, _shuffle in split_rows:
        splits[name] = _load_split_dir(os.path.join(path, name), name, size)
    validate_disjoint(splits)
    test = splits["test"]
    keys = [(f.traj_id, f.frame_idx) for f in test]
    if keys != sorted(keys):
        raise ValidationError("test split frames are not in (traj_id, frame_idx) order")
    return SplitSet(splits, int(fields["seed"]), geom, camera, noise,
                    int(fields["traj_len"]), int(fields["waypoint_interval"]),
                    "" if fields.get("camera_name", "-") == "-" else fields["camera_name"])


def _load_split_dir(split_dir, name, expected_size):
    csv_path = os.path.join(split_dir, "frames.csv")
    if not os.path.exists(csv_path):
        raise ValidationError(f"{csv_path}: missing frames table")
    frames = []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _CSV_HEADER:
            raise ValidationError(f"{csv_path}: unexpected column layout")
        for row in reader:
            if len(row) != len(_CSV_HEADER):
                raise ValidationError(f"{csv_path}: row with {len(row)} fields")
            traj_id, frame_idx = int(row[0]), int(row[1])
            ident = f"{name} frame (traj {traj_id}, idx {frame_idx})"
            try:
                config = validate_configuration([float(v) for v in row[2:8]])
            except ValidationError as exc:
                raise ValidationError(f"{ident}: {exc}") from exc
            dets = []
            for m in range(10):
                vals = [float(v) for v in row[8 + 9 * m:8 + 9 * m + 9]]
                coords, vis = np.array(vals[:8]), int(vals[8])
                if vis not in (0, 1):
                    raise ValidationError(f"{ident}: marker {m} visibility flag {vals[8]}")
                if vis == 0 and coords.any():
                    raise ValidationError(f"{ident}: invisible marker {m} has nonzero coords")
                if vis == 1 and (coords.min() < 0.0 or coords.max() > 1.0):
                    raise ValidationError(f"{ident}: marker {m} coords outside [0,1]")
                dets.append(MarkerDetection(m, vis, coords))
            image_name, digest = row[-2], row[-1]
            img_path = os.path.join(split_dir, image_name)
            if not os.path.exists(img_path):
                raise ValidationError(f"{ident}: missing image file {img_path}")
            with open(img_path, "rb") as imgfh:
                blob = imgfh.read()
            if hashlib.sha256(blob).hexdigest() != digest:
                raise ValidationError(f"{ident}: checksum mismatch for {img_path}")
            image = _decode_pgm(blob, img_path)
            frames.append(Frame(traj_id, frame_idx, config, tuple(dets), image_name, image))
    if len(frames) != expected_size:
        raise ValidationError(f"{csv_path}: {len(frames)} frames, manifest says {expected_size}")
    return frames


def _decode_pgm(blob, origin):
    parts = blob.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5" or parts[2] != b"255":
        raise ValidationError(f"{origin}: not a P5 maxval-255 PGM")
    w, h = (int(v) for v in parts[1].split())
    if len(parts[3]) != w * h:
        raise ValidationError(f"{origin}: PGM payload truncated")
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def verify_detections(split_set, max_frames_per_split=50):
    """Recompute detections from stored configurations; raise on drift."""
    for name in SPLIT_NAMES:
        for f in split_set.splits[name][:max_frames_per_split]:
            pose = forward_kinematics(f.config, split_set.geometry)
            fresh = detect_markers(pose, split_set.camera, split_set.noise,
                                   frame_rng(split_set.seed, f.traj_id, f.frame_idx))
            # %.17g text round-trips float64 exactly, so equality is exact.
            for got, want in zip(f.detections, fresh):
                if got.visible != want.visible or not np.array_equal(got.coords, want.coords):
                    raise ValidationError(
                        f"{name} frame (traj {f.traj_id}, idx {f.frame_idx}): stored "
                        f"detection for marker {got.marker_id} does not match regeneration")
