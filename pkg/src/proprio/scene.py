"""Pinhole camera, simulated fiducial detection, and arm rasterization.

Cameras follow the usual computer-vision convention: +z looks forward,
+x right, +y down in the camera frame, pixel (0, 0) at the top left.
Marker detection is simulated from geometry: a marker is visible when it
faces the camera, projects fully inside the image, and survives a
per-frame dropout draw. Rasterization draws the arm as thick
anti-aliased segments over a caller-supplied background so learned
encoders have something to look at.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ValidationError

NEAR_PLANE = 1e-6

_Z = np.array([0.0, 0.0, 1.0])


def _look_at_rotation(position, target, up=_Z):
    forward = np.asarray(target, dtype=np.float64) - np.asarray(position, dtype=np.float64)
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ConfigError("camera position and target coincide")
    forward = forward / norm
    right = np.cross(forward, up)
    rnorm = np.linalg.norm(right)
    if rnorm < 1e-12:
        raise ConfigError("camera view direction is parallel to the up vector")
    right = right / rnorm
    down = np.cross(forward, right)
    return np.stack([right, down, forward])


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera with a world pose and pixel intrinsics."""

    position: np.ndarray
    rotation: np.ndarray  # (3, 3) world-to-camera
    focal: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.focal <= 0:
            raise ConfigError(f"focal length must be positive, got {self.focal}")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise ConfigError("principal point outside image bounds")

    @classmethod
    def look_at(cls, position, target, focal, width, height, cx=None, cy=None):
        position = np.asarray(position, dtype=np.float64)
        rotation = _look_at_rotation(position, target)
        return cls(position, rotation,
                   float(focal),
                   width / 2.0 if cx is None else float(cx),
                   height / 2.0 if cy is None else float(cy),
                   int(width), int(height))

    def to_camera(self, points):
        """World points (..., 3) into the camera frame."""
        pts = np.asarray(points, dtype=np.float64)
        return (pts - self.position) @ self.rotation.T


def project(camera, point):
    """Project one world point; None when at or behind the near plane."""
    x, y, z = camera.to_camera(point)
    if z <= NEAR_PLANE:
        return None
    return np.array([camera.cx + camera.focal * x / z,
                     camera.cy + camera.focal * y / z])


_PRESET_TARGET = np.array([0.19, 0.0, 0.13])
_PRESET_FOCAL = 72.0
_PRESET_SIZE = 64
# name -> (elevation deg above horizontal, distance m). The front camera
# sits closer, so wide sweeps often carry markers out of its frame.
_PRESETS = {"side": (60.0, 0.85), "front": (45.0, 0.50)}


def camera_preset(name):
    """Fixed benchmark viewpoints: "side" (60 deg down) and "front" (45 deg down)."""
    if name not in _PRESETS:
        raise ConfigError(f"unknown camera preset {name!r}; expected one of {sorted(_PRESETS)}")
    elev_deg, distance = _PRESETS[name]
    elev = math.radians(elev_deg)
    if name == "side":
        offset = np.array([0.0, -math.cos(elev), math.sin(elev)])
    else:
        offset = np.array([math.cos(elev), 0.0, math.sin(elev)])
    position = _PRESET_TARGET + distance * offset
    return CameraModel.look_at(position, _PRESET_TARGET, _PRESET_FOCAL,
                               _PRESET_SIZE, _PRESET_SIZE)


@dataclass(frozen=True)
class NoiseModel:
    """Detection corruption: corner jitter, dropout, and a facing cutoff."""

    sigma_px: float = 0.5
    dropout: float = 0.1
    facing_min: float = 0.26

    def __post_init__(self):
        if self.sigma_px < 0:
            raise ConfigError(f"sigma_px must be >= 0, got {self.sigma_px}")
        if not 0.0 <= self.dropout <= 1.0:
            raise ConfigError(f"dropout must be in [0,1], got {self.dropout}")


@dataclass(frozen=True)
class MarkerDetection:
    """One simulated detection: id, 0/1 flag, 8 normalized coordinates.

    ``coords`` interleaves (x, y) for the 4 corners in winding order; all
    zeros when invisible, each value in [0,1] when visible.
    """

    marker_id: int
    visible: int
    coords: np.ndarray


def detect_markers(pose, camera, noise, rng):
    """Simulate fiducial detection for all 10 markers of a pose.

    Visibility needs, in order: the marker normal facing the camera above
    ``noise.facing_min``, all four corners projecting inside the image,
    and a Bernoulli(1 - dropout) survival draw. The RNG is consumed in
    marker-id order, and only for geometrically visible markers: one
    uniform for dropout, then (if it survives) 8 Gaussian corner offsets.
    Noisy corners are clamped to image bounds and normalized by
    width/height.
    """
    detections = []
    zeros = np.zeros(8)
    for m in pose.markers:
        center = m.corners.mean(axis=0)
        to_cam = camera.position - center
        to_cam = to_cam / np.linalg.norm(to_cam)
        geo_visible = float(np.dot(m.normal, to_cam)) > noise.facing_min
        px = None
        if geo_visible:
            px = [project(camera, c) for c in m.corners]
            geo_visible = all(
                p is not None
                and 0.0 <= p[0] <= camera.width
                and 0.0 <= p[1] <= camera.height
                for p in px
            )
        if geo_visible and rng.uniform() >= noise.dropout:
            # 8 standard normals are always drawn so the stream layout does
            # not depend on sigma.
            flat = np.concatenate(px) + noise.sigma_px * rng.normal(0.0, 1.0, 8)
            flat[0::2] = np.clip(flat[0::2], 0.0, camera.width) / camera.width
            flat[1::2] = np.clip(flat[1::2], 0.0, camera.height) / camera.height
            detections.append(MarkerDetection(m.marker_id, 1, flat))
        else:
            detections.append(MarkerDetection(m.marker_id, 0, zeros.copy()))
    return detections


# --- rasterization ---------------------------------------------------------


def _pose_segments(pose):
    """World-space (a, b, radius, intensity) tuples for the drawable arm."""
    tip_center = pose.gripper_center
    wrist_dir = tip_center - pose.wrist
    segs = [
        (pose.shoulder, pose.elbow, 0.020, 0.9),
        (pose.elbow, pose.wrist, 0.016, 0.7),
        (pose.wrist, tip_center, 0.012, 0.5),
    ]
    for tip in pose.jaw_tips:
        segs.append((tip - wrist_dir, tip, 0.005, 1.0))
    return segs


def validate_image(image, camera=None):
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValidationError(f"image must be 2-D, got shape {img.shape}")
    if camera is not None and img.shape != (camera.height, camera.width):
        raise ValidationError(
            f"image shape {img.shape} does not match camera {(camera.height, camera.width)}"
        )
    if img.size and (img.min() < 0.0 or img.max() > 1.0):
        raise ValidationError("image intensities must lie in [0,1]")
    return img.astype(np.float64, copy=False)


def rasterize(pose, camera, background):
    """Draw the arm over ``background`` as anti-aliased thick segments.

    Links use distinct intensities (upper 0.9, forearm 0.7, wrist 0.5,
    jaws 1.0) and are painted far to near by mean segment depth, so
    closer links occlude farther ones. Fully behind-camera poses leave
    the background untouched. Deterministic for fixed inputs.
    """
    img = validate_image(background, camera).copy()
    drawable = []
    for a, b, radius, intensity in _pose_segments(pose):
        za = float(camera.to_camera(a)[2])
        zb = float(camera.to_camera(b)[2])
        if za <= NEAR_PLANE or zb <= NEAR_PLANE:
            continue
        drawable.append((0.5 * (za + zb), project(camera, a), project(camera, b),
                         za, zb, radius, intensity))
    ys, xs = np.mgrid[0:camera.height, 0:camera.width]
    for _, pa, pb, za, zb, radius, intensity in sorted(drawable, key=lambda s: -s[0]):
        d = pb - pa
        len2 = float(d @ d)
        hw_max = camera.focal * radius / min(za, zb)
        x0 = max(0, int(math.floor(min(pa[0], pb[0]) - hw_max - 1)))
        x1 = min(camera.width, int(math.ceil(max(pa[0], pb[0]) + hw_max + 2)))
        y0 = max(0, int(math.floor(min(pa[1], pb[1]) - hw_max - 1)))
        y1 = min(camera.height, int(math.ceil(max(pa[1], pb[1]) + hw_max + 2)))
        if x0 >= x1 or y0 >= y1:
            continue
        px = xs[y0:y1, x0:x1]
        py = ys[y0:y1, x0:x1]
        if len2 < 1e-12:
            t = np.zeros_like(px, dtype=np.float64)
        else:
            t = np.clip(((px - pa[0]) * d[0] + (py - pa[1]) * d[1]) / len2, 0.0, 1.0)
        dist = np.hypot(px - (pa[0] + t * d[0]), py - (pa[1] + t * d[1]))
        depth = za + t * (zb - za)
        halfwidth = camera.focal * radius / depth
        cover = np.clip(halfwidth + 0.5 - dist, 0.0, 1.0)
        patch = img[y0:y1, x0:x1]
        img[y0:y1, x0:x1] = patch * (1.0 - cover) + intensity * cover
    return img


def make_background(width, height, seed=0):
    """Deterministic gradient-plus-grid backdrop with mild seeded speckle."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    img = 0.25 + 0.25 * ys / max(height - 1, 1) + 0.05 * xs / max(width - 1, 1)
    grid = (xs.astype(int) % 8 == 0) | (ys.astype(int) % 8 == 0)
    img = img + 0.08 * grid
    img = img + np.random.default_rng(seed).uniform(-0.02, 0.02, (height, width))
    return np.clip(img, 0.0, 1.0)


# --- PGM I/O ---------------------------------------------------------------


def save_pgm(path, image):
    """Write a [0,1] grayscale image as binary PGM (P5, maxval 255)."""
    img = validate_image(image)
    data = np.round(img * 255.0).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def load_pgm(path):
    """Read a binary PGM written by :func:`save_pgm` back to [0,1] floats."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P5"):
        raise ValidationError(f"{path}: not a binary PGM (P5) file")
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValidationError(f"{path}: truncated PGM header")
        tokens.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValidationError(f"{path}: unsupported PGM maxval {maxval}")
    raw = blob[pos:pos + w * h]
    if len(raw) != w * h:
        raise ValidationError(f"{path}: PGM payload truncated")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w).astype(np.float64) / 255.0
