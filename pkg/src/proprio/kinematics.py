"""6-DoF configuration space and a synthetic tabletop arm.

The configuration vector has six components, each normalized to [0, 1]:
gripper height, radial distance from the base, arm heading, wrist pitch,
wrist roll, and gripper opening. Forward kinematics place the wrist at
cylindrical coordinates (r, heading, z) around the base axis, solve the
shoulder/elbow with planar two-link IK (elbow-up branch), and attach ten
square fiducial markers to rigid link frames.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, KinematicsError, ValidationError

COMPONENT_NAMES = ("height", "distance", "heading", "wrist_angle", "wrist_rotation", "gripper")

_Z = np.array([0.0, 0.0, 1.0])


def validate_configuration(a):
    """Check a length-6 configuration with all components in [0, 1]."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (6,):
        raise ValidationError(f"configuration must have 6 components, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("configuration has non-finite components")
    if np.any(a < 0.0) or np.any(a > 1.0):
        bad = [COMPONENT_NAMES[i] for i in range(6) if not 0.0 <= a[i] <= 1.0]
        raise ValidationError(f"configuration components out of [0,1]: {', '.join(bad)}")
    return a


@dataclass(frozen=True)
class Configuration:
    """One arm configuration; every component lives in [0, 1]."""

    height: float
    distance: float
    heading: float
    wrist_angle: float
    wrist_rotation: float
    gripper: float

    def __post_init__(self):
        validate_configuration(self.as_array())

    def as_array(self):
        return np.array(
            [self.height, self.distance, self.heading, self.wrist_angle, self.wrist_rotation, self.gripper]
        )

    @classmethod
    def from_array(cls, a):
        a = validate_configuration(a)
        return cls(*(float(v) for v in a))


LINK_NAMES = ("upper", "forearm", "wrist")


@dataclass(frozen=True)
class MarkerMount:
    """Placement of one fiducial marker on a link.

    ``offset_frac`` runs along the link axis, ``lateral`` offsets outward
    from the link centerline along the mounting face, ``side`` picks the
    left/right face, and ``tilt_deg`` rotates the normal upward within the
    plane perpendicular to the link axis. Markers on the wrist link ride
    the gripper drive collars: their lateral offset grows with the jaw
    opening and the collars counter-rotate about the wrist axis.
    """

    marker_id: int
    parent: str
    offset_frac: float
    lateral: float
    side: int
    tilt_deg: float
    side_len: float

    def __post_init__(self):
        if self.parent not in LINK_NAMES:
            raise ConfigError(f"marker {self.marker_id}: unknown parent link {self.parent!r}")
        if self.side not in (-1, 1):
            raise ConfigError(f"marker {self.marker_id}: side must be +1 or -1")
        if self.side_len <= 0:
            raise ConfigError(f"marker {self.marker_id}: side_len must be positive")


def default_marker_mounts():
    """Five markers per side: two on the upper arm, two on the forearm, one on a collar.

    Tilts lean the normals toward an elevated camera.  The upper/forearm
    pairs sit on opposite side faces, so tilt < 45 deg keeps each pair's
    normals opposed.  The wrist markers sit flat on top of the gripper
    drive collars (tilt 90): both stay visible together, and the collars'
    spread and counter-rotation expose the gripper opening.
    """
    mounts = []
    layout = [("upper", 0.35, 0.016, 40.0, 0.025), ("upper", 0.75, 0.016, 40.0, 0.025),
              ("forearm", 0.30, 0.013, 25.0, 0.025), ("forearm", 0.65, 0.013, 25.0, 0.025),
              ("wrist", 0.55, 0.018, 90.0, 0.018)]
    mid = 0
    for side in (1, -1):
        for parent, frac, lateral, tilt, side_len in layout:
            mounts.append(MarkerMount(mid, parent, frac, lateral, side, tilt, side_len))
            mid += 1
    return tuple(mounts)


@dataclass(frozen=True)
class ArmGeometry:
    """Link lengths, physical ranges, and marker mounts of the synthetic arm."""

    l1: float = 0.146
    l2: float = 0.185
    lw: float = 0.09
    shoulder_height: float = 0.14
    jaw_max: float = 0.03
    r_range: tuple = (0.12, 0.30)
    z_range: tuple = (0.03, 0.25)
    heading_max_deg: float = 90.0
    wrist_pitch_max_deg: float = 90.0
    wrist_roll_max_deg: float = 90.0
    # The gripper drive collars counter-rotate about the wrist axis as the
    # jaws open; wrist-mounted markers swing with them by up to this angle.
    jaw_swing_deg: float = 75.0
    mounts: tuple = field(default_factory=default_marker_mounts)

    def __post_init__(self):
        if len(self.mounts) != 10:
            raise ConfigError(f"geometry must define exactly 10 marker mounts, got {len(self.mounts)}")
        ids = [m.marker_id for m in self.mounts]
        if ids != list(range(10)):
            raise ConfigError("marker mount ids must be 0..9 in order")
        eps = 5e-3
        lo, hi = abs(self.l1 - self.l2) + eps, self.l1 + self.l2 - eps
        for r in self.r_range:
            for z in self.z_range:
                d = math.hypot(r, z - self.shoulder_height)
                if not lo < d < hi:
                    raise ConfigError(
                        f"reach annulus violated at (r={r}, z={z}): distance {d:.4f} "
                        f"outside ({lo:.4f}, {hi:.4f})"
                    )
        # Closest approach when the shoulder height falls inside the z range.
        if self.z_range[0] <= self.shoulder_height <= self.z_range[1]:
            if not self.r_range[0] > lo:
                raise ConfigError("reach annulus violated at minimum radius")


def denormalize(config, geom):
    """Map a configuration onto physical pose parameters.

    Returns (r, z, heading, pitch, roll, jaw_opening) with angles in
    radians. Each mapping is affine and monotone increasing.
    """
    a = validate_configuration(config.as_array() if isinstance(config, Configuration) else config)

    def lerp(t, lo, hi):
        return lo + t * (hi - lo)

    th = math.radians(geom.heading_max_deg)
    tp = math.radians(geom.wrist_pitch_max_deg)
    tr = math.radians(geom.wrist_roll_max_deg)
    return (
        lerp(a[1], *geom.r_range),
        lerp(a[0], *geom.z_range),
        lerp(a[2], -th, th),
        lerp(a[3], -tp, tp),
        lerp(a[4], -tr, tr),
        lerp(a[5], 0.0, geom.jaw_max),
    )


def _rodrigues(v, axis, angle):
    """Rotate ``v`` about unit ``axis`` by ``angle``."""
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * float(np.dot(axis, v)) * (1.0 - c)


@dataclass(frozen=True)
class MarkerFrame:
    marker_id: int
    corners: np.ndarray  # (4, 3) world points, fixed winding
    normal: np.ndarray  # (3,) outward unit normal


@dataclass(frozen=True)
class ArmPose:
    """World-space keypoints and marker frames for one configuration."""

    base: np.ndarray
    shoulder: np.ndarray
    elbow: np.ndarray
    wrist: np.ndarray
    jaw_tips: np.ndarray  # (2, 3)
    markers: tuple

    @property
    def gripper_center(self):
        return 0.5 * (self.jaw_tips[0] + self.jaw_tips[1])


def forward_kinematics(config, geom):
    """Pose the arm for one configuration.

    Raises :class:`KinematicsError` only if the target is outside the reach
    annulus, which cannot happen for a geometry that passed validation.
    """
    r, z, heading, pitch, roll, jaw = denormalize(config, geom)

    zs = geom.shoulder_height
    d = math.hypot(r, z - zs)
    if not abs(geom.l1 - geom.l2) < d < geom.l1 + geom.l2:
        raise KinematicsError(f"wrist target (r={r:.4f}, z={z:.4f}) unreachable: chord {d:.4f}")

    # Planar two-link IK in the vertical plane through the heading, elbow-up.
    cos_a = (geom.l1 ** 2 + d ** 2 - geom.l2 ** 2) / (2.0 * geom.l1 * d)
    alpha = math.acos(min(1.0, max(-1.0, cos_a)))
    gamma = math.atan2(z - zs, r)
    shoulder_angle = gamma + alpha
    eu = geom.l1 * math.cos(shoulder_angle)
    ez = zs + geom.l1 * math.sin(shoulder_angle)

    u = np.array([math.cos(heading), math.sin(heading), 0.0])
    s = np.array([-math.sin(heading), math.cos(heading), 0.0])

    base = np.zeros(3)
    shoulder = np.array([0.0, 0.0, zs])
    elbow = u * eu + _Z * ez
    wrist = u * r + _Z * z

    w_dir = u * math.cos(pitch) + _Z * math.sin(pitch)
    jaw_dir = _rodrigues(s, w_dir, roll)
    tip_center = wrist + geom.lw * w_dir
    jaw_tips = np.stack([tip_center + 0.5 * jaw * jaw_dir, tip_center - 0.5 * jaw * jaw_dir])

    # Rigid frames: x along the link, y sideways, z = x cross y. The wrist
    # frame rolls with the gripper.
    frames = {
        "upper": (shoulder, (elbow - shoulder) / geom.l1, s, geom.l1),
        "forearm": (elbow, (wrist - elbow) / geom.l2, s, geom.l2),
        "wrist": (wrist, w_dir, jaw_dir, geom.lw),
    }

    swing = math.radians(geom.jaw_swing_deg) * (jaw / geom.jaw_max)

    markers = []
    for m in geom.mounts:
        origin, ax, ay, length = frames[m.parent]
        if m.parent == "wrist":
            # Markers ride the drive collars: they spread with the jaws and
            # counter-rotate about the wrist axis as the gripper opens.
            ay = _rodrigues(ay, ax, m.side * swing)
        az = np.cross(ax, ay)
        tilt = math.radians(m.tilt_deg)
        normal = m.side * math.cos(tilt) * ay + math.sin(tilt) * az
        # The plate sits on the face whose outward direction is side * ay;
        # tilt only turns the facing, not the mounting point.
        lateral = m.lateral + (0.5 * jaw if m.parent == "wrist" else 0.0)
        center = origin + m.offset_frac * length * ax + lateral * m.side * ay
        mu = ax
        mv = np.cross(normal, mu)
        h = 0.5 * m.side_len
        corners = np.stack([
            center - h * mu - h * mv,
            center + h * mu - h * mv,
            center + h * mu + h * mv,
            center - h * mu + h * mv,
        ])
        markers.append(MarkerFrame(m.marker_id, corners, normal))

    return ArmPose(base, shoulder, elbow, wrist, jaw_tips, tuple(markers))


def marker_world_corners(pose):
    """List of (corners, normal) per marker, in marker-id order."""
    return [(m.corners, m.normal) for m in pose.markers]


# --- geometry text config -------------------------------------------------

_SCALARS = ("l1", "l2", "lw", "shoulder_height", "jaw_max",
            "heading_max_deg", "wrist_pitch_max_deg", "wrist_roll_max_deg",
            "jaw_swing_deg")


def geometry_to_text(geom):
    lines = ["# proprio arm geometry"]
    for name in _SCALARS:
        lines.append(f"{name} = {getattr(geom, name):.17g}")
    lines.append(f"r_range = {geom.r_range[0]:.17g} {geom.r_range[1]:.17g}")
    lines.append(f"z_range = {geom.z_range[0]:.17g} {geom.z_range[1]:.17g}")
    lines.append("# marker = id parent offset_frac lateral side tilt_deg side_len")
    for m in geom.mounts:
        lines.append(
            f"marker = {m.marker_id} {m.parent} {m.offset_frac:.17g} "
            f"{m.lateral:.17g} {m.side:+d} {m.tilt_deg:.17g} {m.side_len:.17g}"
        )
    return "\n".join(lines) + "\n"


def geometry_from_text(text):
    kwargs = {}
    mounts = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"geometry line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "marker":
            f = value.split()
            if len(f) != 7:
                raise ConfigError(f"geometry line {lineno}: marker needs 7 fields")
            mounts.append(MarkerMount(int(f[0]), f[1], float(f[2]), float(f[3]),
                                      int(f[4]), float(f[5]), float(f[6])))
        elif key in ("r_range", "z_range"):
            lo, hi = (float(v) for v in value.split())
            kwargs[key] = (lo, hi)
        elif key in _SCALARS:
            kwargs[key] = float(value)
        else:
            raise ConfigError(f"geometry line {lineno}: unknown key {key!r}")
    if mounts:
        kwargs["mounts"] = tuple(mounts)
    return ArmGeometry(**kwargs)


def save_geometry(path, geom):
    with open(path, "w") as fh:
        fh.write(geometry_to_text(geom))


def load_geometry(path):
    with open(path) as fh:
        return geometry_from_text(fh.read())
