"""Camera-side geometry: keypoint back-projection, skeleton checks, 2D gaze angles."""

from dataclasses import dataclass, field
import math

import numpy as np

from .transforms import invert


class DegenerateGeometryError(ValueError):
    pass


KEYPOINT_NAMES = (
    "head", "neck",
    "l_shoulder", "r_shoulder",
    "l_elbow", "r_elbow",
    "l_wrist", "r_wrist",
    "l_hip", "r_hip",
)

# wrist keypoints stand in for the hands
HAND_KEYPOINTS = {"L": "l_wrist", "R": "r_wrist"}

LIMBS = {
    "l_upper_arm": ("l_shoulder", "l_elbow"),
    "r_upper_arm": ("r_shoulder", "r_elbow"),
    "l_forearm": ("l_elbow", "l_wrist"),
    "r_forearm": ("r_elbow", "r_wrist"),
    "shoulder_width": ("l_shoulder", "r_shoulder"),
}


@dataclass(frozen=True)
class Keypoint2D:
    u: float
    v: float
    confidence: float = 1.0
    depth: float = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")
        if self.depth is not None and not self.depth > 0.0:
            raise ValueError("depth must be positive when present")

    @property
    def present(self):
        return self.confidence > 0.0


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")


@dataclass(frozen=True)
class Camera:
    """Intrinsics plus the camera pose in world coordinates (x right, y down, z optical axis)."""

    intrinsics: CameraIntrinsics
    pose: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        object.__setattr__(self, "_world_to_cam", invert(self.pose))

    def to_world(self, p_cam):
        return self.pose[:3, :3] @ p_cam + self.pose[:3, 3]

    def to_camera(self, p_world):
        W = self._world_to_cam
        return W[:3, :3] @ np.asarray(p_world, dtype=float) + W[:3, 3]

    def project(self, p_world):
        """World point -> (u, v, depth)."""
        x, y, z = self.to_camera(p_world)
        k = self.intrinsics
        return k.fx * x / z + k.cx, k.fy * y / z + k.cy, z


@dataclass(frozen=True)
class LimbLengthBounds:
    bounds: dict

    def __post_init__(self):
        for name, (lo, hi) in self.bounds.items():
            if not 0.0 < lo < hi:
                raise ValueError(f"limb {name}: need 0 < min < max")

    @classmethod
    def default(cls):
        return cls({
            "l_upper_arm": (0.2, 0.45), "r_upper_arm": (0.2, 0.45),
            "l_forearm": (0.2, 0.45), "r_forearm": (0.2, 0.45),
            "shoulder_width": (0.25, 0.55),
        })


@dataclass
class Skeleton:
    keypoints: dict
    keypoints3d: dict = field(default_factory=dict)

    def present(self, name):
        kp = self.keypoints.get(name)
        return kp is not None and kp.present

    def wrist3d(self, hand):
        return self.keypoints3d.get(HAND_KEYPOINTS[hand])

    def pixel(self, name):
        kp = self.keypoints.get(name)
        if kp is None or not kp.present:
            return None
        return np.array([kp.u, kp.v])


@dataclass(frozen=True)
class GazeEstimate:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0.0:
            raise DegenerateGeometryError("gaze direction has zero length")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "direction", d / n)


@dataclass(frozen=True)
class SkeletonVerdict:
    accepted: bool
    reason: str = ""
    absent: tuple = ()


def project_keypoint(kp, intrinsics):
    """Pinhole back-projection of a pixel with depth into camera coordinates.

    Returns None when the keypoint has no usable depth.
    """
    if not kp.present or kp.depth is None or not kp.depth > 0.0:
        return None
    z = kp.depth
    return np.array([(kp.u - intrinsics.cx) * z / intrinsics.fx,
                     (kp.v - intrinsics.cy) * z / intrinsics.fy,
                     z])


def project_skeleton(sk, camera):
    """Fill ``sk.keypoints3d`` with world-frame points for every projectable keypoint."""
    sk.keypoints3d = {}
    for name, kp in sk.keypoints.items():
        p = project_keypoint(kp, camera.intrinsics)
        if p is not None:
            sk.keypoints3d[name] = camera.to_world(p)
    return sk


def validate_skeleton(sk, bounds, max_missing_fraction=0.3, names=KEYPOINT_NAMES):
    absent = tuple(n for n in names if n not in sk.keypoints3d)
    if len(absent) > max_missing_fraction * len(names):
        return SkeletonVerdict(False, f"{len(absent)} of {len(names)} keypoints missing", absent)
    for limb, (lo, hi) in bounds.bounds.items():
        a, b = LIMBS[limb]
        if a not in sk.keypoints3d or b not in sk.keypoints3d:
            continue
        length = float(np.linalg.norm(sk.keypoints3d[a] - sk.keypoints3d[b]))
        if not lo <= length <= hi:
            return SkeletonVerdict(False, f"{limb} length {length:.3f} m outside [{lo}, {hi}]", absent)
    return SkeletonVerdict(True, "", absent)


def gaze_angle_to_point(gaze, poi):
    """Image-plane angle in [0, pi] between the gaze ray and the ray from its origin to ``poi``."""
    v = np.asarray(poi, dtype=float) - gaze.origin
    n = math.hypot(v[0], v[1])
    if n == 0.0:
        raise DegenerateGeometryError("point of interest coincides with the gaze origin")
    d = gaze.direction
    # atan2 of cross/dot stays accurate near 0 and pi where acos does not
    cross = d[0] * v[1] - d[1] * v[0]
    dot = d[0] * v[0] + d[1] * v[1]
    return math.atan2(abs(cross), dot)
