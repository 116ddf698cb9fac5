"""Small rigid-transform helpers on 4x4 homogeneous numpy matrices."""

import math

import numpy as np


def axis_angle(axis, angle):
    """Rotation matrix for ``angle`` radians about unit vector ``axis`` (Rodrigues)."""
    x, y, z = axis
    c = math.cos(angle)
    s = math.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def rpy_matrix(roll, pitch, yaw):
    """Fixed-axis roll/pitch/yaw (x, then y, then z) rotation matrix."""
    return (axis_angle((0.0, 0.0, 1.0), yaw)
            @ axis_angle((0.0, 1.0, 0.0), pitch)
            @ axis_angle((1.0, 0.0, 0.0), roll))


def make_transform(rotation=None, translation=None):
    T = np.eye(4)
    if rotation is not None:
        T[:3, :3] = rotation
    if translation is not None:
        T[:3, 3] = translation
    return T


def from_xyz_rpy(xyz=(0.0, 0.0, 0.0), rpy=(0.0, 0.0, 0.0)):
    return make_transform(rpy_matrix(*rpy), np.asarray(xyz, dtype=float))


def to_xyz_rpy(T):
    """Inverse of :func:`from_xyz_rpy` (valid away from pitch = +-pi/2)."""
    R = T[:3, :3]
    pitch = math.asin(max(-1.0, min(1.0, -R[2, 0])))
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return [float(v) for v in T[:3, 3]], [roll, pitch, yaw]


def invert(T):
    R = T[:3, :3]
    Ti = np.eye(4)
    Ti[:3, :3] = R.T
    Ti[:3, 3] = -R.T @ T[:3, 3]
    return Ti


def is_rigid(T, tol=1e-6):
    T = np.asarray(T)
    if T.shape != (4, 4) or not np.all(np.isfinite(T)):
        return False
    R = T[:3, :3]
    if not np.allclose(R.T @ R, np.eye(3), atol=tol):
        return False
    if abs(np.linalg.det(R) - 1.0) > tol:
        return False
    return np.allclose(T[3], [0.0, 0.0, 0.0, 1.0])
