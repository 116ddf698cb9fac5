import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from touchintent.perception import (
    KEYPOINT_NAMES, Camera, CameraIntrinsics, DegenerateGeometryError, GazeEstimate, Keypoint2D,
    LimbLengthBounds, Skeleton, gaze_angle_to_point, project_keypoint, project_skeleton,
    validate_skeleton,
)

K = CameraIntrinsics(500.0, 500.0, 320.0, 320.0)

NOMINAL = {
    "head": (0.0, -0.70, 2.0), "neck": (0.0, -0.55, 2.0),
    "l_shoulder": (-0.19, -0.50, 2.0), "r_shoulder": (0.19, -0.50, 2.0),
    "l_elbow": (-0.22, -0.20, 2.0), "r_elbow": (0.22, -0.20, 2.0),
    "l_wrist": (-0.20, 0.07, 2.0), "r_wrist": (0.20, 0.07, 2.0),
    "l_hip": (-0.14, 0.0, 2.0), "r_hip": (0.14, 0.0, 2.0),
}


def skeleton_from_points(points, camera):
    kps = {}
    for name, p in points.items():
        u, v, z = camera.project(np.asarray(p))
        kps[name] = Keypoint2D(u, v, 1.0, z)
    return project_skeleton(Skeleton(kps), camera)


def test_principal_point_examples():
    assert np.allclose(project_keypoint(Keypoint2D(320, 320, 1.0, 1.0), K), [0, 0, 1.0])
    assert np.allclose(project_keypoint(Keypoint2D(820, 320, 1.0, 2.0), K), [2.0, 0, 2.0])


def test_missing_depth_is_not_fabricated():
    assert project_keypoint(Keypoint2D(100, 100, 1.0, None), K) is None
    assert project_keypoint(Keypoint2D(100, 100, 0.0, 1.0), K) is None
    with pytest.raises(ValueError):
        Keypoint2D(1, 1, 1.0, -1.0)
    with pytest.raises(ValueError):
        Keypoint2D(1, 1, 1.5, 1.0)


def test_projection_round_trip(env, rng):
    cam = env.camera
    for _ in range(500):
        p = np.array([rng.uniform(0.3, 1.5), rng.uniform(-0.8, 0.8), rng.uniform(0.3, 2.0)])
        u, v, z = cam.project(p)
        back = cam.to_world(project_keypoint(Keypoint2D(u, v, 1.0, z), cam.intrinsics))
        assert np.linalg.norm(back - p) < 1e-9


def test_occlusion_moves_point_along_ray_only(env):
    cam = env.camera
    p = np.array([0.8, 0.2, 1.0])
    u, v, z = cam.project(p)
    near = cam.to_world(project_keypoint(Keypoint2D(u, v, 1.0, z - 0.3), cam.intrinsics))
    u2, v2, z2 = cam.project(near)
    assert abs(u2 - u) < 1e-9 and abs(v2 - v) < 1e-9
    assert math.isclose(z2, z - 0.3, abs_tol=1e-12)
    centre = cam.pose[:3, 3]
    a, b = p - centre, near - centre
    assert np.linalg.norm(np.cross(a, b)) < 1e-9


def test_nominal_skeleton_accepted():
    cam = Camera(K)
    sk = skeleton_from_points(NOMINAL, cam)
    verdict = validate_skeleton(sk, LimbLengthBounds.default())
    assert verdict.accepted


def test_mini_skeleton_rejected():
    cam = Camera(K)
    c = np.array(NOMINAL["neck"])
    small = {n: c + 0.1 * (np.array(p) - c) for n, p in NOMINAL.items()}
    verdict = validate_skeleton(skeleton_from_points(small, cam), LimbLengthBounds.default())
    assert not verdict.accepted
    assert "length" in verdict.reason


def test_missing_wrist_accepted_and_flagged():
    cam = Camera(K)
    pts = dict(NOMINAL)
    del pts["r_wrist"]
    sk = skeleton_from_points(pts, cam)
    verdict = validate_skeleton(sk, LimbLengthBounds.default())
    assert verdict.accepted
    assert verdict.absent == ("r_wrist",)
    assert sk.wrist3d("R") is None


def test_too_many_missing_rejected():
    cam = Camera(K)
    pts = {n: NOMINAL[n] for n in KEYPOINT_NAMES[:6]}
    assert not validate_skeleton(skeleton_from_points(pts, cam), LimbLengthBounds.default()).accepted


@settings(max_examples=300, deadline=None)
@given(st.floats(0.05, 0.3), st.floats(0.0, 0.3), st.floats(0.4, 1.0))
def test_validation_monotone_in_bounds(scale_jitter, widen, scale):
    cam = Camera(K)
    c = np.array(NOMINAL["neck"])
    pts = {n: c + scale * (1 + scale_jitter) * (np.array(p) - c) for n, p in NOMINAL.items()}
    sk = skeleton_from_points(pts, cam)
    tight = LimbLengthBounds.default()
    loose = LimbLengthBounds({k: (lo * (1 - widen) + 1e-6, hi * (1 + widen)) for k, (lo, hi) in
                              tight.bounds.items()})
    if validate_skeleton(sk, tight).accepted:
        assert validate_skeleton(sk, loose).accepted


def test_gaze_angle_examples():
    g = GazeEstimate(np.array([10.0, 20.0]), np.array([1.0, 0.0]))
    assert gaze_angle_to_point(g, [15.0, 20.0]) == 0.0
    assert math.isclose(gaze_angle_to_point(g, [10.0, 23.0]), math.pi / 2)
    assert math.isclose(gaze_angle_to_point(g, [8.0, 20.0]), math.pi)
    with pytest.raises(DegenerateGeometryError):
        gaze_angle_to_point(g, [10.0, 20.0])
    with pytest.raises(DegenerateGeometryError):
        GazeEstimate(np.zeros(2), np.zeros(2))


def test_gaze_direction_normalised():
    g = GazeEstimate(np.zeros(2), np.array([3.0, 4.0]))
    assert abs(np.linalg.norm(g.direction) - 1.0) < 1e-12


coords = st.floats(-500, 500, allow_nan=False)


@settings(max_examples=1000, deadline=None)
@given(coords, coords, coords, coords, coords, coords, st.floats(0.01, 50.0))
def test_gaze_angle_range_and_invariances(ox, oy, dx, dy, px, py, s):
    o = np.array([ox, oy])
    d = np.array([dx, dy])
    p = np.array([px, py])
    if np.linalg.norm(d) < 1e-6 or np.linalg.norm(p - o) < 1e-6:
        return
    a = gaze_angle_to_point(GazeEstimate(o, d), p)
    assert 0.0 <= a <= math.pi
    # uniform scaling about the origin
    b = gaze_angle_to_point(GazeEstimate(o, s * d), o + s * (p - o))
    assert abs(a - b) < 1e-9
    # reflecting both vectors
    c = gaze_angle_to_point(GazeEstimate(o, -d), o - (p - o))
    assert abs(a - c) < 1e-9
