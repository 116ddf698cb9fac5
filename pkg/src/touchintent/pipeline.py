"""Per-frame intention recognition with moving-window smoothing."""

from collections import deque
from dataclasses import dataclass, field
import threading

import numpy as np

from .features import FeatureStreamState, frame_geometry, features_from_geometry, SensorSnapshot
from .kinematics import robot_frames, sensor_world_positions
from .perception import (
    DegenerateGeometryError, GazeEstimate, Keypoint2D, Skeleton, HAND_KEYPOINTS,
    project_skeleton, validate_skeleton,
)


class StreamError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    window_s: float = 1.0
    threshold: float = 0.5

    def __post_init__(self):
        if not self.window_s > 0:
            raise ValueError("window span must be positive")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")


@dataclass(frozen=True)
class Observation:
    geometry: object
    sensor_positions: np.ndarray
    skeleton: Skeleton
    verdict: object


def skeleton_from_frame(keypoints):
    kps = {}
    for name, (u, v, conf, depth) in keypoints.items():
        kps[name] = Keypoint2D(u, v, conf, depth if depth is not None and depth > 0 else None)
    return Skeleton(kps)


def gaze_from_frame(gaze):
    if not gaze:
        return None
    try:
        return GazeEstimate(np.asarray(gaze["origin"], dtype=float),
                            np.asarray(gaze["direction"], dtype=float))
    except DegenerateGeometryError:
        return None


def observe(frame, env, gated=True):
    """Sensor positioning, skeleton projection/validation and raw feature geometry.

    ``gated`` may also be a tuple of flags; the result then holds one
    geometry per flag, sharing the kinematics and skeleton work.
    """
    frames = robot_frames(env.robot, np.asarray(frame.q, dtype=float))
    positions = sensor_world_positions(env.layout, frames)
    snap = SensorSnapshot(np.asarray(frame.gamma, dtype=np.int8), positions)

    sk = project_skeleton(skeleton_from_frame(frame.keypoints), env.camera)
    verdict = validate_skeleton(sk, env.bounds, env.max_missing_fraction)
    if verdict.accepted:
        wrists = {h: sk.wrist3d(h) for h in HAND_KEYPOINTS}
        pixels = {h: sk.pixel(n) for h, n in HAND_KEYPOINTS.items()}
    else:
        # a discarded skeleton contributes no hands
        wrists = {"L": None, "R": None}
        pixels = {"L": None, "R": None}
    gaze = gaze_from_frame(frame.gaze)
    if isinstance(gated, tuple):
        geom = tuple(frame_geometry(frame.t, snap, wrists, pixels, gaze, env.pois, g) for g in gated)
    else:
        geom = frame_geometry(frame.t, snap, wrists, pixels, gaze, env.pois, gated)
    return Observation(geom, positions, sk, verdict)


@dataclass
class IntentionState:
    window_s: float = 1.0
    window: deque = field(default_factory=deque)
    raw_score: float = None
    smoothed: float = 0.0
    intention: bool = False
    last_transition: float = None

    def push(self, t, label, threshold):
        self.window.append((t, int(label)))
        # keep samples strictly newer than (t - span); 1e-9 absorbs rounding in t
        while self.window and t - self.window[0][0] > self.window_s - 1e-9:
            self.window.popleft()
        self.smoothed = sum(l for _, l in self.window) / len(self.window)
        # equality with the threshold counts as unintentional
        new = self.smoothed > threshold
        if new != self.intention:
            self.last_transition = t
        self.intention = new
        return new

    def reset(self):
        self.window.clear()
        self.raw_score = None
        self.smoothed = 0.0
        self.intention = False
        self.last_transition = None
        return self


@dataclass(frozen=True)
class StepResult:
    t: float
    features: object
    raw_label: int
    raw_score: float
    smoothed: float
    intention: bool
    skeleton_ok: bool


class IntentionPipeline:
    """One interaction stream: observation -> features -> classifier -> smoothing.

    ``latest`` always holds a complete :class:`StepResult`; it is replaced
    in a single assignment so a concurrent reader never sees a partial one.
    """

    def __init__(self, env, model, config=None):
        self.env = env
        self.model = model
        self.config = config or PipelineConfig(env.window_s, env.threshold)
        self.scaling = model.scaling or env.default_scaling
        self.gated = model.mask.gated
        self.columns = model.mask.columns
        self.stream = FeatureStreamState()
        self.state = IntentionState(self.config.window_s)
        self.latest = None
        self._lock = threading.Lock()

    def step(self, frame):
        with self._lock:
            if self.stream.prev_t is not None and not frame.t > self.stream.prev_t:
                raise StreamError(f"frame at t={frame.t} is not after t={self.stream.prev_t}")
            obs = observe(frame, self.env, self.gated)
            fv = features_from_geometry(obs.geometry, self.stream, self.scaling)
            label, score = self.model.predict(fv.as_array()[self.columns])
            self.state.raw_score = score
            intention = self.state.push(frame.t, label, self.config.threshold)
            result = StepResult(frame.t, fv, label, score, self.state.smoothed, intention,
                                obs.verdict.accepted)
            self.latest = result
            return result

    def reset(self):
        with self._lock:
            self.stream.reset()
            self.state.reset()
            self.latest = None
        return self.state


def reset(state):
    return state.reset()


def smooth_labels(times, labels, window_s=1.0, threshold=0.5):
    """Smoothed intention for a whole label sequence (test and plotting helper)."""
    st = IntentionState(window_s)
    return [st.push(t, l, threshold) for t, l in zip(times, labels)]
