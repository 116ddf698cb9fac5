"""Touch, hand-distance and gaze features and their reduction to five scalars.

Per frame the extractor computes, for every hand ``h`` and sensor ``j``,
the gated distance ``d[h, j]`` (1 for untouched sensors), gaze angles to
the hands (only for a hand that is closest to some touched sensor) and to
static points of interest, and reduces them to
``(gamma', d', d_dot', alpha', alpha_dot')`` with every entry in [0, 1].
"""

from dataclasses import dataclass, asdict
import math

import numpy as np

from .perception import DegenerateGeometryError, gaze_angle_to_point

FEATURE_NAMES = ("TS", "HP", "HS", "GA", "GS")
HANDS = ("L", "R")


class FeatureError(ValueError):
    pass


class StreamOrderError(FeatureError):
    pass


class FitError(FeatureError):
    pass


@dataclass(frozen=True)
class ScalingParams:
    """Training-set maxima. ``d_dot_max`` and ``alpha_dot_max`` are rates of the
    already-scaled distance and angle (units 1/s)."""

    d_max: float
    d_dot_max: float
    alpha_max: float
    alpha_dot_max: float

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (value > 0 and math.isfinite(value)):
                raise FeatureError(f"{name} must be positive and finite, got {value}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: float(d[k]) for k in ("d_max", "d_dot_max", "alpha_max", "alpha_dot_max")})


@dataclass(frozen=True)
class FeatureVector:
    gamma: int
    d: float
    d_dot: float
    alpha: float
    alpha_dot: float

    def __post_init__(self):
        if self.gamma not in (0, 1):
            raise FeatureError("gamma' must be 0 or 1")
        for v in (self.d, self.d_dot, self.alpha, self.alpha_dot):
            if not 0.0 <= v <= 1.0:
                raise FeatureError(f"scaled feature {v} outside [0, 1]")

    def as_array(self):
        return np.array([float(self.gamma), self.d, self.d_dot, self.alpha, self.alpha_dot])


@dataclass(frozen=True)
class SensorSnapshot:
    gamma: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=np.int8)
        p = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if g.shape[0] != p.shape[0]:
            raise FeatureError("gamma and positions must cover the same sensors")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "positions", p)


@dataclass(frozen=True)
class Poi:
    name: str
    kind: str  # "hand-L", "hand-R" or "static"
    pixel: tuple = None
    world: tuple = None


@dataclass(frozen=True)
class PoiSet:
    pois: tuple

    def __post_init__(self):
        kinds = [p.kind for p in self.pois]
        for k in ("hand-L", "hand-R"):
            if kinds.count(k) > 1:
                raise FeatureError(f"at most one {k} point of interest")
        for p in self.pois:
            if p.kind == "static" and p.pixel is None:
                raise FeatureError(f"static point of interest {p.name!r} needs a pixel location")

    @property
    def static(self):
        return [p for p in self.pois if p.kind == "static"]

    def has_hand(self, hand):
        return any(p.kind == f"hand-{hand}" for p in self.pois)


def _clamp01(x):
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def hand_distance(hand_position, sensor, snapshot, scaling):
    """Gated, scaled distance between a hand and one sensor."""
    if not 0 <= sensor < len(snapshot.gamma):
        raise KeyError(f"unknown sensor id {sensor}")
    if snapshot.gamma[sensor] == 0 or hand_position is None:
        return 1.0
    dist = float(np.linalg.norm(np.asarray(hand_position) - snapshot.positions[sensor]))
    return _clamp01(dist / scaling.d_max)


def backward_difference(current, previous, dt, rate_max):
    """Scaled magnitude of the one-step backward difference; 0 without history."""
    if previous is None:
        return 0.0
    if not dt > 0.0:
        raise StreamOrderError(f"timestamps must increase (dt={dt})")
    return _clamp01(abs(current - previous) / dt / rate_max)


@dataclass
class FeatureStreamState:
    prev_d: float = None
    prev_alpha: float = None
    prev_t: float = None

    def advance(self, t, d, alpha, scaling):
        if self.prev_t is not None and not t > self.prev_t:
            raise StreamOrderError(f"timestamp {t} does not follow {self.prev_t}")
        dt = None if self.prev_t is None else t - self.prev_t
        d_dot = backward_difference(d, self.prev_d, dt, scaling.d_dot_max)
        a_dot = backward_difference(alpha, self.prev_alpha, dt, scaling.alpha_dot_max)
        self.prev_d, self.prev_alpha, self.prev_t = d, alpha, t
        return d_dot, a_dot

    def reset(self):
        self.prev_d = self.prev_alpha = self.prev_t = None


def raw_distances(snapshot, wrists):
    """Unscaled hand-to-sensor distances, shape (2, n_s); inf for an absent hand."""
    D = np.full((2, len(snapshot.gamma)), np.inf)
    for i, h in enumerate(HANDS):
        p = wrists.get(h)
        if p is not None:
            diff = snapshot.positions - p
            D[i] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return D


def hand_assignment(D, active):
    """Which hands get a gaze angle: L if it is at least as close as R to some
    active sensor, R only if strictly closer. Compares unclamped distances."""
    if not active.any():
        return {"L": False, "R": False}
    dl, dr = D[0, active], D[1, active]
    return {"L": bool(np.any(np.isfinite(dl) & (dl <= dr))),
            "R": bool(np.any(np.isfinite(dr) & (dr < dl)))}


def _angle_or_none(gaze, pixel):
    if gaze is None or pixel is None:
        return None
    try:
        return gaze_angle_to_point(gaze, pixel)
    except DegenerateGeometryError:
        return None


def raw_gaze_angles(D, active, gaze, hand_pixels, pois):
    """Unscaled gaze angles: {"L", "R"} (None when not computed) and static POIs by name."""
    assigned = hand_assignment(D, active)
    out = {}
    for h in HANDS:
        if assigned[h] and pois.has_hand(h):
            out[h] = _angle_or_none(gaze, hand_pixels.get(h))
        else:
            out[h] = None
    static = {p.name: _angle_or_none(gaze, p.pixel) for p in pois.static}
    return out, static


def assign_hands_and_gaze(snapshot, wrists, hand_pixels, gaze, pois, scaling, gated=True):
    """Scaled gaze angles for both hands and all static points of interest.

    A hand whose angle is not computed (not closest to any touched sensor,
    missing, or degenerate gaze) gets 1.
    """
    active = snapshot.gamma.astype(bool) if gated else np.ones(len(snapshot.gamma), dtype=bool)
    D = raw_distances(snapshot, wrists)
    hands, static = raw_gaze_angles(D, active, gaze, hand_pixels, pois)

    def scale(a):
        return 1.0 if a is None else _clamp01(a / scaling.alpha_max)

    return {"L": scale(hands["L"]), "R": scale(hands["R"]),
            "static": {k: scale(v) for k, v in static.items()}}


def reduce(gamma, hand_distances, gaze_angles, stream, t, scaling):
    """Five-feature reduction with backward-difference speeds from ``stream``."""
    gamma_p = int(np.max(gamma)) if len(gamma) else 0
    hd = np.asarray(hand_distances, dtype=float)
    d_p = float(hd.min()) if hd.size else 1.0
    angles = list(gaze_angles)
    a_p = float(min(angles)) if angles else 1.0
    d_dot, a_dot = stream.advance(t, d_p, a_p, scaling)
    return FeatureVector(gamma_p, d_p, d_dot, a_p, a_dot)


@dataclass(frozen=True)
class FrameGeometry:
    """Unscaled per-frame quantities; the input to scaling and to fitting."""

    t: float
    gamma: int
    min_dist: float        # min over hands and active sensors, inf if none
    active_dists: np.ndarray  # every finite hand-to-active-sensor distance
    angles: tuple          # every computed raw gaze angle


def frame_geometry(t, snapshot, wrists, hand_pixels, gaze, pois, gated=True):
    active = snapshot.gamma.astype(bool) if gated else np.ones(len(snapshot.gamma), dtype=bool)
    D = raw_distances(snapshot, wrists)
    Da = D[:, active]
    finite = Da[np.isfinite(Da)]
    hands, static = raw_gaze_angles(D, active, gaze, hand_pixels, pois)
    angles = tuple(a for a in list(hands.values()) + list(static.values()) if a is not None)
    return FrameGeometry(t=t,
                         gamma=int(snapshot.gamma.max()) if len(snapshot.gamma) else 0,
                         min_dist=float(finite.min()) if finite.size else math.inf,
                         active_dists=finite,
                         angles=angles)


def scaled_position(geom, scaling):
    """(d', alpha') for one frame; min over scaled values equals scaled min over raw ones."""
    d = 1.0 if not math.isfinite(geom.min_dist) else _clamp01(geom.min_dist / scaling.d_max)
    a = _clamp01(min(geom.angles) / scaling.alpha_max) if geom.angles else 1.0
    return d, a


def features_from_geometry(geom, stream, scaling):
    d, a = scaled_position(geom, scaling)
    d_dot, a_dot = stream.advance(geom.t, d, a, scaling)
    return FeatureVector(geom.gamma, d, d_dot, a, a_dot)


def fit_scaling(streams):
    """Fit maxima from training data.

    ``streams`` is an iterable of per-trace sequences of :class:`FrameGeometry`
    in timestamp order. Distances and angles are fitted first; the speed
    maxima are then taken over backward differences of the scaled values
    within each stream.
    """
    streams = [list(s) for s in streams]
    d_max = 0.0
    a_max = 0.0
    any_active = False
    for s in streams:
        for g in s:
            if g.active_dists.size:
                any_active = True
                d_max = max(d_max, float(g.active_dists.max()))
            if g.angles:
                a_max = max(a_max, max(g.angles))
    if not any_active or d_max <= 0.0:
        raise FitError("training data has no frame with an active sensor and a visible hand")
    if a_max <= 0.0:
        raise FitError("training data has no usable gaze angle")

    # placeholder rates; only positions are used below
    pos_only = ScalingParams(d_max, 1.0, a_max, 1.0)
    dd_max = 0.0
    ad_max = 0.0
    for s in streams:
        prev = None
        for g in s:
            d, a = scaled_position(g, pos_only)
            if prev is not None:
                dt = g.t - prev[0]
                if not dt > 0:
                    raise StreamOrderError(f"timestamp {g.t} does not follow {prev[0]}")
                dd_max = max(dd_max, abs(d - prev[1]) / dt)
                ad_max = max(ad_max, abs(a - prev[2]) / dt)
            prev = (g.t, d, a)
    if dd_max <= 0.0 or ad_max <= 0.0:
        raise FitError("training data has no variation to fit speed maxima")
    return ScalingParams(d_max, dd_max, a_max, ad_max)
