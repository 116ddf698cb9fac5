"""Deterministic synthetic interaction traces.

Scenario kinds:

manipulation
    the user reaches for a pad, grips the arm and guides it while looking
    at their hand, the workpiece or the monitor
distracted
    the same, but gaze leaves every point of interest for a scheduled
    interval while the hand keeps pushing
collision
    the user backs into the robot; a hip activates the pads while both
    wrists are held away in front of the body
idle
    no contact; hands rest or hover a few centimetres above pads
mixed
    hovering followed by a short touch

Ground truth is rule-generated: a frame is intentional iff some pad is
active in the (zero-order held) scan state, the body keypoint nearest to
that pad is a wrist, and the current gaze fixation is a point of interest.
"""

from dataclasses import dataclass, field, asdict
import math

import numpy as np

from .kinematics import point_jacobian, robot_frames, sensor_world_positions
from .perception import (
    HAND_KEYPOINTS, KEYPOINT_NAMES, Keypoint2D, Skeleton, project_skeleton, validate_skeleton,
)
from .traces import TraceFile, TraceFrame, make_header

KINDS = ("manipulation", "distracted", "collision", "idle", "mixed")
UP = np.array([0.0, 0.0, 1.0])

# gaze targets that are not points of interest
FAR_TARGETS = (
    np.array([1.2, 2.2, 1.7]),    # someone standing to the user's right
    np.array([1.3, -2.2, 1.6]),   # to the user's left
    np.array([3.5, 0.3, 2.6]),    # up and behind
    np.array([1.9, 1.6, 2.4]),
)


class GenerationError(ValueError):
    pass


@dataclass
class ScenarioSpec:
    kind: str = "manipulation"
    duration: float = 5.4
    seed: int = 0
    frame_rate: float = 15.0
    sensor_scan_hz: float = 2.5
    pixel_sigma: float = 1.5
    gaze_sigma_deg: float = 4.0
    depth_sigma: float = 0.008
    upper_arm: float = 0.30
    forearm: float = 0.27
    shoulder_width: float = 0.38
    push_force: float = None
    schedule: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GenerationError(f"unknown scenario kind {self.kind!r}")
        if not self.duration > 0:
            raise GenerationError("duration must be positive")
        if min(self.pixel_sigma, self.gaze_sigma_deg, self.depth_sigma) < 0:
            raise GenerationError("noise levels must be non-negative")
        for key, value in self.schedule.items():
            for t in _flatten_times(value):
                if not 0.0 <= t <= self.duration:
                    raise GenerationError(f"schedule {key} time {t} outside [0, {self.duration}]")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise GenerationError(f"unknown scenario fields {sorted(unknown)}")
        return cls(**d)


def _flatten_times(value):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, (list, tuple)):
        out = []
        for v in value:
            out.extend(_flatten_times(v))
        return out
    return []


def min_jerk(s):
    s = min(max(s, 0.0), 1.0)
    return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)


# ---------------------------------------------------------------- actor

@dataclass
class Actor:
    position: np.ndarray       # floor point under the pelvis
    facing: float              # heading angle of the chest normal
    upper_arm: float
    forearm: float
    shoulder_width: float
    crouch: float = 0.0

    @property
    def forward(self):
        return np.array([math.cos(self.facing), math.sin(self.facing), 0.0])

    @property
    def left(self):
        # UP x forward
        return np.array([-math.sin(self.facing), math.cos(self.facing), 0.0])

    def anchor(self, z, lateral=0.0, fwd=0.0):
        return self.position + UP * (z + self.crouch) + self.left * lateral + self.forward * fwd

    def shoulder(self, hand):
        side = 1.0 if hand == "L" else -1.0
        return self.anchor(1.45, side * self.shoulder_width / 2)

    def torso(self):
        return {
            "head": self.anchor(1.66, 0.0, 0.03),
            "neck": self.anchor(1.50),
            "l_shoulder": self.shoulder("L"),
            "r_shoulder": self.shoulder("R"),
            "l_hip": self.anchor(0.97, 0.14),
            "r_hip": self.anchor(0.97, -0.14),
        }

    @property
    def reach(self):
        return self.upper_arm + self.forearm

    def reachable(self, hand, wrist):
        d = np.linalg.norm(wrist - self.shoulder(hand))
        return abs(self.upper_arm - self.forearm) + 0.03 <= d <= self.reach - 0.015

    def elbow(self, hand, wrist):
        S = self.shoulder(hand)
        v = wrist - S
        dist = np.linalg.norm(v)
        dist = min(max(dist, abs(self.upper_arm - self.forearm) + 1e-6), self.reach - 1e-6)
        u = v / np.linalg.norm(v)
        side = 1.0 if hand == "L" else -1.0
        pref = -UP + 0.6 * side * self.left - 0.3 * self.forward
        n = pref - np.dot(pref, u) * u
        if np.linalg.norm(n) < 1e-9:
            n = self.left - np.dot(self.left, u) * u
        n /= np.linalg.norm(n)
        a, b = self.upper_arm, self.forearm
        cos_b = (a * a + dist * dist - b * b) / (2 * a * dist)
        beta = math.acos(min(1.0, max(-1.0, cos_b)))
        return S + a * (math.cos(beta) * u + math.sin(beta) * n)

    def rest_wrist(self, hand, style=0.0):
        """Relaxed wrist position; ``style`` in [0, 1] goes from hanging to forearm raised."""
        side = 1.0 if hand == "L" else -1.0
        hang = self.anchor(0.92, side * 0.24, 0.08)
        front = self.anchor(1.12, side * 0.16, 0.28)
        return hang + (front - hang) * style


# ---------------------------------------------------------------- trajectories

@dataclass
class Segment:
    """Wrist motion from the pose ``start`` to the pose ``end`` over [t0, t1].

    Poses are callables of time so they can follow the moving robot arm.
    """

    t0: float
    t1: float
    start: object
    end: object

    def at(self, t):
        if self.t1 <= self.t0:
            return self.end(t)
        s = min_jerk((t - self.t0) / (self.t1 - self.t0))
        a = self.start(t)
        return a + (self.end(t) - a) * s


class Path:
    def __init__(self, first):
        self.segments = []
        self.first = first

    def hold(self, t0, t1, pose):
        self.segments.append(Segment(t0, t1, pose, pose))

    def move(self, t0, t1, start, end):
        self.segments.append(Segment(t0, t1, start, end))

    def at(self, t):
        pose = self.first
        for seg in self.segments:
            if t < seg.t0:
                break
            if t <= seg.t1:
                return seg.at(t)
            pose = seg.end
        return pose(t)


@dataclass
class Fixation:
    t0: float
    target: tuple   # ("hand", "L"), ("poi", name) or ("far", index)


# ---------------------------------------------------------------- generator

class _World:
    """Per-trace geometry cache: robot posture over time and pad frames."""

    def __init__(self, env, q_of_t):
        self.env = env
        self.q_of_t = q_of_t
        self._cache = {}
        self._normals = np.array([s.mount[:3, 2] for s in env.layout.sensors])

    def pads(self, t):
        key = round(t, 9)
        if key not in self._cache:
            q = self.q_of_t(t)
            frames = robot_frames(self.env.robot, q)
            pos = sensor_world_positions(self.env.layout, frames)
            nrm = np.array([frames[s.arm][s.link][:3, :3] @ n
                            for s, n in zip(self.env.layout.sensors, self._normals)])
            self._cache[key] = (q, pos, nrm)
        return self._cache[key]


def _hand_pose_at_pad(world, actor, hand, sensor, lift, hand_len):
    def pose(t):
        _, pos, nrm = world.pads(t)
        contact = pos[sensor] + nrm[sensor] * (0.01 + lift)
        toward = actor.shoulder(hand) - contact
        toward /= np.linalg.norm(toward)
        d = 0.5 * nrm[sensor] + toward
        return contact + hand_len * d / np.linalg.norm(d)
    return pose


def _const(p):
    p = np.asarray(p, dtype=float)
    return lambda t: p


class Generator:
    def __init__(self, env, spec):
        self.env = env
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        self.sched = dict(spec.schedule)

    # -- helpers --------------------------------------------------------

    def _u(self, lo, hi):
        return float(self.rng.uniform(lo, hi))

    def _sched(self, key, default):
        return self.sched.setdefault(key, default)

    def _make_actor(self, facing=math.pi):
        s = self.spec
        return Actor(position=np.array([self._u(1.03, 1.12), self._u(-0.12, 0.12), 0.0]),
                     facing=facing + self._u(-0.15, 0.15),
                     upper_arm=s.upper_arm, forearm=s.forearm, shoulder_width=s.shoulder_width)

    def _reachable_pads(self, world, actor, hand, hand_len=0.085, lift=0.0):
        out = []
        for sid in range(self.env.layout.count):
            w = _hand_pose_at_pad(world, actor, hand, sid, lift, hand_len)(0.0)
            if actor.reachable(hand, w):
                out.append(sid)
        return out

    def _pick_pad(self, world, actor, hand, exclude=()):
        requested = self.sched.get("sensor")
        pads = self._reachable_pads(world, actor, hand)
        if requested is not None and hand == self.sched.get("hand", hand):
            if requested not in pads:
                raise GenerationError(f"sensor {requested} is out of reach for the {hand} hand")
            return requested
        pads = [p for p in pads if p not in exclude]
        if not pads:
            raise GenerationError(f"no pad within reach of the {hand} hand")
        return int(self.rng.choice(pads))

    def _neighbours(self, world, sid, radius):
        _, pos, _ = world.pads(0.0)
        d = np.linalg.norm(pos - pos[sid], axis=1)
        return [int(j) for j in np.flatnonzero(d < radius) if j != sid]

    def _fixations(self, t0, t1, choices, weights):
        out = []
        t = t0
        while t < t1:
            k = int(self.rng.choice(len(choices), p=np.asarray(weights) / np.sum(weights)))
            out.append(Fixation(t, choices[k]))
            t += self._u(0.5, 2.0)
        return out

    # -- scenario builders -----------------------------------------------

    def build(self):
        s = self.spec
        T = s.duration
        kind = s.kind
        home = self.env.home
        dof = len(home)

        guide = np.zeros(dof)
        self.plan = {"contacts": [], "distraction": [], "occlusion": [], "mini_skeleton": [],
                     "push": None}
        world_static = _World(self.env, lambda t: home)

        if kind in ("manipulation", "distracted", "mixed"):
            actor = self._make_actor()
            hand = self._sched("hand", "L" if self.rng.random() < 0.5 else "R")
            other = "R" if hand == "L" else "L"
            pad = self._pick_pad(world_static, actor, hand)
            self.sched["sensor"] = pad
            arm = self.env.layout.sensors[pad].arm
            if kind == "manipulation":
                c0 = self._sched("contact", [self._u(0.8, 1.4), T - self._u(0.5, 1.0)])
            elif kind == "distracted":
                c0 = self._sched("contact", [self._u(0.5, 0.9), T - self._u(0.0, 0.3)])
                span = c0[1] - c0[0]
                a = c0[0] + self._u(0.25, 0.35) * span
                self._sched("distraction", [[a, min(c0[1], a + self._u(0.4, 0.5) * span)]])
            else:
                c0 = self._sched("contact", [self._u(2.6, 3.4), min(T, self._u(4.2, 4.8))])
            t_on, t_off = c0
            # the user drags the arm while in contact
            sl = self.env.robot.joint_slice(arm)
            guide[sl] = self.rng.uniform(-0.12, 0.12, sl.stop - sl.start)

            def q_of_t(t, t_on=t_on, t_off=t_off):
                return home + guide * min_jerk((t - t_on) / max(t_off - t_on, 1e-9))

            world = _World(self.env, q_of_t)
            hand_len = self._u(0.07, 0.10)
            touch = _hand_pose_at_pad(world, actor, hand, pad, 0.0, hand_len)
            hover = _hand_pose_at_pad(world, actor, hand, pad, self._u(0.0, 0.04), hand_len)
            rest = _const(actor.rest_wrist(hand, self._u(0.0, 1.0)))
            path = Path(rest)
            if kind == "mixed":
                h0 = self._u(0.3, 0.8)
                path.move(h0, h0 + 0.7, rest, hover)
                path.hold(h0 + 0.7, t_on - 0.35, hover)
                path.move(t_on - 0.35, t_on, hover, touch)
            else:
                reach_t = min(self._u(0.6, 1.0), t_on)
                path.move(t_on - reach_t, t_on - 0.25 * reach_t, rest, hover)
                path.move(t_on - 0.25 * reach_t, t_on, hover, touch)
            path.hold(t_on, t_off, touch)
            if t_off < T:
                back = min(self._u(0.6, 1.0), T - t_off)
                path.move(t_off, t_off + 0.3 * back, touch, hover)
                path.move(t_off + 0.3 * back, t_off + back, hover, rest)
            paths = {hand: path, other: Path(_const(actor.rest_wrist(other, self._u(0.0, 1.0))))}
            pads = [pad]
            if self.rng.random() < 0.4:
                pads += [j for j in self._neighbours(world_static, pad, 0.085)
                         if self.rng.random() < 0.5][:1]
            self.plan["contacts"].append((t_on, t_off, pads, HAND_KEYPOINTS[hand]))
            force = s.push_force if s.push_force is not None else self._u(6.0, 10.0)
            direction = np.array([0.0, self.rng.choice([-1.0, 1.0]), self._u(-0.3, 0.3)])
            self.plan["push"] = (t_on, t_off, pad, arm, force * direction / np.linalg.norm(direction),
                                 "ramp")
            for iv in self.sched.get("distraction", []):
                self.plan["distraction"].append(tuple(iv))
            if kind != "idle" and self.rng.random() < 0.3 and "occlusion" not in self.sched:
                o = self._u(t_on, max(t_on, t_off - 0.6))
                self.sched["occlusion"] = [[o, min(t_off, o + self._u(0.3, 0.6))]]
            self.occluded_hand = hand
            attend = [("hand", hand), ("poi", "part"), ("poi", "monitor")]
            gaze = self._fixations(0.0, T, attend, [0.6, 0.25, 0.15])
            self.focus_hand = hand

        elif kind == "collision":
            actor = self._make_actor(facing=0.0)
            world = world_static
            _, pos, nrm = world.pads(0.0)
            c0 = self._sched("contact", [self._u(0.4, 1.2), None])
            if c0[1] is None:
                c0[1] = min(T, c0[0] + self._u(2.0, 2.8))
            t_on, t_off = c0
            side = self._sched("hip", "l_hip" if self.rng.random() < 0.5 else "r_hip")
            candidates = [j for j in range(len(pos)) if 0.85 <= pos[j][2] <= 1.1 and pos[j][0] > 0.45]
            if not candidates:
                raise GenerationError("no pad at hip height")
            pad = self._sched("sensor", int(self.rng.choice(candidates)))
            lateral = 0.14 if side == "l_hip" else -0.14
            # place the actor so the hip sits just outside the pad at contact
            target_hip = pos[pad] + np.array([0.06, 0.0, 0.0])
            start_hip = target_hip + np.array([self._u(0.25, 0.4), 0.0, 0.0])
            crouch = target_hip[2] - 0.97
            actor.crouch = crouch

            def place(hip):
                return hip - UP * (0.97 + crouch) - actor.left * lateral

            base_start, base_end = place(start_hip), place(target_hip)
            self.actor_path = Path(_const(base_start))
            self.actor_path.move(max(0.0, t_on - 0.8), t_on, _const(base_start), _const(base_end))
            self.actor_path.hold(t_on, t_off, _const(base_end))
            if t_off < T:
                self.actor_path.move(t_off, min(T, t_off + 0.6), _const(base_end), _const(base_start))
            actor.position = base_start.copy()
            w_up = self._u(0.3, 0.45)
            w_fwd = self._u(0.45, 0.52)
            paths = {}
            for h, sgn in (("L", 1.0), ("R", -1.0)):
                lat = sgn * self._u(0.05, 0.15)
                paths[h] = Path(lambda t, lat=lat: actor.anchor(0.97 + w_up, lat, w_fwd))
            touched = [pad] + [j for j in self._neighbours(world, pad, 0.09) if self.rng.random() < 0.6]
            self.plan["contacts"].append((t_on, t_off, touched, side))
            force = s.push_force if s.push_force is not None else self._u(8.0, 12.0)
            self.plan["push"] = (t_on, t_off, pad, self.env.layout.sensors[pad].arm,
                                 np.array([-force, 0.0, 0.0]), "step")
            everything = [("hand", "L"), ("hand", "R"), ("poi", "part"), ("poi", "monitor"),
                          ("far", 0), ("far", 1), ("far", 2)]
            gaze = self._fixations(0.0, T, everything, [0.15, 0.15, 0.15, 0.15, 0.14, 0.13, 0.13])
            self.focus_hand = None
            self.occluded_hand = None

        else:  # idle: hovering without contact
            actor = self._make_actor()
            world = world_static
            paths = {}
            for h in ("L", "R"):
                rest = _const(actor.rest_wrist(h, self._u(0.0, 1.0)))
                path = Path(rest)
                t = self._u(0.0, 0.8)
                current = rest
                while t < T:
                    if self.rng.random() < 0.65:
                        pad = self._pick_pad(world, actor, h)
                        target = _hand_pose_at_pad(world, actor, h, pad, self._u(0.005, 0.05),
                                                   self._u(0.07, 0.10))
                    else:
                        target = _const(actor.rest_wrist(h, self._u(0.0, 1.0)))
                    move = self._u(0.4, 0.9)
                    dwell = self._u(0.6, 1.8)
                    path.move(t, t + move, current, target)
                    path.hold(t + move, t + move + dwell, target)
                    current = target
                    t += move + dwell
                paths[h] = path
            looks = [("hand", "L"), ("hand", "R"), ("poi", "part"), ("poi", "monitor"), ("far", 0),
                     ("far", 1)]
            gaze = self._fixations(0.0, T, looks, [0.25, 0.25, 0.2, 0.15, 0.08, 0.07])
            self.focus_hand = None
            self.occluded_hand = None
            q_of_t = lambda t: home

        for iv in self.sched.get("occlusion", []):
            self.plan["occlusion"].append(tuple(iv))
        for iv in self.sched.get("mini_skeleton", []):
            self.plan["mini_skeleton"].append(tuple(iv))
        if "distraction" in self.sched and kind == "distracted":
            gaze = self._distract(gaze, self.plan["distraction"])

        self.actor = actor
        self.world = world
        self.paths = paths
        self.gaze_plan = gaze
        if not hasattr(self, "actor_path"):
            self.actor_path = None
        return self

    def _distract(self, fixations, intervals):
        out = []
        for f in fixations:
            if not any(a <= f.t0 < b for a, b in intervals):
                out.append(f)
        for a, b in intervals:
            t = a
            while t < b:
                out.append(Fixation(t, ("far", int(self.rng.integers(len(FAR_TARGETS))))))
                t += self._u(0.6, 1.5)
            out.append(Fixation(b, ("hand", self.focus_hand)))
        out.sort(key=lambda f: f.t0)
        return out

    # -- sampling --------------------------------------------------------

    def _true_contacts(self, t):
        active = {}
        for t0, t1, pads, part in self.plan["contacts"]:
            if t0 <= t < t1:
                for p in pads:
                    active[p] = part
        return active

    def _held_gamma(self, t, phases):
        n = self.env.layout.count
        g = np.zeros(n, dtype=int)
        period = 1.0 / self.spec.sensor_scan_hz
        for arm, phase in phases.items():
            k = math.floor((t - phase) / period)
            t_scan = phase + k * period
            if t_scan < 0:
                continue
            for p in self._true_contacts(t_scan):
                if self.env.layout.sensors[p].arm == arm:
                    g[p] = 1
        return g

    def _fixation(self, t):
        current = self.gaze_plan[0]
        previous = None
        for f in self.gaze_plan:
            if f.t0 <= t:
                previous, current = current, f
        return current, previous

    def _target_point(self, target, body):
        kind, what = target
        if kind == "hand":
            return body[HAND_KEYPOINTS[what]]
        if kind == "poi":
            poi = next(p for p in self.env.pois.pois if p.name == what)
            return np.asarray(poi.world, dtype=float)
        return FAR_TARGETS[what]

    def generate(self):
        self.build()
        s = self.spec
        env = self.env
        cam = env.camera
        n_frames = int(math.floor(s.duration * s.frame_rate + 1e-9))
        period = 1.0 / s.sensor_scan_hz
        phases = {a: self._u(0.0, period) for a in env.robot.arm_names}
        frames = []
        sigma_g = math.radians(s.gaze_sigma_deg)
        for k in range(n_frames):
            t = k / s.frame_rate
            q, pos, nrm = self.world.pads(t)
            if self.actor_path is not None:
                self.actor.position = self.actor_path.at(t)
            body = self.actor.torso()
            for h in ("L", "R"):
                w = self.paths[h].at(t)
                body[HAND_KEYPOINTS[h]] = w
                body[("l_" if h == "L" else "r_") + "elbow"] = self.actor.elbow(h, w)

            gamma = self._held_gamma(t, phases)

            # label oracle
            fix, prev_fix = self._fixation(t)
            attending = fix.target[0] != "far"
            hand_touch = False
            names = list(body)
            pts = np.array([body[n] for n in names])
            for j in np.flatnonzero(gamma):
                nearest = names[int(np.argmin(np.linalg.norm(pts - pos[j], axis=1)))]
                if nearest in ("l_wrist", "r_wrist"):
                    hand_touch = True
            label = int(hand_touch and attending)

            keypoints = self._observe_keypoints(body, t)
            gaze = self._observe_gaze(body, fix, prev_fix, t, sigma_g)
            tau = self._external_torque(t, q, pos)
            frames.append(TraceFrame(t=t, gamma=[int(x) for x in gamma], keypoints=keypoints,
                                     gaze=gaze, q=[float(x) for x in q], label=label,
                                     tau_ext=[float(x) for x in tau]))
        header = make_header(env, frame_rate=s.frame_rate, scenario=s.to_dict(),
                             events={"contact": [[a, b] for a, b, _, _ in self.plan["contacts"]],
                                     "distraction": [list(iv) for iv in self.plan["distraction"]],
                                     "occlusion": [list(iv) for iv in self.plan["occlusion"]],
                                     "mini_skeleton": [list(iv) for iv in self.plan["mini_skeleton"]]})
        header["scenario"]["schedule"] = _jsonable(self.sched)
        return TraceFile(header, frames)

    def _observe_keypoints(self, body, t):
        s = self.spec
        cam = self.env.camera
        occluded = any(a <= t < b for a, b in self.plan["occlusion"]) and self.occluded_hand
        ghost = any(a <= t < b for a, b in self.plan["mini_skeleton"])
        out = {}
        for name in KEYPOINT_NAMES:
            u, v, z = cam.project(body[name])
            u += self.rng.normal(0.0, s.pixel_sigma)
            v += self.rng.normal(0.0, s.pixel_sigma)
            z = max(0.05, z + self.rng.normal(0.0, s.depth_sigma))
            out[name] = [float(u), float(v), float(self._u(0.6, 1.0)), float(z)]
        if occluded:
            self._occlude(out, HAND_KEYPOINTS[self.occluded_hand])
        if ghost:
            out = self._ghost(out)
        return out

    def _occlude(self, kps, wrist):
        """Depth of the wrist snaps onto the nearer occluding surface, staying plausible."""
        elbow = wrist.replace("wrist", "elbow")
        jump = self._u(0.1, 0.3)
        k = self.env.camera.intrinsics
        for _ in range(8):
            trial = dict(kps)
            u, v, c, z = kps[wrist]
            trial[wrist] = [u, v, c, float(max(0.05, z - jump))]
            sk = project_skeleton(Skeleton({n: Keypoint2D(*trial[n]) for n in (wrist, elbow)}),
                                  self.env.camera)
            length = np.linalg.norm(sk.keypoints3d[wrist] - sk.keypoints3d[elbow])
            lo, hi = self.env.bounds.bounds.get(("l_" if wrist[0] == "l" else "r_") + "forearm",
                                                (0.0, np.inf))
            if lo + 0.01 <= length <= hi - 0.01:
                kps.update(trial)
                return
            jump *= 0.5

    def _ghost(self, kps):
        """Replace the person by a spurious 10 %-scale skeleton elsewhere in the image."""
        cu, cv = self._u(80, 560), self._u(60, 200)
        ref_u, ref_v = kps["neck"][0], kps["neck"][1]
        out = {}
        for n, (u, v, c, z) in kps.items():
            out[n] = [cu + 0.1 * (u - ref_u), cv + 0.1 * (v - ref_v), c, z]
        return out

    def _observe_gaze(self, body, fix, prev_fix, t, sigma):
        cam = self.env.camera
        hu, hv, _ = cam.project(body["head"])
        origin = np.array([hu, hv])

        def direction(target):
            pu, pv, _ = cam.project(self._target_point(target, body))
            d = np.array([pu, pv]) - origin
            return math.atan2(d[1], d[0])

        ang = direction(fix.target)
        # a saccade spends one frame half-way between the two fixations
        if prev_fix is not None and 0.0 <= t - fix.t0 < 1.0 / self.spec.frame_rate:
            a0 = direction(prev_fix.target)
            diff = math.atan2(math.sin(ang - a0), math.cos(ang - a0))
            ang = a0 + 0.5 * diff
        ang += self.rng.normal(0.0, sigma)
        origin = origin + self.rng.normal(0.0, self.spec.pixel_sigma, 2)
        return {"origin": [float(origin[0]), float(origin[1])],
                "direction": [math.cos(ang), math.sin(ang)]}

    def _external_torque(self, t, q, pos):
        dof = self.env.robot.dof
        push = self.plan.get("push")
        if push is None:
            return np.zeros(dof)
        t_on, t_off, pad, arm, force, profile = push
        if not t_on <= t < t_off:
            return np.zeros(dof)
        if profile == "ramp":
            scale = (t - t_on) / max(t_off - t_on, 1e-9)
        else:
            scale = min(1.0, (t - t_on) / 0.3)
        link = self.env.layout.sensors[pad].link
        J = point_jacobian(self.env.robot, q, arm, link, pos[pad])
        return J.T @ (scale * force)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def generate(spec, env):
    """Labeled trace for ``spec``; identical for identical (spec, config)."""
    return Generator(env, spec).generate()


# ---------------------------------------------------------------- corpus

DEFAULT_MIX = (
    ("manipulation", 10),
    ("distracted", 9),
    ("collision", 7),
    ("idle", 8),
    ("mixed", 3),
)


SPEC_DEFAULT_KEYS = ("frame_rate", "sensor_scan_hz", "pixel_sigma", "gaze_sigma_deg", "depth_sigma")


def spec_defaults(env):
    """Simulator settings from the ``simgen`` config section."""
    return {k: env.simgen[k] for k in SPEC_DEFAULT_KEYS if k in env.simgen}


def corpus_mix(env):
    mix = env.simgen.get("corpus_mix")
    return tuple((m["kind"], int(m["count"])) for m in mix) if mix else DEFAULT_MIX


def corpus_specs(seed=1, mix=None, target_frames=3000, frame_rate=15.0, **noise):
    """Scenario specs for a corpus of about ``target_frames`` frames."""
    mix = mix or DEFAULT_MIX
    n = sum(c for _, c in mix)
    duration = round(target_frames / n / frame_rate, 3)
    specs = []
    i = 0
    for kind, count in mix:
        for _ in range(count):
            specs.append(ScenarioSpec(kind=kind, duration=duration, seed=seed * 1000 + i,
                                      frame_rate=frame_rate, **noise))
            i += 1
    return specs


def build_corpus(specs, env, scaling=None):
    """Generate traces and assemble the labeled dataset.

    Returns (dataset, scaling, traces, summary).
    """
    from .traces import assemble_dataset

    specs = list(specs)
    if len({s.kind for s in specs}) < 2:
        raise GenerationError("a corpus needs at least two scenario kinds")
    traces = [generate(s, env) for s in specs]
    data, scaling = assemble_dataset(traces, env, scaling)
    counts = data.class_counts()
    if min(counts.values()) == 0:
        raise GenerationError("corpus contains a single class")
    summary = {"traces": len(traces), "frames": data.n_samples, **counts,
               "positive_fraction": counts["intentional"] / data.n_samples}
    return data, scaling, traces, summary


def replay_specs(seed=7):
    """Longer demonstration scenarios for closed-loop replay."""
    return {
        "distracted": ScenarioSpec(kind="distracted", duration=12.0, seed=seed,
                                   schedule={"contact": [1.0, 11.6], "distraction": [[4.0, 9.0]]},
                                   push_force=8.0),
        "collision": ScenarioSpec(kind="collision", duration=6.0, seed=seed,
                                  schedule={"contact": [1.0, 5.0]}, push_force=12.0),
    }
