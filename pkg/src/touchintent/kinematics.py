"""Serial-chain forward kinematics and tactile sensor placement.

Joint convention: each link frame is obtained from its parent by first
rotating about the joint axis by ``q[i]`` and then applying the link's
fixed offset transform::

    F_i = F_{i-1} @ Rot(axis_i, q_i) @ Offset_i

``F_{-1}`` is the chain's base transform in world coordinates. Link frame
``i`` therefore sits at the distal end of link ``i`` and depends only on
joints ``0..i``. Sensor mount transforms are expressed in that link frame.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .transforms import axis_angle, from_xyz_rpy, is_rigid


class KinematicsError(ValueError):
    pass


class InputShapeError(KinematicsError):
    pass


class LayoutError(KinematicsError):
    pass


@dataclass(frozen=True)
class Link:
    axis: np.ndarray
    offset: np.ndarray
    joint_type: str = "revolute"


@dataclass(frozen=True)
class KinematicChain:
    links: tuple
    base: np.ndarray = field(default_factory=lambda: np.eye(4))
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        if len(self.links) < 1:
            raise KinematicsError("chain needs at least one link")
        for i, link in enumerate(self.links):
            if link.joint_type != "revolute":
                raise KinematicsError(f"link {i}: only revolute joints are supported")
            if abs(np.linalg.norm(link.axis) - 1.0) > 1e-9:
                raise KinematicsError(f"link {i}: joint axis is not unit norm")
            if not is_rigid(link.offset):
                raise KinematicsError(f"link {i}: offset is not a rigid transform")
        if not is_rigid(self.base):
            raise KinematicsError("base is not a rigid transform")

    @property
    def dof(self):
        return len(self.links)

    def reach(self):
        """Upper bound on the distance of any link origin from the base origin."""
        return float(sum(np.linalg.norm(l.offset[:3, 3]) for l in self.links))

    def within_limits(self, q):
        q = np.asarray(q, dtype=float)
        if self.lower is not None and np.any(q < self.lower):
            return False
        if self.upper is not None and np.any(q > self.upper):
            return False
        return True


@dataclass(frozen=True)
class SensorMount:
    id: int
    arm: str
    link: int
    mount: np.ndarray


@dataclass(frozen=True)
class SensorLayout:
    sensors: tuple

    def __post_init__(self):
        ids = [s.id for s in self.sensors]
        if sorted(ids) != list(range(len(ids))):
            raise LayoutError("sensor ids must be unique and dense 0..n-1")
        if ids != sorted(ids):
            object.__setattr__(self, "sensors", tuple(sorted(self.sensors, key=lambda s: s.id)))
        # flat arrays for the vectorised position lookup
        object.__setattr__(self, "_mount_points",
                           np.array([s.mount[:, 3] for s in self.sensors]).reshape(-1, 4))

    @property
    def count(self):
        return len(self.sensors)

    def validate(self, robot):
        for s in self.sensors:
            if s.arm not in robot.arms:
                raise LayoutError(f"sensor {s.id}: unknown arm {s.arm!r}")
            if not 0 <= s.link < robot.arms[s.arm].dof:
                raise LayoutError(f"sensor {s.id}: link index {s.link} out of range")


@dataclass(frozen=True)
class Robot:
    """Named serial chains; the robot-level joint vector concatenates them in order."""

    arms: dict

    @property
    def arm_names(self):
        return list(self.arms)

    @property
    def dof(self):
        return sum(c.dof for c in self.arms.values())

    def split(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise InputShapeError(f"expected {self.dof} joint values, got shape {q.shape}")
        out = {}
        i = 0
        for name, chain in self.arms.items():
            out[name] = q[i:i + chain.dof]
            i += chain.dof
        return out

    def joint_slice(self, arm):
        i = 0
        for name, chain in self.arms.items():
            if name == arm:
                return slice(i, i + chain.dof)
            i += chain.dof
        raise KeyError(arm)

    def within_limits(self, q):
        return all(self.arms[a].within_limits(qa) for a, qa in self.split(q).items())


def forward_kinematics(chain, q):
    """World-frame 4x4 transform of every link frame of ``chain`` at ``q``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.dof,):
        raise InputShapeError(f"expected {chain.dof} joint values, got shape {q.shape}")
    frames = []
    T = chain.base
    for link, qi in zip(chain.links, q):
        R = np.eye(4)
        R[:3, :3] = axis_angle(link.axis, qi)
        T = T @ R @ link.offset
        frames.append(T)
    return frames


def robot_frames(robot, q):
    return {name: forward_kinematics(robot.arms[name], qa)
            for name, qa in robot.split(q).items()}


def sensor_world_positions(layout, link_frames):
    """Cartesian sensor positions, one row per sensor id.

    ``link_frames`` maps arm name to its list of link frames (as returned
    by :func:`robot_frames`).
    """
    out = np.empty((layout.count, 3))
    for s, p in zip(layout.sensors, layout._mount_points):
        try:
            F = link_frames[s.arm][s.link]
        except (KeyError, IndexError):
            raise LayoutError(f"sensor {s.id} references missing frame {s.arm}[{s.link}]") from None
        out[s.id] = (F @ p)[:3]
    return out


def end_effector(robot, q, arm):
    return robot_frames(robot, q)[arm][-1][:3, 3].copy()


def point_jacobian(robot, q, arm, link, point):
    """Translational Jacobian (3 x robot.dof) of a world point rigidly attached to ``arm``/``link``."""
    chain = robot.arms[arm]
    qa = robot.split(q)[arm]
    J = np.zeros((3, robot.dof))
    cols = robot.joint_slice(arm)
    T = chain.base
    for i, (l, qi) in enumerate(zip(chain.links, qa)):
        if i > link:
            break
        # joint i rotates about its axis expressed in the parent frame
        axis_w = T[:3, :3] @ l.axis
        J[:, cols.start + i] = np.cross(axis_w, point - T[:3, 3])
        R = np.eye(4)
        R[:3, :3] = axis_angle(l.axis, qi)
        T = T @ R @ l.offset
    return J


def ring_mounts(offset, count, radius, angle0=0.0):
    """Mount transforms spaced evenly around the midpoint of a link.

    The link body runs from the joint (at ``-R_off^T t_off`` in the link
    frame) to the link frame origin. Each mount's z axis is the outward
    surface normal.
    """
    R_off = offset[:3, :3]
    base_pt = -R_off.T @ offset[:3, 3]
    length = np.linalg.norm(base_pt)
    if length == 0.0:
        raise LayoutError("cannot place ring sensors on a zero-length link")
    along = -base_pt / length
    helper = np.array([0.0, 0.0, 1.0]) if abs(along[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(along, helper)
    u /= np.linalg.norm(u)
    w = np.cross(along, u)
    mid = base_pt / 2.0
    mounts = []
    for k in range(count):
        phi = angle0 + 2.0 * math.pi * k / count
        n = math.cos(phi) * u + math.sin(phi) * w
        x_axis = along
        y_axis = np.cross(n, x_axis)
        T = np.eye(4)
        T[:3, :3] = np.column_stack([x_axis, y_axis, n])
        T[:3, 3] = mid + radius * n
        mounts.append(T)
    return mounts


def chain_from_dict(d):
    links = tuple(
        Link(axis=np.asarray(l["axis"], dtype=float),
             offset=from_xyz_rpy(l["offset"].get("xyz", (0, 0, 0)), l["offset"].get("rpy", (0, 0, 0))),
             joint_type=l.get("type", "revolute"))
        for l in d["links"]
    )
    base = d.get("base", {})
    lower = np.array([l.get("limits", [-math.pi, math.pi])[0] for l in d["links"]])
    upper = np.array([l.get("limits", [-math.pi, math.pi])[1] for l in d["links"]])
    return KinematicChain(links=links,
                          base=from_xyz_rpy(base.get("xyz", (0, 0, 0)), base.get("rpy", (0, 0, 0))),
                          lower=lower, upper=upper)


def layout_from_dict(entries):
    sensors = []
    for e in entries:
        if "matrix" in e:
            M = np.asarray(e["matrix"], dtype=float)
        else:
            M = from_xyz_rpy(e.get("xyz", (0, 0, 0)), e.get("rpy", (0, 0, 0)))
        sensors.append(SensorMount(id=int(e["id"]), arm=e["arm"], link=int(e["link"]), mount=M))
    return SensorLayout(tuple(sensors))
