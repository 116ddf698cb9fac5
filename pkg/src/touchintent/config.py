"""Loading the geometry/controller configuration file.

The file is JSON with a top-level ``format_version``. Sections:

``robot.arms``
    ordered list of ``{name, base: {xyz, rpy}, links: [{axis, offset: {xyz, rpy}, limits}], home}``
``sensors``
    ``[{id, arm, link, xyz, rpy}]`` mount poses in the link frame
``camera``
    ``{intrinsics: {fx, fy, cx, cy}, pose: {xyz, rpy}, width, height}``;
    the pose maps camera coordinates (x right, y down, z forward) to world
``limb_bounds``, ``max_missing_fraction``
    skeleton plausibility check
``pois``
    ``[{name, kind, pixel?, world?}]``
``gains``, ``pipeline``, ``scaling_defaults``, ``simgen``
    controller presets, smoothing settings, fallback feature scaling and
    simulator defaults

Lengths are meters, angles radians, times seconds.
"""

from dataclasses import dataclass
from importlib import resources
import hashlib
import json
import os

import numpy as np

from .control import ImpedanceGains
from .features import Poi, PoiSet, ScalingParams
from .kinematics import Robot, chain_from_dict, layout_from_dict
from .perception import Camera, CameraIntrinsics, LimbLengthBounds
from .transforms import from_xyz_rpy

CONFIG_FORMAT_VERSION = 1
CONFIG_ENV_VAR = "CONFIG_PATH"


class ConfigError(ValueError):
    pass


@dataclass
class Environment:
    """Everything geometric the pipeline needs besides the model."""

    name: str
    robot: Robot
    layout: object
    camera: Camera
    image_size: tuple
    bounds: LimbLengthBounds
    max_missing_fraction: float
    pois: PoiSet
    home: np.ndarray
    gains: ImpedanceGains
    inertia: float
    substeps: int
    window_s: float
    threshold: float
    default_scaling: ScalingParams
    simgen: dict
    raw: dict

    def identifier(self, *sections):
        blob = json.dumps({s: self.raw.get(s) for s in sections}, sort_keys=True)
        return f"{self.name}:{hashlib.sha256(blob.encode()).hexdigest()[:12]}"


def default_config_path():
    return resources.files("touchintent") / "data" / "default_config.json"


def resolve_config_path(path=None):
    if path:
        return path
    return os.environ.get(CONFIG_ENV_VAR) or default_config_path()


def load_config(path=None):
    path = resolve_config_path(path)
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    return environment_from_dict(raw)


def environment_from_dict(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if raw.get("format_version") != CONFIG_FORMAT_VERSION:
        raise ConfigError(f"unsupported config format_version {raw.get('format_version')!r}")
    try:
        arms = {}
        home = []
        for a in raw["robot"]["arms"]:
            arms[a["name"]] = chain_from_dict(a)
            home.extend(a.get("home", [0.0] * len(a["links"])))
        robot = Robot(arms)
        layout = layout_from_dict(raw["sensors"])
        layout.validate(robot)

        cam = raw["camera"]
        camera = Camera(CameraIntrinsics(**cam["intrinsics"]),
                        from_xyz_rpy(cam["pose"]["xyz"], cam["pose"]["rpy"]))
        bounds = LimbLengthBounds({k: tuple(v) for k, v in raw["limb_bounds"].items()})
        pois = PoiSet(tuple(
            Poi(name=p["name"], kind=p["kind"],
                pixel=None if p.get("pixel") is None else tuple(p["pixel"]),
                world=None if p.get("world") is None else tuple(p["world"]))
            for p in raw["pois"]))
        g = raw["gains"]
        gains = ImpedanceGains.uniform(robot.dof, g["kp_low"], g["kp_high"], g["kd_low"], g["kd_high"])
        pipe = raw.get("pipeline", {})
        env = Environment(
            name=raw.get("name", "config"),
            robot=robot, layout=layout, camera=camera,
            image_size=(cam.get("width", 640), cam.get("height", 480)),
            bounds=bounds,
            max_missing_fraction=raw.get("max_missing_fraction", 0.3),
            pois=pois,
            home=np.asarray(home, dtype=float),
            gains=gains,
            inertia=g.get("inertia", 1.0),
            substeps=g.get("substeps", 20),
            window_s=pipe.get("window_s", 1.0),
            threshold=pipe.get("threshold", 0.5),
            default_scaling=ScalingParams.from_dict(raw["scaling_defaults"]),
            simgen=raw.get("simgen", {}),
            raw=raw,
        )
    except (KeyError, TypeError) as e:
        raise ConfigError(f"malformed config: missing or invalid {e}") from None
    if env.home.shape != (robot.dof,):
        raise ConfigError("home posture length does not match the robot")
    return env
