"""Regenerate src/touchintent/data/default_config.json.

Two 7-DOF arms (shoulder yaw/pitch, elbow roll/pitch, wrist roll/pitch/roll)
with 23 tactile pads each: four pads around each long link, two on either
side of each short link and one on the gripper cuff.
"""

import json
import math
from pathlib import Path

import numpy as np

from touchintent.kinematics import ring_mounts
from touchintent.perception import Camera, CameraIntrinsics
from touchintent.transforms import from_xyz_rpy, make_transform, to_xyz_rpy

OUT = Path(__file__).resolve().parents[1] / "src" / "touchintent" / "data" / "default_config.json"

AXES = ["z", "y", "x", "y", "x", "y", "x"]
LENGTHS = [0.08, 0.20, 0.22, 0.08, 0.22, 0.08, 0.14]
LONG = {1, 2, 4, 6}
LIMITS = [(-1.7, 1.7), (-1.2, 1.2), (-3.0, 3.0), (-0.1, 2.6), (-3.0, 3.0), (-1.5, 2.0), (-3.0, 3.0)]
UNIT = {"x": [1.0, 0.0, 0.0], "y": [0.0, 1.0, 0.0], "z": [0.0, 0.0, 1.0]}
PAD_RADIUS = 0.055


def r(v):
    return [round(float(x), 12) for x in v]


def arm(name, side):
    links = [{"axis": UNIT[a], "offset": {"xyz": [l, 0.0, 0.0], "rpy": [0.0, 0.0, 0.0]},
              "limits": list(lim)} for a, l, lim in zip(AXES, LENGTHS, LIMITS)]
    home = [side * 0.15, -0.3, 0.0, 1.5, 0.0, -0.6, 0.0]
    return {"name": name,
            "base": {"xyz": [0.06, side * 0.26, 1.2], "rpy": [0.0, 0.0, 0.0]},
            "links": links, "home": home}


def sensors(arms):
    out = []
    sid = 0
    for a in arms:
        for i, l in enumerate(a["links"]):
            off = from_xyz_rpy(l["offset"]["xyz"], l["offset"]["rpy"])
            mounts = ring_mounts(off, 4 if i in LONG else 2, PAD_RADIUS,
                                 angle0=0.0 if i in LONG else math.pi / 2)
            if i == len(a["links"]) - 1:
                # cuff pad at the tip of the gripper
                mounts.append(make_transform(translation=[0.0, 0.0, 0.0]))
            for M in mounts:
                xyz, rpy = to_xyz_rpy(M)
                out.append({"id": sid, "arm": a["name"], "link": i, "xyz": r(xyz), "rpy": r(rpy)})
                sid += 1
    return out


def camera():
    tilt = math.radians(28.0)
    forward = np.array([math.cos(tilt), 0.0, -math.sin(tilt)])
    right = np.array([0.0, -1.0, 0.0])
    down = np.cross(forward, right)
    T = make_transform(np.column_stack([right, down, forward]), [-0.5, 0.0, 2.0])
    xyz, rpy = to_xyz_rpy(T)
    return {"intrinsics": {"fx": 615.0, "fy": 615.0, "cx": 320.0, "cy": 240.0},
            "pose": {"xyz": r(xyz), "rpy": r(rpy)}, "width": 640, "height": 480}


def main():
    arms = [arm("left", 1.0), arm("right", -1.0)]
    cam = camera()
    cam_obj = Camera(CameraIntrinsics(**cam["intrinsics"]),
                     from_xyz_rpy(cam["pose"]["xyz"], cam["pose"]["rpy"]))
    statics = {"monitor": [0.5, -0.5, 1.4], "part": [0.75, 0.0, 0.75]}
    pois = [{"name": "hand_left", "kind": "hand-L"}, {"name": "hand_right", "kind": "hand-R"}]
    for name, w in statics.items():
        u, v, _ = cam_obj.project(np.array(w))
        pois.append({"name": name, "kind": "static", "pixel": r([u, v]), "world": w})
    doc = {
        "format_version": 1,
        "name": "demo",
        "robot": {"arms": arms},
        "sensors": sensors(arms),
        "camera": cam,
        "limb_bounds": {"l_upper_arm": [0.2, 0.45], "r_upper_arm": [0.2, 0.45],
                        "l_forearm": [0.2, 0.45], "r_forearm": [0.2, 0.45],
                        "shoulder_width": [0.25, 0.55]},
        "max_missing_fraction": 0.3,
        "pois": pois,
        "gains": {"kp_low": 5.0, "kp_high": 200.0, "kd_low": 2.0, "kd_high": 20.0,
                  "inertia": 1.0, "substeps": 20},
        "pipeline": {"window_s": 1.0, "threshold": 0.5},
        "scaling_defaults": {"d_max": 0.6, "d_dot_max": 2.0, "alpha_max": math.pi,
                             "alpha_dot_max": 10.0},
        "simgen": {"frame_rate": 15.0, "sensor_scan_hz": 2.5,
                   "pixel_sigma": 1.5, "gaze_sigma_deg": 4.0, "depth_sigma": 0.008,
                   "corpus_mix": [{"kind": k, "count": c} for k, c in
                                  [("manipulation", 10), ("distracted", 9), ("collision", 7),
                                   ("idle", 8), ("mixed", 3)]]},
    }
    OUT.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {OUT} ({len(doc['sensors'])} sensors)")


if __name__ == "__main__":
    main()
