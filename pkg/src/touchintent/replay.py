"""Closed-loop replay of a trace through the pipeline and the impedance controller.

Features come from the recorded joint configuration of the trace; the
controller drives a separate simulated arm that starts at the first
recorded pose and is pushed by the recorded external torques.
"""

from dataclasses import dataclass, field

import numpy as np

from .control import ImpedanceController
from .kinematics import end_effector
from .pipeline import IntentionPipeline, PipelineConfig

LOG_COLUMNS = ("t", "gamma", "d", "d_dot", "alpha", "alpha_dot", "raw_label", "raw_score",
               "smoothed", "intention", "mode", "label", "ee_x", "ee_y", "ee_z", "ee_speed",
               "force", "deviation")


@dataclass
class ReplayLog:
    rows: list
    verdict: dict
    arm: str = None
    header: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([r[name] for r in self.rows])


def _touched_arm(trace, env):
    """Arm whose pads are active most often; the first arm when nothing is touched."""
    counts = {a: 0 for a in env.robot.arm_names}
    for fr in trace.frames:
        for sid, g in enumerate(fr.gamma):
            if g:
                counts[env.layout.sensors[sid].arm] += 1
    return max(counts, key=lambda a: (counts[a], -env.robot.arm_names.index(a)))


def replay(trace, env, model, control=True, window_s=None):
    if not trace.frames:
        raise ValueError("cannot replay an empty trace")
    cfg = PipelineConfig(window_s if window_s is not None else env.window_s, env.threshold)
    pipe = IntentionPipeline(env, model, cfg)
    q0 = np.asarray(trace.frames[0].q, dtype=float)
    ctrl = ImpedanceController(q0, env.gains, env.inertia, env.substeps, enabled=control)
    arm = _touched_arm(trace, env)
    ee0 = end_effector(env.robot, q0, arm)
    rate = trace.header.get("frame_rate", 15.0)
    prev_t, prev_ee = None, ee0
    rows = []
    for fr in trace.frames:
        res = pipe.step(fr)
        dt = 1.0 / rate if prev_t is None else fr.t - prev_t
        tau_ext = np.zeros(env.robot.dof) if fr.tau_ext is None else np.asarray(fr.tau_ext, dtype=float)
        state = ctrl.step(res.intention, tau_ext, dt)
        ee = end_effector(env.robot, state.q, arm)
        f = res.features
        rows.append({
            "t": fr.t, "gamma": f.gamma, "d": f.d, "d_dot": f.d_dot, "alpha": f.alpha,
            "alpha_dot": f.alpha_dot, "raw_label": int(res.raw_label), "raw_score": float(res.raw_score),
            "smoothed": res.smoothed, "intention": int(res.intention),
            "mode": ctrl.stop.mode if control else "compliant",
            "label": fr.label,
            "ee_x": float(ee[0]), "ee_y": float(ee[1]), "ee_z": float(ee[2]),
            "ee_speed": float(np.linalg.norm(ee - prev_ee) / dt),
            # the commanded joint torque norm stands in for the end-effector force
            "force": float(np.linalg.norm(state.tau)),
            "deviation": float(np.linalg.norm(ee - ee0)),
        })
        prev_t, prev_ee = fr.t, ee
    log = ReplayLog(rows, {}, arm, dict(trace.header))
    log.verdict = verdict(log, control)
    return log


def interval_deviation(log, a, b):
    """Largest end-effector displacement within [a, b] relative to its position at a."""
    t = log.column("t")
    idx = np.flatnonzero((t >= a - 1e-9) & (t <= b + 1e-9))
    if idx.size == 0:
        return 0.0
    P = np.column_stack([log.column("ee_x"), log.column("ee_y"), log.column("ee_z")])[idx]
    return float(np.max(np.linalg.norm(P - P[0], axis=1)))


def verdict(log, control):
    events = log.header.get("events", {})
    kind = log.header.get("scenario", {}).get("kind")
    intention = log.column("intention")
    v = {"kind": kind, "control": bool(control), "frames": len(log.rows),
         "intentional_frames": int(intention.sum()),
         "max_deviation": float(log.column("deviation").max())}
    labels = [r["label"] for r in log.rows]
    if all(l is not None for l in labels):
        v["raw_accuracy"] = float(np.mean(log.column("raw_label") == np.array(labels)))
    dist = events.get("distraction") or []
    if dist:
        t = log.column("t")
        stiff = np.array([r["mode"] == "stiff" for r in log.rows])
        v["distraction"] = [{
            "interval": [a, b],
            "deviation": interval_deviation(log, a, b),
            "stiff_fraction": float(stiff[(t >= a) & (t <= b)].mean()) if np.any((t >= a) & (t <= b)) else 0.0,
        } for a, b in dist]
    if kind == "collision":
        v["unintentional_throughout"] = bool(intention.sum() == 0)
    return v
