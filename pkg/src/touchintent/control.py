"""Joint impedance control with an intention-driven stiffness switch."""

from dataclasses import dataclass, replace

import numpy as np


class ControlInputError(ValueError):
    pass


@dataclass(frozen=True)
class ArmState:
    q: np.ndarray
    q_dot: np.ndarray
    q_d: np.ndarray
    q_dot_d: np.ndarray
    tau: np.ndarray = None

    @classmethod
    def at_rest(cls, q):
        q = np.asarray(q, dtype=float)
        z = np.zeros_like(q)
        return cls(q=q.copy(), q_dot=z, q_d=q.copy(), q_dot_d=z.copy(), tau=z.copy())


@dataclass(frozen=True)
class ImpedanceGains:
    kp_low: np.ndarray
    kp_high: np.ndarray
    kd_low: np.ndarray
    kd_high: np.ndarray

    def __post_init__(self):
        for name in ("kp_low", "kp_high", "kd_low", "kd_high"):
            v = np.asarray(getattr(self, name), dtype=float)
            if np.any(v <= 0):
                raise ControlInputError(f"{name} entries must be positive")
            object.__setattr__(self, name, v)
        if np.any(self.kp_high <= self.kp_low):
            raise ControlInputError("high stiffness must exceed low stiffness entrywise")

    @classmethod
    def uniform(cls, dof, kp_low=5.0, kp_high=200.0, kd_low=2.0, kd_high=20.0):
        ones = np.ones(dof)
        return cls(kp_low * ones, kp_high * ones, kd_low * ones, kd_high * ones)

    def preset(self, mode):
        if mode == "compliant":
            return self.kp_low, self.kd_low
        return self.kp_high, self.kd_high


@dataclass(frozen=True)
class SafetyStopState:
    mode: str = "stiff"
    previous_intention: bool = False


def impedance_torque(state, kp, kd):
    """tau = -kp (q - q_d) - kd (q_dot - q_dot_d), entrywise."""
    arrays = [np.asarray(a, dtype=float) for a in (state.q, state.q_d, state.q_dot, state.q_dot_d)]
    kp = np.broadcast_to(np.asarray(kp, dtype=float), arrays[0].shape) if np.ndim(kp) == 0 else np.asarray(kp, dtype=float)
    kd = np.broadcast_to(np.asarray(kd, dtype=float), arrays[0].shape) if np.ndim(kd) == 0 else np.asarray(kd, dtype=float)
    shapes = {a.shape for a in arrays} | {kp.shape, kd.shape}
    if len(shapes) != 1:
        raise ControlInputError(f"dimension mismatch: {sorted(shapes)}")
    q, q_d, qd, qd_d = arrays
    return -kp * (q - q_d) - kd * (qd - qd_d)


def safety_update(intention, arm, stop):
    """Snap the setpoint to the current pose whenever the intention changes.

    Returns the (possibly updated) arm state and stop state. The desired
    velocity is zeroed as well so a stale setpoint velocity cannot push
    the arm after a switch.
    """
    intention = bool(intention)
    if intention != stop.previous_intention:
        arm = replace(arm, q_d=arm.q.copy(), q_dot_d=np.zeros_like(arm.q))
    mode = "compliant" if intention else "stiff"
    return arm, SafetyStopState(mode=mode, previous_intention=intention)


def integrate(arm, tau_command, tau_external, dt, inertia=1.0):
    """Semi-implicit Euler step of decoupled unit joints.

    With no external torque, ``arm_energy`` does not increase from step to
    step as long as ``dt`` is small next to the stiff preset's period; the
    default presets were checked at the 20-substep rate (dt = 1/300 s).
    """
    if not dt > 0:
        raise ControlInputError("dt must be positive")
    inertia = np.asarray(inertia, dtype=float)
    if np.any(inertia <= 0):
        raise ControlInputError("inertia must be positive")
    q_dot = arm.q_dot + dt * (np.asarray(tau_command) + np.asarray(tau_external)) / inertia
    q = arm.q + dt * q_dot
    return replace(arm, q=q, q_dot=q_dot, tau=np.asarray(tau_command, dtype=float))


def arm_energy(arm, kp, inertia=1.0):
    """Spring plus kinetic energy about the current setpoint."""
    e = arm.q - arm.q_d
    return float(0.5 * np.sum(kp * e * e) + 0.5 * np.sum(inertia * arm.q_dot * arm.q_dot))


class ImpedanceController:
    """Intention-switched joint impedance controller with a toy decoupled arm.

    ``substeps`` integration steps are taken per call to :meth:`step` so the
    stiff preset stays stable at camera frame rates. With ``enabled=False``
    the arm always stays compliant and the setpoint never moves.
    """

    def __init__(self, q0, gains, inertia=1.0, substeps=20, enabled=True):
        self.arm = ArmState.at_rest(q0)
        self.gains = gains
        self.inertia = inertia
        self.substeps = substeps
        self.enabled = enabled
        self.stop = SafetyStopState(mode="stiff" if enabled else "compliant", previous_intention=False)

    def step(self, intention, tau_external, dt):
        if self.enabled:
            self.arm, self.stop = safety_update(intention, self.arm, self.stop)
            kp, kd = self.gains.preset(self.stop.mode)
        else:
            kp, kd = self.gains.preset("compliant")
        h = dt / self.substeps
        for _ in range(self.substeps):
            tau = impedance_torque(self.arm, kp, kd)
            self.arm = integrate(self.arm, tau, tau_external, h, self.inertia)
        return self.arm
