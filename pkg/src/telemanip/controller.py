"""Shared-control laws for the leader arm, follower arm and mobile base.

Covers leader torque blending between the two follower channels, null-space
damping, PD joint mirroring, the virtual-boundary displacement-to-velocity
mapping of the base, the planner-derived navigation force cue, and the
stiffen/home leader behaviors commanded around mode switches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .core import (BaseVelocity, JointVector7, Pose2D, Pose6, Wrench6,
                   as_joint_vector, normalize_angle)
from .kinematics import KinematicChain, fk_with_jacobian, nullspace_projector

BASE_SPEED_CAP = 0.5  # m/s, hard cap on commanded forward speed


@dataclass(frozen=True)
class VirtualBoundary:
    """Leader drive-axis displacement thresholds (meters): deadzone below
    vb_i, drive band up to vb_e, auto home-return beyond."""

    vb_i: float = 0.05
    vb_e: float = 0.4

    def __post_init__(self):
        if not (0.0 < self.vb_i < self.vb_e):
            raise ValueError("require 0 < vb_i < vb_e")


@dataclass(frozen=True)
class ControllerGains:
    """All controller gains; beta is derived as 2*sqrt(alpha) (unit damping
    ratio) and cannot be set independently."""

    kp: np.ndarray = field(default_factory=lambda: np.full(7, 60.0))
    kd: np.ndarray = field(default_factory=lambda: np.full(7, 12.0))
    alpha: float = 4.0
    k_fmr_diag: np.ndarray = field(
        default_factory=lambda: np.array([20.0, 20.0, 20.0, 5.0, 5.0, 10.0]))
    k_v_free: float = 0.5
    k_v_obstacle: float = 0.2
    k_r: float = -1.0
    v_gamma_max: float = 1.0
    # home-holding spring/damper on the non-driving task axes (y, z, roll,
    # pitch); x and yaw stay free for driving
    hold_stiffness: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 200.0, 200.0, 20.0, 20.0, 0.0]))
    hold_damping: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 28.0, 28.0, 6.0, 6.0, 0.0]))
    # follower-coupling feedback rendered on the leader in manipulation mode
    k_fra_diag: np.ndarray = field(
        default_factory=lambda: np.array([150.0, 150.0, 150.0, 8.0, 8.0, 8.0]))
    # stiffen / homing joint PD
    k_stiffen: float = 1500.0
    d_stiffen: float = 77.5
    stiffen_hold_s: float = 0.25
    k_home: float = 36.0
    d_home: float = 12.0
    epsilon_home: float = 0.01   # rad, per joint
    paper_literal_damping: bool = False

    def __post_init__(self):
        for name in ("kp", "kd"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (7,) or np.any(arr < 0):
                raise ValueError(f"{name} must be 7 nonnegative entries")
            object.__setattr__(self, name, arr)
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        kf = np.asarray(self.k_fmr_diag, dtype=float)
        if kf.shape != (6,) or np.any(kf < 0):
            raise ValueError("k_fmr_diag must be 6 nonnegative entries")
        object.__setattr__(self, "k_fmr_diag", kf)
        object.__setattr__(self, "k_fra_diag",
                           np.asarray(self.k_fra_diag, dtype=float))
        object.__setattr__(self, "hold_stiffness",
                           np.asarray(self.hold_stiffness, dtype=float))
        object.__setattr__(self, "hold_damping",
                           np.asarray(self.hold_damping, dtype=float))

    @property
    def beta(self) -> float:
        return 2.0 * math.sqrt(self.alpha)


class VbStatus(IntEnum):
    DEADZONE = 0
    ACTIVE = 1
    BEYOND = 2   # home-return raised


@dataclass(frozen=True)
class LeaderCommand:
    """Torque command plus the stiffen/home behavior flags."""

    torque: np.ndarray
    stiffen: bool = False
    home: bool = False


def saturate_torque(tau: np.ndarray, tau_max: np.ndarray) -> np.ndarray:
    """Clip per joint; preserves sign, limits magnitude."""
    return np.clip(tau, -tau_max, tau_max)


def nullspace_torque(chain: KinematicChain, q_lra: JointVector7,
                     qdot_lra: JointVector7, gains: ControllerGains,
                     q_ns: JointVector7 | None = None,
                     J: np.ndarray | None = None) -> np.ndarray:
    """Joint-limit/singularity-avoidance torque projected to exert zero
    end-effector force: N(J) @ (alpha*(q_ns - q) - beta*qdot).

    q_ns defaults to the current configuration. A precomputed Jacobian can
    be passed to avoid a second FK.
    """
    q = as_joint_vector(q_lra)
    qd = as_joint_vector(qdot_lra)
    if J is None:
        _, _, J = fk_with_jacobian(chain, q)
    qn = q if q_ns is None else as_joint_vector(q_ns)
    inner = gains.alpha * (qn - q) - gains.beta * qd
    return nullspace_projector(J) @ inner


def leader_torque(phi: int, tau_ns: np.ndarray, J_lra: np.ndarray,
                  F_fra: Wrench6, F_fmr: Wrench6, tau_T: np.ndarray,
                  tau_max: np.ndarray) -> np.ndarray:
    """Leader torque blend, gated by the binary mode switch phi:
    tau = tau_ns + phi*(J^T F_fra) + (1-phi)*(tau_T + J^T F_fmr),
    saturated per joint."""
    if phi not in (0, 1):
        raise ValueError("phi must be 0 or 1")
    if phi == 1:
        tau = tau_ns + J_lra.T @ F_fra.as_array()
    else:
        tau = tau_ns + tau_T + J_lra.T @ F_fmr.as_array()
    return saturate_torque(tau, tau_max)


# task axes held toward home while driving: y, z, roll, pitch
_HOLD_MASK = np.array([0.0, 1.0, 1.0, 1.0, 1.0, 0.0])


def hold_torque(P_lra: Pose6, P_home: Pose6, J_lra: np.ndarray,
                gains: ControllerGains,
                qdot: JointVector7 | None = None) -> np.ndarray:
    """Home-holding spring-damper on the non-driving axes (y, z, roll,
    pitch), mapped through J^T; zero on x and yaw."""
    err = P_home.as_array() - P_lra.as_array()
    err[3:] = [normalize_angle(v) for v in err[3:]]
    w = _HOLD_MASK * gains.hold_stiffness * err
    if qdot is not None:
        w -= _HOLD_MASK * gains.hold_damping * (J_lra @ as_joint_vector(qdot))
    return J_lra.T @ w


def follower_mirror_torque(q_lra: JointVector7, q_fra: JointVector7,
                           qdot_fra: JointVector7, gains: ControllerGains,
                           tau_max: np.ndarray) -> np.ndarray:
    """PD mirroring of leader joint positions onto the follower arm.

    Default uses stabilizing damping (-kd*qdot); the printed-form
    energy-injecting sign is available via gains.paper_literal_damping.
    """
    err = as_joint_vector(q_lra) - as_joint_vector(q_fra)
    damp = gains.kd * as_joint_vector(qdot_fra)
    tau = gains.kp * err + (damp if gains.paper_literal_damping else -damp)
    return saturate_torque(tau, tau_max)


def base_velocity_from_leader(P_lra: Pose6, P_home: Pose6,
                              vb: VirtualBoundary, gains: ControllerGains,
                              obstacle_near: bool
                              ) -> tuple[BaseVelocity, VbStatus]:
    """Map leader drive-axis displacement to base velocity.

    Displacement d = x - x_home: dead below vb_i, scaled K_v*d/(vb_e - vb_i)
    inside the band (K_v dropping near obstacles), and (0, 0) with the
    home-return status beyond vb_e. Yaw rate K_r*(yaw - yaw_home) applies
    whenever the displacement is within the band. |v_x| never exceeds the
    0.5 m/s cap.
    """
    d = P_lra.x - P_home.x
    if abs(d) > vb.vb_e:
        return BaseVelocity(0.0, 0.0), VbStatus.BEYOND
    v_gamma = gains.k_r * normalize_angle(P_lra.yaw - P_home.yaw)
    v_gamma = max(-gains.v_gamma_max, min(gains.v_gamma_max, v_gamma))
    if abs(d) < vb.vb_i:
        return BaseVelocity(0.0, v_gamma), VbStatus.DEADZONE
    k_v = gains.k_v_obstacle if obstacle_near else gains.k_v_free
    v_x = k_v * d / (vb.vb_e - vb.vb_i)
    v_x = max(-BASE_SPEED_CAP, min(BASE_SPEED_CAP, v_x))
    return BaseVelocity(v_x, v_gamma), VbStatus.ACTIVE


def navigation_cue(P_fmr: Pose2D, P_lookahead: Pose2D,
                   k_fmr_diag: np.ndarray) -> Wrench6:
    """Planner-derived force cue toward the local-plan lookahead pose.

    Error vector is [dx_body, 0, 0, 0, 0, dgamma]: forward offset of the
    lookahead point expressed along the base body x-axis, and normalized
    heading difference. Cue = K_fmr @ error.
    """
    dx_w = P_lookahead.x - P_fmr.x
    dy_w = P_lookahead.y - P_fmr.y
    c, s = math.cos(P_fmr.gamma), math.sin(P_fmr.gamma)
    dx_body = c * dx_w + s * dy_w
    dgamma = normalize_angle(P_lookahead.gamma - P_fmr.gamma)
    k = np.asarray(k_fmr_diag, dtype=float)
    return Wrench6(force=(k[0] * dx_body, 0.0, 0.0),
                   torque=(0.0, 0.0, k[5] * dgamma))


def leader_guidance_wrench(cue: Wrench6, gains: ControllerGains) -> Wrench6:
    """Express a base-frame cue as the wrench rendered on the leader arm.

    Yielding to a rendered wrench displaces the leader, which maps to base
    velocity with gains K_v (>0) on x and K_r (=-1) on yaw, so the yaw
    component must flip sign for the cue to steer the base toward the
    plan; x keeps its sign.
    """
    w = cue.as_array().copy()
    w[5] *= math.copysign(1.0, gains.k_r)
    w[0] *= math.copysign(1.0, gains.k_v_free)
    return Wrench6.from_array(w)


def follower_coupling_wrench(P_fra: Pose6, P_lra: Pose6,
                             gains: ControllerGains) -> Wrench6:
    """Manipulation-mode force feedback: impedance coupling pulling the
    leader toward the follower's actual end-effector pose."""
    err = P_fra.as_array() - P_lra.as_array()
    err[3:] = [normalize_angle(v) for v in err[3:]]
    return Wrench6.from_array(gains.k_fra_diag * err)


class LeaderPhase(IntEnum):
    NORMAL = 0
    SWITCH = 1      # stiffen briefly, then drive home (switch handshake)
    NAV_RETURN = 2  # auto home-return after a vb_e breach
    LOCKED = 3      # maximized impedance hold (autonomous drop phase)


class LeaderAction(IntEnum):
    NONE = 0
    BEGIN_SWITCH = 1
    BEGIN_NAV_RETURN = 2
    BEGIN_LOCK = 3


@dataclass(frozen=True)
class LeaderState:
    phase: LeaderPhase = LeaderPhase.NORMAL
    phase_start_t: float = 0.0
    q_hold: tuple[float, ...] = ()   # stiffen target captured at entry

    @property
    def input_locked(self) -> bool:
        return self.phase != LeaderPhase.NORMAL


def leader_homed(chain: KinematicChain, q: JointVector7,
                 eps: float) -> bool:
    return bool(np.max(np.abs(as_joint_vector(q) - chain.home_q)) < eps)


def leader_behavior_step(state: LeaderState, action: LeaderAction,
                         chain: KinematicChain, gains: ControllerGains,
                         t: float, q_lra: JointVector7,
                         qdot_lra: JointVector7, tau_normal: np.ndarray
                         ) -> tuple[LeaderState, LeaderCommand]:
    """Sequence the stiffen/home behaviors around mode switches.

    A switch first locks the joints at the current configuration with
    maximized impedance for stiffen_hold_s, then drives home; once every
    joint is within epsilon_home of home the leader returns to normal
    torque mode. tau_normal is the passthrough torque for normal mode.
    """
    q = as_joint_vector(q_lra)
    qd = as_joint_vector(qdot_lra)
    if action == LeaderAction.BEGIN_SWITCH:
        state = LeaderState(LeaderPhase.SWITCH, t, tuple(q))
    elif action == LeaderAction.BEGIN_LOCK:
        state = LeaderState(LeaderPhase.LOCKED, t, tuple(q))
    elif action == LeaderAction.BEGIN_NAV_RETURN:
        if state.phase == LeaderPhase.NORMAL:
            state = LeaderState(LeaderPhase.NAV_RETURN, t, ())

    if state.phase == LeaderPhase.NORMAL:
        return state, LeaderCommand(torque=tau_normal)

    if state.phase == LeaderPhase.LOCKED:
        target = np.array(state.q_hold)
        tau = saturate_torque(gains.k_stiffen * (target - q)
                              - gains.d_stiffen * qd, chain.tau_max)
        return state, LeaderCommand(torque=tau, stiffen=True, home=False)

    stiffening = (state.phase == LeaderPhase.SWITCH
                  and t - state.phase_start_t < gains.stiffen_hold_s)
    if stiffening:
        target = np.array(state.q_hold)
        k, dmp = gains.k_stiffen, gains.d_stiffen
    else:
        if leader_homed(chain, q, gains.epsilon_home):
            state = LeaderState(LeaderPhase.NORMAL, t, ())
            return state, LeaderCommand(torque=tau_normal)
        target = chain.home_q
        k, dmp = gains.k_home, gains.d_home
    tau = saturate_torque(k * (target - q) - dmp * qd, chain.tau_max)
    return state, LeaderCommand(torque=tau, stiffen=stiffening, home=True)
