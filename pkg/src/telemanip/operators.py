"""Scripted operator models: deterministic spring-like agents that drive the
leader arm toward an intended route, optionally yield to rendered force
cues, and press the grasp/drop keys. They are calibration instruments for
the framework, not human models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .core import Pose2D, Pose6, Wrench6, normalize_angle
from .modes import EventKind, Mode


class OperatorKind(IntEnum):
    COMPLIANT = 0
    IGNORING = 1    # cue compliance zero
    DISTRACTED = 2  # compliant, but input zeroed in distraction windows


@dataclass(frozen=True)
class OperatorModel:
    kind: OperatorKind
    tracking_gain: float          # N per m of intended-path error
    yaw_gain: float               # N*m per rad of heading error
    compliance: float             # multiplier on the rendered cue
    noise_sigma: float            # N, resampled at the planner rate
    distraction_windows: tuple[tuple[float, float], ...]  # (start, duration)
    seed: int

    def in_distraction(self, t: float) -> bool:
        if self.kind != OperatorKind.DISTRACTED:
            return False
        for start, dur in self.distraction_windows:
            if start <= t < start + dur:
                return True
        return False


def distraction_schedule(seed: int, gap_s: tuple[float, float],
                         duration_s: float, horizon_s: float
                         ) -> tuple[tuple[float, float], ...]:
    """Window start times with uniform random gaps; deterministic per seed."""
    rng = np.random.default_rng(seed)
    out = []
    t = 0.0
    while True:
        t += float(rng.uniform(gap_s[0], gap_s[1]))
        if t >= horizon_s:
            break
        out.append((t, duration_s))
        t += duration_s
    return tuple(out)


def build_operator(kind: OperatorKind, cfg, seed: int) -> OperatorModel:
    """Instantiate a model from scenario defaults for one trial seed."""
    windows = ()
    if kind == OperatorKind.DISTRACTED:
        windows = distraction_schedule(seed * 7919 + 13, cfg.distraction_gap_s,
                                       cfg.distraction_duration_s,
                                       cfg.timeout_s)
    return OperatorModel(
        kind=kind,
        tracking_gain=cfg.operator_tracking_gain_n_per_m,
        yaw_gain=cfg.operator_yaw_gain_nm_per_rad,
        compliance=0.0 if kind == OperatorKind.IGNORING
        else cfg.operator_compliance,
        noise_sigma=cfg.operator_noise_sigma_n,
        distraction_windows=windows,
        seed=seed)


@dataclass
class OperatorContext:
    """Per-tick inputs to the scripted operator."""

    t: float
    mode: Mode
    input_locked: bool
    leader_pose: Pose6
    leader_home: Pose6
    leader_ee_vel: np.ndarray              # 6-vector twist, J @ qdot
    base_pose: Pose2D
    grasp_target_lra: np.ndarray | None   # object position, leader frame
    follower_ee_to_target_m: float
    object_attached: bool


class ScriptedOperator:
    """Stateful wrapper: intent-path tracking in navigation, target approach
    in manipulation, keystroke emission, noise and distraction gating."""

    # navigation shaping constants
    CRUISE_DISPLACEMENT_M = 0.28
    LOOKAHEAD_M = 1.0
    MAX_YAW_OFFSET_RAD = 0.35
    GOAL_SLOW_RADIUS_M = 1.8
    GOAL_STOP_RADIUS_M = 0.15
    FORCE_DAMPING = 30.0          # N*s/m on the drive axis
    YAW_DAMPING = 6.0             # N*m*s/rad
    TORQUE_NOISE_FRACTION = 0.3   # torque noise sigma = fraction * sigma
    MANIP_GAIN = 40.0             # N/m toward the grasp target
    MANIP_DAMPING = 25.0
    GRASP_REACH_M = 0.015

    def __init__(self, model: OperatorModel, waypoints_xy: np.ndarray,
                 noise_period_ticks: int = 1500):
        self.model = model
        if waypoints_xy.shape[0] < 2:
            raise ValueError("operator intent path needs >= 2 waypoints")
        self.waypoints = waypoints_xy
        seg = np.diff(waypoints_xy, axis=0)
        self.arclen = np.concatenate(
            [[0.0], np.cumsum(np.hypot(seg[:, 0], seg[:, 1]))])
        self._rng = np.random.default_rng(model.seed * 104729 + 7)
        self._noise = np.zeros(2)   # held (force_x, torque_z) noise
        self._noise_period = noise_period_ticks
        self._tick = 0
        self._grasp_sent = False
        self._drop_sent = False

    def _intent_target(self, base: Pose2D) -> tuple[float, float, float]:
        """(target_x, target_y, remaining_m) on the intent polyline."""
        d2 = (self.waypoints[:, 0] - base.x) ** 2 + \
            (self.waypoints[:, 1] - base.y) ** 2
        i = int(np.argmin(d2))
        s_target = self.arclen[i] + self.LOOKAHEAD_M
        j = int(np.searchsorted(self.arclen, s_target))
        j = min(j, len(self.arclen) - 1)
        tx, ty = self.waypoints[j]
        goal = self.waypoints[-1]
        remaining = math.hypot(goal[0] - base.x, goal[1] - base.y)
        return float(tx), float(ty), remaining

    def step(self, cue: Wrench6, ctx: OperatorContext
             ) -> tuple[Wrench6, list[EventKind]]:
        """One 1 kHz tick: the applied wrench and any keystrokes."""
        self._tick += 1
        if self._tick % self._noise_period == 0 and self.model.noise_sigma > 0:
            sig = self.model.noise_sigma
            self._noise = self._rng.normal(0.0, sig, 2)
            self._noise[1] *= self.TORQUE_NOISE_FRACTION

        events: list[EventKind] = []
        if ctx.mode == Mode.MANIPULATION and not ctx.input_locked:
            if not ctx.object_attached and not self._grasp_sent and \
                    ctx.follower_ee_to_target_m < self.GRASP_REACH_M:
                events.append(EventKind.GRASP_CONFIRMED)
                self._grasp_sent = True
            if ctx.object_attached and not self._drop_sent:
                events.append(EventKind.DROP_KEY_PRESSED)
                self._drop_sent = True

        if ctx.input_locked:
            return Wrench6.zero(), events
        if self.model.in_distraction(ctx.t):
            return Wrench6.zero(), events

        if ctx.mode == Mode.NAVIGATION:
            w = self._navigation_wrench(cue, ctx)
        elif ctx.mode == Mode.MANIPULATION:
            w = self._manipulation_wrench(cue, ctx)
        else:
            w = Wrench6.zero()
        return w, events

    def _navigation_wrench(self, cue: Wrench6, ctx: OperatorContext) -> Wrench6:
        tx, ty, remaining = self._intent_target(ctx.base_pose)
        bearing = math.atan2(ty - ctx.base_pose.y, tx - ctx.base_pose.x)
        heading_err = normalize_angle(bearing - ctx.base_pose.gamma)

        d_des = self.CRUISE_DISPLACEMENT_M
        if remaining < self.GOAL_SLOW_RADIUS_M:
            d_des *= remaining / self.GOAL_SLOW_RADIUS_M
        if remaining < self.GOAL_STOP_RADIUS_M:
            d_des = 0.0
        d_des *= max(0.15, 1.0 - min(abs(heading_err) / 0.7, 1.0))

        offset_des = -max(-self.MAX_YAW_OFFSET_RAD,
                          min(self.MAX_YAW_OFFSET_RAD, heading_err))

        d_act = ctx.leader_pose.x - ctx.leader_home.x
        yaw_act = normalize_angle(ctx.leader_pose.yaw - ctx.leader_home.yaw)
        vx = ctx.leader_ee_vel[0]
        yaw_rate = ctx.leader_ee_vel[5]

        fx = self.model.tracking_gain * (d_des - d_act) \
            - self.FORCE_DAMPING * vx + self._noise[0]
        tz = self.model.yaw_gain * (offset_des - yaw_act) \
            - self.YAW_DAMPING * yaw_rate + self._noise[1]
        w = np.array([fx, 0.0, 0.0, 0.0, 0.0, tz])
        w += self.model.compliance * cue.as_array()
        return Wrench6.from_array(w)

    def _manipulation_wrench(self, cue: Wrench6,
                             ctx: OperatorContext) -> Wrench6:
        if ctx.grasp_target_lra is None or ctx.object_attached:
            return Wrench6.from_array(
                self.model.compliance * cue.as_array())
        p = np.array(ctx.leader_pose.position)
        err = ctx.grasp_target_lra - p
        f = self.MANIP_GAIN * err - self.MANIP_DAMPING * ctx.leader_ee_vel[:3]
        f[0] += self._noise[0]
        f[1] += self._noise[1]
        w = np.concatenate([f, np.zeros(3)])
        w += self.model.compliance * cue.as_array()
        return Wrench6.from_array(w)


def operator_step(op: ScriptedOperator, cue: Wrench6, ctx: OperatorContext
                  ) -> Wrench6:
    """Functional entry point: the wrench only (keystrokes via step())."""
    return op.step(cue, ctx)[0]
