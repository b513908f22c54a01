"""Finite-state machine for the navigation/manipulation switch, and the
autonomous post-grasp drop trajectory.

The handshake: a confirmed graspable detection stiffens and homes the
leader; manipulation begins only after both the leader-homed and
leader/follower-alignment events have been observed. A drop keystroke with
an attached object hands the follower to an autonomous bin trajectory,
after which control reverts to navigation through the same homing
handshake.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from .core import JointVector7, as_joint_vector
from .kinematics import KinematicChain, ik_position

N_CONFIRM_DEFAULT = 5           # consecutive planner-tick detections
ALIGN_EPSILON_DEFAULT = 0.01    # rad, per joint


class Mode(IntEnum):
    NAVIGATION = 0
    SWITCHING_TO_MANIPULATION = 1
    MANIPULATION = 2
    POST_GRASP_AUTO = 3
    SWITCHING_TO_NAVIGATION = 4


class EventKind(IntEnum):
    GRASPABLE_DETECTED = 0
    LEADER_HOMED = 1
    ALIGNED = 2
    GRASP_CONFIRMED = 3
    DROP_KEY_PRESSED = 4
    DROP_COMPLETED = 5
    MANUAL_OVERRIDE = 6


@dataclass(frozen=True)
class SwitchEvent:
    kind: EventKind
    t: float


@dataclass(frozen=True)
class ModeState:
    mode: Mode = Mode.NAVIGATION
    align_epsilon: float = ALIGN_EPSILON_DEFAULT
    n_confirm: int = N_CONFIRM_DEFAULT
    graspable_streak: int = 0
    homed_seen: bool = False
    aligned_seen: bool = False

    @property
    def phi(self) -> int:
        return 1 if self.mode in (Mode.MANIPULATION,
                                  Mode.POST_GRASP_AUTO) else 0

    @property
    def base_locked(self) -> bool:
        return self.mode != Mode.NAVIGATION


@dataclass(frozen=True)
class FsmActions:
    """Side effects requested by a transition, consumed by the glue layer."""

    begin_leader_switch: bool = False   # stiffen + home the leader
    reduce_impedance: bool = False      # handshake done, free the leader
    begin_drop: bool = False            # plan + execute the bin trajectory
    notifications: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()


def fsm_step(state: ModeState, events: list[SwitchEvent],
             planner_tick: bool, object_attached: bool
             ) -> tuple[ModeState, FsmActions]:
    """Consume this tick's events (timestamp order) and advance the mode.

    Graspable detections are sampled on planner ticks; a planner tick
    without a detection resets the confirmation streak. The
    navigation->manipulation switch fires after n_confirm consecutive
    detections. Manipulation is entered only once both LEADER_HOMED and
    ALIGNED have been seen. DROP_KEY_PRESSED without an attached object is
    ignored with a warning.
    """
    events = sorted(events, key=lambda e: e.t)
    notify: list[str] = []
    warn: list[str] = []
    begin_switch = False
    reduce_imp = False
    begin_drop = False

    if planner_tick and state.mode == Mode.NAVIGATION:
        if not any(e.kind == EventKind.GRASPABLE_DETECTED for e in events):
            state = replace(state, graspable_streak=0)

    for ev in events:
        m = state.mode
        if ev.kind == EventKind.GRASPABLE_DETECTED and m == Mode.NAVIGATION:
            streak = state.graspable_streak + 1
            if streak >= state.n_confirm:
                state = replace(state, mode=Mode.SWITCHING_TO_MANIPULATION,
                                graspable_streak=0, homed_seen=False,
                                aligned_seen=False)
                begin_switch = True
                notify.append("switching to manipulation")
            else:
                state = replace(state, graspable_streak=streak)
        elif ev.kind == EventKind.LEADER_HOMED:
            if m == Mode.SWITCHING_TO_MANIPULATION:
                state = replace(state, homed_seen=True)
            elif m == Mode.SWITCHING_TO_NAVIGATION:
                state = replace(state, mode=Mode.NAVIGATION,
                                homed_seen=False, aligned_seen=False)
                notify.append("navigation")
        elif ev.kind == EventKind.ALIGNED:
            if m == Mode.SWITCHING_TO_MANIPULATION:
                state = replace(state, aligned_seen=True)
        elif ev.kind == EventKind.DROP_KEY_PRESSED:
            if m == Mode.MANIPULATION and object_attached:
                state = replace(state, mode=Mode.POST_GRASP_AUTO)
                begin_drop = True
                notify.append("autonomous drop")
            else:
                warn.append("drop key ignored (no object attached)")
        elif ev.kind == EventKind.DROP_COMPLETED:
            if m == Mode.POST_GRASP_AUTO:
                state = replace(state, mode=Mode.SWITCHING_TO_NAVIGATION,
                                homed_seen=False, aligned_seen=False)
                begin_switch = True
                notify.append("switching to navigation")
        elif ev.kind == EventKind.MANUAL_OVERRIDE:
            if m == Mode.NAVIGATION:
                state = replace(state, mode=Mode.SWITCHING_TO_MANIPULATION,
                                graspable_streak=0, homed_seen=False,
                                aligned_seen=False)
                begin_switch = True
                notify.append("switching to manipulation (override)")
            elif m == Mode.MANIPULATION:
                state = replace(state, mode=Mode.SWITCHING_TO_NAVIGATION,
                                homed_seen=False, aligned_seen=False)
                begin_switch = True
                notify.append("switching to navigation (override)")
            else:
                warn.append("manual override ignored in transient mode")

    if state.mode == Mode.SWITCHING_TO_MANIPULATION and state.homed_seen \
            and state.aligned_seen:
        state = replace(state, mode=Mode.MANIPULATION, homed_seen=False,
                        aligned_seen=False)
        reduce_imp = True
        notify.append("switch complete")

    return state, FsmActions(begin_leader_switch=begin_switch,
                             reduce_impedance=reduce_imp,
                             begin_drop=begin_drop,
                             notifications=tuple(notify),
                             warnings=tuple(warn))


@dataclass(frozen=True)
class JointTrajectory:
    """Piecewise-cubic joint trajectory with zero velocity at waypoints."""

    waypoints: np.ndarray    # (n, 7)
    times: np.ndarray        # cumulative, times[0] = 0
    release_time: float      # object released when t >= release_time

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def sample(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(q, qdot) at time t; clamps beyond the ends."""
        if t <= 0.0:
            return self.waypoints[0].copy(), np.zeros(7)
        if t >= self.duration:
            return self.waypoints[-1].copy(), np.zeros(7)
        seg = int(np.searchsorted(self.times, t, side="right")) - 1
        t0, t1 = self.times[seg], self.times[seg + 1]
        q0, q1 = self.waypoints[seg], self.waypoints[seg + 1]
        T = t1 - t0
        s = (t - t0) / T
        blend = 3 * s * s - 2 * s ** 3         # rest-to-rest cubic
        dblend = (6 * s - 6 * s * s) / T
        return q0 + blend * (q1 - q0), dblend * (q1 - q0)


def plan_drop_trajectory(q_current: JointVector7, bin_xyz_fra: np.ndarray,
                         chain: KinematicChain,
                         predrop_height_m: float = 0.15,
                         release_height_m: float = 0.05,
                         speed_fraction: float = 0.4
                         ) -> JointTrajectory:
    """Autonomous drop: current -> pre-drop above the bin -> release ->
    follower home. Zero velocity at every waypoint; segment durations set
    so the cubic's peak joint speed stays within speed_fraction of the
    per-joint velocity limit."""
    q0 = as_joint_vector(q_current)
    bin_xyz = np.asarray(bin_xyz_fra, dtype=float)
    q_release = ik_position(chain, bin_xyz + [0.0, 0.0, release_height_m],
                            chain.home_q)
    q_predrop = ik_position(chain, bin_xyz + [0.0, 0.0, predrop_height_m],
                            q_release)
    waypoints = np.stack([q0, q_predrop, q_release, chain.home_q])
    times = [0.0]
    for i in range(1, waypoints.shape[0]):
        dq = np.abs(waypoints[i] - waypoints[i - 1])
        # cubic peak velocity is 1.5 * dq / T
        T = float(np.max(1.5 * dq / (speed_fraction * chain.qd_max)))
        times.append(times[-1] + max(T, 0.5))
    return JointTrajectory(waypoints=waypoints, times=np.array(times),
                           release_time=float(times[2]))
