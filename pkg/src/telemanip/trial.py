"""Closed-loop trial harness: 1 kHz simulation with 10 Hz planning, the
three experimental conditions, per-tick recording, metrics, batch running
and bit-exact replay.

Conditions: 1 = haptic guidance (cues rendered to the operator and applied
to the leader), 2 = no haptic guidance (cue wrench forced to zero at the
operator; the planner still computes and the reference trajectory is still
logged), 3 = haptic guidance under visual distractions (operator input
zeroed in scheduled windows).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import controller as ctl
from .controller import (LeaderAction, LeaderCommand, LeaderPhase,
                         LeaderState, VbStatus)
from .core import BaseVelocity, Pose2D, Pose6, Wrench6
from .kinematics import fk_with_jacobian
from .metrics import DeviationMetrics, deviation_mae, mean_sem, path_length
from .modes import (EventKind, FsmActions, Mode, ModeState, SwitchEvent,
                    fsm_step, plan_drop_trajectory)
from .operators import (OperatorContext, OperatorKind, ScriptedOperator,
                        build_operator)
from .planning import (GridView, LOOKAHEAD_INDEX, NoPathError, dwa_step,
                       lookahead_pose, plan_global)
from .scenario import ScenarioConfig
from .world import World, graspable

CONDITION_KINDS = {1: OperatorKind.COMPLIANT, 2: OperatorKind.COMPLIANT,
                   3: OperatorKind.DISTRACTED}

OUTCOME_COMPLETED = "completed"
OUTCOME_TIMEOUT = "timeout"

ROW_COLUMNS = (
    ["t", "mode", "vb_status", "stiffen", "home"]
    + [f"lra_{n}" for n in ("x", "y", "z", "roll", "pitch", "yaw")]
    + ["base_x", "base_y", "base_gamma"]
    + [f"fra_q{i}" for i in range(1, 8)]
    + [f"cue_{n}" for n in ("fx", "fy", "fz", "tx", "ty", "tz")]
    + [f"op_{n}" for n in ("fx", "fy", "fz", "tx", "ty", "tz")]
    + ["cmd_vx", "cmd_vgamma"])
N_COLS = len(ROW_COLUMNS)


class _Recorder:
    """Chunked row buffer; avoids preallocating timeout-sized arrays."""

    def __init__(self, chunk: int = 65536):
        self._chunks: list[np.ndarray] = []
        self._cur = np.empty((chunk, N_COLS))
        self._i = 0
        self._chunk = chunk

    def add(self, row: np.ndarray):
        if self._i == self._chunk:
            self._chunks.append(self._cur)
            self._cur = np.empty((self._chunk, N_COLS))
            self._i = 0
        self._cur[self._i] = row
        self._i += 1

    def finish(self) -> np.ndarray:
        parts = self._chunks + [self._cur[:self._i]]
        return np.concatenate(parts, axis=0)


@dataclass
class TrialRecord:
    """Everything produced by one trial; replaying the recorded command
    stream reproduces `rows` bit-exactly."""

    scenario_hash: str
    condition: int
    seed: int
    operator_kind: int
    dt_s: float
    rows: np.ndarray                      # (ticks, N_COLS)
    events: list[tuple[int, str, str]]    # (tick, kind, source)
    notifications: list[tuple[int, str]]
    reference_xy: np.ndarray
    outcome: str
    metrics: DeviationMetrics
    collisions: list[tuple[int, int, int]]

    def record_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.scenario_hash.encode())
        h.update(f"|{self.condition}|{self.seed}|{self.operator_kind}"
                 f"|{self.outcome}|".encode())
        h.update(np.ascontiguousarray(self.rows, dtype=np.float64).tobytes())
        for ev in self.events:
            h.update(repr(ev).encode())
        h.update(np.ascontiguousarray(self.reference_xy,
                                      dtype=np.float64).tobytes())
        return h.hexdigest()

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, ROW_COLUMNS.index(name)]

    def operator_wrench_stream(self) -> np.ndarray:
        i = ROW_COLUMNS.index("op_fx")
        return self.rows[:, i:i + 6]

    def operator_events(self) -> list[tuple[int, str]]:
        return [(t, k) for t, k, src in self.events if src == "operator"]


class PlaybackSource:
    """Replays a recorded operator wrench stream and keystroke events."""

    def __init__(self, wrench_stream: np.ndarray,
                 events: list[tuple[int, str]]):
        self._w = np.asarray(wrench_stream, dtype=float)
        self._events: dict[int, list[EventKind]] = {}
        for tick, kind in events:
            # recorded at the tick they were scheduled for consumption;
            # re-emit one tick earlier so scheduling lands identically
            self._events.setdefault(tick - 1, []).append(EventKind[kind])

    def step(self, tick: int, cue: Wrench6, ctx: OperatorContext
             ) -> tuple[Wrench6, list[EventKind]]:
        if tick < self._w.shape[0]:
            w = Wrench6.from_array(self._w[tick])
        else:
            w = Wrench6.zero()
        return w, self._events.get(tick, [])


class ScriptedSource:
    def __init__(self, operator: ScriptedOperator):
        self.operator = operator

    def step(self, tick: int, cue: Wrench6, ctx: OperatorContext
             ) -> tuple[Wrench6, list[EventKind]]:
        return self.operator.step(cue, ctx)


def build_world(cfg: ScenarioConfig) -> World:
    chain = cfg.load_chain()
    return World(grid=cfg.build_grid(), leader_chain=chain,
                 follower_chain=chain, base_params=cfg.base_params(),
                 lidar=cfg.lidar_model(), camera=cfg.marker_camera(),
                 base_start=cfg.start_pose(),
                 object_xyz=np.array(cfg.object_xyz_m),
                 object_yaw=cfg.object_yaw_rad,
                 fra_mount_xyz=np.array(cfg.fra_mount_xyz_m),
                 bin_xyz_fra=np.array(cfg.bin_xyz_fra_m),
                 joint_damping=cfg.joint_damping_nms_per_rad,
                 dt=cfg.dt_s, grasp_epsilon_m=cfg.grasp_epsilon_m)


def approach_goal(cfg: ScenarioConfig) -> Pose2D:
    """Planner goal: standoff point in front of the object, facing it."""
    ox, oy = cfg.object_xyz_m[0], cfg.object_xyz_m[1]
    yaw = cfg.object_yaw_rad
    return Pose2D(ox - cfg.approach_standoff_m * math.cos(yaw),
                  oy - cfg.approach_standoff_m * math.sin(yaw), yaw)


def _plan_reference(view: GridView, start: Pose2D, goal: Pose2D,
                    inflate_m: float):
    """Global plan over footprint-inflated visible obstacles."""
    inflated = InflatedView(view, inflate_m)
    return plan_global(inflated, start, goal)


class InflatedView:
    """GridView facade treating every cell within the inflation radius of a
    visible obstacle as occupied (drivability for the global planner)."""

    def __init__(self, view: GridView, inflate_m: float):
        self.grid = view.grid
        self._ok = view.clearance_m > inflate_m

    def passable(self, ix: int, iy: int) -> bool:
        return bool(self._ok[iy, ix])


def run_trial(cfg: ScenarioConfig, condition: int, seed: int,
              operator_kind: OperatorKind | None = None,
              input_source=None,
              injected_events: dict[int, list[EventKind]] | None = None
              ) -> TrialRecord:
    """Run one closed-loop trial to drop completion or timeout."""
    if condition not in (1, 2, 3):
        raise ValueError("condition must be 1, 2 or 3")
    kind = operator_kind if operator_kind is not None \
        else CONDITION_KINDS[condition]
    chain = cfg.load_chain()
    world = build_world(cfg)
    gains = cfg.controller_gains()
    vb = cfg.virtual_boundary()
    dwa_params = cfg.dwa_params()
    base_params = cfg.base_params()
    dt = cfg.dt_s
    planner_ticks = int(round(cfg.planner_period_s / dt))
    max_ticks = int(round(cfg.timeout_s / dt))

    p_home, R_home, _ = fk_with_jacobian(chain, chain.home_q)
    from .core import rpy_from_rotation
    home_pose = Pose6(position=tuple(p_home), rpy=rpy_from_rotation(R_home))

    goal = approach_goal(cfg)
    view = GridView(world.grid)
    seen_version = world.discovery_version
    inflate = cfg.footprint_radius_m + cfg.plan_margin_m
    try:
        current_path = _plan_reference(view, world.base_pose, goal, inflate)
    except NoPathError as e:
        raise NoPathError(f"scenario has no initial route: {e}")
    reference_xy = np.array([[w.x, w.y] for w in current_path.waypoints])

    if input_source is None:
        waypoints = np.array(cfg.operator_waypoints_xy_m, dtype=float) \
            if cfg.operator_waypoints_xy_m else reference_xy
        model = build_operator(kind, cfg, seed)
        input_source = ScriptedSource(ScriptedOperator(model, waypoints))

    mode_state = ModeState(align_epsilon=cfg.align_epsilon_rad,
                           n_confirm=cfg.n_confirm)
    leader_state = LeaderState()
    pending_leader_action = LeaderAction.NONE
    pending_events: dict[int, list[EventKind]] = {}
    injected_events = injected_events or {}

    raw_cue = Wrench6.zero()
    obstacle_near = False
    graspable_flag = False
    last_marker: np.ndarray | None = None
    last_cmd = BaseVelocity(0.0, 0.0)
    drop_traj = None
    drop_t0 = 0.0
    drop_released = False
    drop_done_sent = False

    rec = _Recorder()
    events_log: list[tuple[int, str, str]] = []
    notif_log: list[tuple[int, str]] = []
    outcome = OUTCOME_TIMEOUT
    end_tick = max_ticks
    f_zero = Wrench6.zero()

    for k in range(max_ticks):
        t = k * dt
        planner_tick = (k % planner_ticks == 0)
        if planner_tick:
            if world.discovery_version != seen_version:
                seen_version = world.discovery_version
                view = GridView(world.grid)
                blocked = any(
                    view.clearance_at(w.x, w.y) <= cfg.footprint_radius_m
                    for w in current_path.waypoints)
                if blocked:
                    try:
                        current_path = _plan_reference(
                            view, world.base_pose, goal, inflate)
                        notif_log.append((k, "replanned global path"))
                    except NoPathError:
                        try:
                            current_path = _plan_reference(
                                view, world.base_pose, goal,
                                cfg.footprint_radius_m)
                            notif_log.append(
                                (k, "replanned global path (tight)"))
                        except NoPathError:
                            notif_log.append(
                                (k, "replan failed; keeping path"))
            if mode_state.mode == Mode.NAVIGATION:
                res = dwa_step(world.base_pose, last_cmd, view, current_path,
                               dwa_params, base_params)
                if res.blocked:
                    raw_cue = Wrench6.zero()
                else:
                    look = lookahead_pose(res.trajectory, LOOKAHEAD_INDEX)
                    raw_cue = ctl.navigation_cue(world.base_pose, look,
                                                 gains.k_fmr_diag)
            else:
                raw_cue = Wrench6.zero()
            marker = world.marker_visible()
            if marker is not None:
                last_marker = marker
            graspable_flag = marker is not None and graspable(marker)
            obstacle_near = world.obstacle_near(cfg.obstacle_near_radius_m)

        # ---- events ---------------------------------------------------------
        tick_events: list[SwitchEvent] = []
        src_of: dict[int, str] = {}

        def _emit(kind_: EventKind, source: str):
            tick_events.append(SwitchEvent(kind_, t))
            src_of[len(tick_events) - 1] = source

        for kind_ in pending_events.pop(k, []):
            _emit(kind_, "operator")
        for kind_ in injected_events.get(k, []):
            _emit(kind_, "injected")
        if planner_tick and mode_state.mode == Mode.NAVIGATION \
                and graspable_flag:
            _emit(EventKind.GRASPABLE_DETECTED, "auto")
        in_switch = mode_state.mode in (Mode.SWITCHING_TO_MANIPULATION,
                                        Mode.SWITCHING_TO_NAVIGATION)
        if in_switch and not mode_state.homed_seen \
                and leader_state.phase == LeaderPhase.NORMAL \
                and ctl.leader_homed(chain, world.q_lra, gains.epsilon_home):
            _emit(EventKind.LEADER_HOMED, "auto")
        if mode_state.mode == Mode.SWITCHING_TO_MANIPULATION \
                and not mode_state.aligned_seen \
                and float(np.max(np.abs(world.q_lra - world.q_fra))) \
                < cfg.align_epsilon_rad:
            _emit(EventKind.ALIGNED, "auto")
        if drop_traj is not None and not drop_done_sent:
            if t - drop_t0 >= drop_traj.duration and \
                    float(np.max(np.abs(world.q_fra - chain.home_q))) < 0.05:
                _emit(EventKind.DROP_COMPLETED, "auto")
                drop_done_sent = True

        # grasp keystroke acts on the world before the FSM sees this tick
        for ev in tick_events:
            if ev.kind == EventKind.GRASP_CONFIRMED:
                world.try_grasp()

        mode_state, actions = fsm_step(mode_state, tick_events, planner_tick,
                                       world.object_attached)
        world.mode = mode_state.mode
        for i, ev in enumerate(tick_events):
            events_log.append((k, ev.kind.name, src_of[i]))
        for msg in actions.notifications + actions.warnings:
            notif_log.append((k, msg))

        leader_action = pending_leader_action
        pending_leader_action = LeaderAction.NONE
        if actions.begin_leader_switch:
            leader_action = LeaderAction.BEGIN_SWITCH
        if actions.begin_drop:
            drop_traj = plan_drop_trajectory(world.q_fra, world.bin_xyz_fra,
                                             chain)
            drop_t0 = t
            drop_released = False
            leader_action = LeaderAction.BEGIN_LOCK

        phi = mode_state.phi

        # ---- rendered cue ----------------------------------------------------
        p_lra, R_lra, J_lra = world.leader_fk()
        leader_pose = world.leader_pose()
        if mode_state.mode == Mode.NAVIGATION \
                and leader_state.phase == LeaderPhase.NORMAL:
            rendered = ctl.leader_guidance_wrench(raw_cue, gains)
        elif mode_state.mode == Mode.MANIPULATION and last_marker is not None \
                and not world.object_attached:
            err = last_marker - p_lra
            rendered = Wrench6(force=tuple(cfg.k_grasp_guidance_n_per_m * err),
                               torque=(0.0, 0.0, 0.0))
        else:
            rendered = f_zero
        if condition == 2:
            rendered = f_zero

        # ---- operator --------------------------------------------------------
        ee_vel = J_lra @ world.qd_lra
        obj_fra = world.object_in_fra()
        p_fra, R_fra, _ = world.follower_fk() if phi == 1 else (None, None,
                                                                None)
        if p_fra is not None:
            ee_to_target = float(np.linalg.norm(p_fra - obj_fra))
        else:
            ee_to_target = math.inf
        ctx = OperatorContext(
            t=t, mode=mode_state.mode,
            input_locked=leader_state.input_locked,
            leader_pose=leader_pose, leader_home=home_pose,
            leader_ee_vel=ee_vel, base_pose=world.base_pose,
            grasp_target_lra=last_marker,
            follower_ee_to_target_m=ee_to_target,
            object_attached=world.object_attached)
        op_wrench, keystrokes = input_source.step(k, rendered, ctx)
        for kind_ in keystrokes:
            pending_events.setdefault(k + 1, []).append(kind_)

        # ---- controller ------------------------------------------------------
        tau_ns = ctl.nullspace_torque(chain, world.q_lra, world.qd_lra,
                                      gains, J=J_lra)
        tau_T = ctl.hold_torque(leader_pose, home_pose, J_lra, gains,
                                world.qd_lra)
        if phi == 1:
            fra_pose = world.follower_pose()
            F_fra = ctl.follower_coupling_wrench(fra_pose, leader_pose, gains)
        else:
            F_fra = f_zero
        tau_normal = ctl.leader_torque(phi, tau_ns, J_lra, F_fra, rendered,
                                       tau_T, chain.tau_max)
        leader_state, leader_cmd = ctl.leader_behavior_step(
            leader_state, leader_action, chain, gains, t,
            world.q_lra, world.qd_lra, tau_normal)

        # ---- follower torque -------------------------------------------------
        if mode_state.mode == Mode.MANIPULATION:
            tau_f = ctl.follower_mirror_torque(world.q_lra, world.q_fra,
                                               world.qd_fra, gains,
                                               chain.tau_max)
        elif mode_state.mode == Mode.POST_GRASP_AUTO and drop_traj is not None:
            q_des, qd_des = drop_traj.sample(t - drop_t0)
            tau_f = ctl.saturate_torque(
                gains.kp * (q_des - world.q_fra)
                + gains.kd * (qd_des - world.qd_fra), chain.tau_max)
            if not drop_released and t - drop_t0 >= drop_traj.release_time:
                world.release_object(
                    world._fra_point_to_world(world.bin_xyz_fra))
                drop_released = True
        else:
            tau_f = ctl.follower_mirror_torque(chain.home_q, world.q_fra,
                                               world.qd_fra, gains,
                                               chain.tau_max)

        # ---- base command ----------------------------------------------------
        if mode_state.mode == Mode.NAVIGATION and \
                leader_state.phase == LeaderPhase.NORMAL:
            vel, vb_status = ctl.base_velocity_from_leader(
                leader_pose, home_pose, vb, gains, obstacle_near)
            if vb_status == VbStatus.BEYOND:
                pending_leader_action = LeaderAction.BEGIN_NAV_RETURN
        else:
            vel = BaseVelocity(0.0, 0.0)
            vb_status = VbStatus.BEYOND \
                if leader_state.phase == LeaderPhase.NAV_RETURN \
                else VbStatus.DEADZONE

        # ---- record (pre-step state + this tick's commands) -------------------
        row = np.empty(N_COLS)
        row[0] = t
        row[1] = float(mode_state.mode)
        row[2] = float(vb_status)
        row[3] = 1.0 if leader_cmd.stiffen else 0.0
        row[4] = 1.0 if leader_cmd.home else 0.0
        row[5:11] = leader_pose.as_array()
        row[11] = world.base_pose.x
        row[12] = world.base_pose.y
        row[13] = world.base_pose.gamma
        row[14:21] = world.q_fra
        row[21:27] = rendered.as_array()
        row[27:33] = op_wrench.as_array()
        row[33] = vel.v_x
        row[34] = vel.v_gamma
        rec.add(row)

        world.step(leader_cmd, op_wrench, vel, tau_f)
        last_cmd = vel

        if drop_done_sent and mode_state.mode == Mode.SWITCHING_TO_NAVIGATION:
            outcome = OUTCOME_COMPLETED
            end_tick = k + 1
            break

    rows = rec.finish()
    metrics = _compute_metrics(rows, reference_xy, dt, world, end_tick)
    return TrialRecord(scenario_hash=cfg.scenario_hash(),
                       condition=condition, seed=seed,
                       operator_kind=int(kind), dt_s=dt, rows=rows,
                       events=events_log, notifications=notif_log,
                       reference_xy=reference_xy, outcome=outcome,
                       metrics=metrics,
                       collisions=[(c.tick, c.cell[0], c.cell[1])
                                   for c in world.collision_events])


def _compute_metrics(rows: np.ndarray, reference_xy: np.ndarray, dt: float,
                     world: World, end_tick: int) -> DeviationMetrics:
    mode = rows[:, 1]
    nav_mask = mode == float(Mode.NAVIGATION)
    manip_mask = (mode == float(Mode.MANIPULATION)) | \
        (mode == float(Mode.POST_GRASP_AUTO))
    switch_mask = ~(nav_mask | manip_mask)
    base_xy = rows[:, 11:13]
    if nav_mask.any():
        mae_x, mae_y = deviation_mae(base_xy[nav_mask], reference_xy)
    else:
        mae_x = mae_y = 0.0
    return DeviationMetrics(
        mae_x_m=mae_x, mae_y_m=mae_y,
        nav_time_s=float(nav_mask.sum()) * dt,
        manip_time_s=float(manip_mask.sum()) * dt,
        switch_time_s=float(switch_mask.sum()) * dt,
        total_time_s=rows.shape[0] * dt,
        path_length_m=path_length(base_xy),
        collision_count=len(world.collision_events))


def replay_record(cfg: ScenarioConfig, record: TrialRecord) -> TrialRecord:
    """Re-simulate from the recorded command stream; the result's rows must
    equal the original bit-exactly."""
    source = PlaybackSource(record.operator_wrench_stream(),
                            record.operator_events())
    return run_trial(cfg, record.condition, record.seed,
                     operator_kind=OperatorKind(record.operator_kind),
                     input_source=source)


def run_batch(cfg: ScenarioConfig, conditions: list[int], n_seeds: int,
              operator_kind: OperatorKind | None = None,
              keep_records: bool = False) -> dict:
    """Mean +- SEM per condition for each metric over seeds 0..n_seeds-1."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    out: dict = {"n_seeds": n_seeds, "conditions": {}, "warnings": []}
    if n_seeds == 1:
        out["warnings"].append("single seed: SEM degenerate (reported as 0)")
    records: dict[tuple[int, int], TrialRecord] = {}
    for cond in conditions:
        per_metric: dict[str, list[float]] = {}
        outcomes = []
        for seed in range(n_seeds):
            r = run_trial(cfg, cond, seed, operator_kind=operator_kind)
            if keep_records:
                records[(cond, seed)] = r
            outcomes.append(r.outcome)
            for name, val in r.metrics.as_dict().items():
                per_metric.setdefault(name, []).append(float(val))
        summary = {}
        for name, vals in per_metric.items():
            m, sem = mean_sem(vals)
            summary[name] = {"mean": m, "sem": sem, "values": vals}
        summary["outcomes"] = outcomes
        out["conditions"][cond] = summary
    if keep_records:
        out["records"] = records
    return out


def format_batch_table(summary: dict) -> str:
    """Human-readable mean +- SEM table."""
    lines = []
    conds = sorted(summary["conditions"])
    metrics = ["mae_x_m", "mae_y_m", "nav_time_s", "manip_time_s",
               "total_time_s", "collision_count"]
    header = f"{'metric':<16}" + "".join(
        f"cond {c:<14}" for c in conds)
    lines.append(header)
    for m in metrics:
        cells = []
        for c in conds:
            s = summary["conditions"][c][m]
            cells.append(f"{s['mean']:.4f} +- {s['sem']:.4f}")
        lines.append(f"{m:<16}" + "".join(f"{cell:<19}" for cell in cells))
    return "\n".join(lines)
