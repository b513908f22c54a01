"""Scenario files: strict, versioned, human-readable YAML with units in
field names. Unknown keys are rejected with their field path; defaults are
applied only for documented-optional fields; configs round-trip load ->
serialize -> load identically.

See docs/scenario_format.md for the full schema.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import yaml

from .base_model import BaseParams
from .controller import ControllerGains, VirtualBoundary
from .core import CellClass, OccupancyGrid, Pose2D
from .kinematics import KinematicChain
from .planning import DwaParams
from .world import LidarModel, MarkerCamera

SCHEMA_VERSION = 1

_CLASS_NAMES = {"known": CellClass.KNOWN, "semiknown": CellClass.SEMIKNOWN,
                "unknown": CellClass.UNKNOWN}


class ScenarioError(Exception):
    """Parse, schema, or range violation; message carries the field path."""


def _section(data, key, path, required=True) -> dict:
    if key not in data:
        if required:
            raise ScenarioError(f"{path}{key}: missing required section")
        return {}
    v = data[key]
    if not isinstance(v, dict):
        raise ScenarioError(f"{path}{key}: expected a mapping")
    return v


def _check_keys(d: dict, allowed: set, path: str):
    extra = set(d) - allowed
    if extra:
        raise ScenarioError(f"{path}: unknown keys {sorted(extra)}")


def _num(d: dict, key: str, path: str, default=None, lo=None, hi=None,
         required=False) -> float:
    if key not in d:
        if required:
            raise ScenarioError(f"{path}.{key}: missing required field")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{path}.{key}: expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ScenarioError(f"{path}.{key}: must be finite")
    if lo is not None and v < lo:
        raise ScenarioError(f"{path}.{key}: {v} below minimum {lo}")
    if hi is not None and v > hi:
        raise ScenarioError(f"{path}.{key}: {v} above maximum {hi}")
    return v


def _int(d: dict, key: str, path: str, default=None, lo=None,
         required=False) -> int:
    if key not in d:
        if required:
            raise ScenarioError(f"{path}.{key}: missing required field")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"{path}.{key}: expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ScenarioError(f"{path}.{key}: {v} below minimum {lo}")
    return v


def _vec(d: dict, key: str, path: str, n: int, default=None, lo=None):
    if key not in d:
        return None if default is None else list(default)
    v = d[key]
    if not isinstance(v, list) or len(v) != n:
        raise ScenarioError(f"{path}.{key}: expected a list of {n} numbers")
    out = []
    for i, x in enumerate(v):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ScenarioError(f"{path}.{key}[{i}]: expected a number")
        x = float(x)
        if not math.isfinite(x):
            raise ScenarioError(f"{path}.{key}[{i}]: must be finite")
        if lo is not None and x < lo:
            raise ScenarioError(f"{path}.{key}[{i}]: {x} below minimum {lo}")
        out.append(x)
    return out


@dataclass(frozen=True)
class ObstacleRect:
    cell_class: str
    x_min_m: float
    x_max_m: float
    y_min_m: float
    y_max_m: float


@dataclass(frozen=True)
class GridSpec:
    resolution_m: float
    width_cells: int
    height_cells: int
    origin_x_m: float
    origin_y_m: float
    obstacles: tuple[ObstacleRect, ...]

    def build(self) -> OccupancyGrid:
        grid_cells = np.zeros((self.height_cells, self.width_cells),
                              dtype=np.uint8)
        res = self.resolution_m
        for ob in self.obstacles:
            ix0 = max(0, math.floor((ob.x_min_m - self.origin_x_m) / res))
            ix1 = min(self.width_cells,
                      math.ceil((ob.x_max_m - self.origin_x_m) / res))
            iy0 = max(0, math.floor((ob.y_min_m - self.origin_y_m) / res))
            iy1 = min(self.height_cells,
                      math.ceil((ob.y_max_m - self.origin_y_m) / res))
            grid_cells[iy0:iy1, ix0:ix1] = _CLASS_NAMES[ob.cell_class]
        return OccupancyGrid(res, self.width_cells, self.height_cells,
                             Pose2D(self.origin_x_m, self.origin_y_m, 0.0),
                             grid_cells)


def _parse_grid_spec(data: dict, path: str) -> GridSpec:
    _check_keys(data, {"schema_version", "resolution_m", "width_cells",
                       "height_cells", "origin_x_m", "origin_y_m",
                       "obstacles"}, path)
    ver = _int(data, "schema_version", path, required=True)
    if ver != SCHEMA_VERSION:
        raise ScenarioError(f"{path}.schema_version: unsupported {ver}")
    obstacles = []
    raw = data.get("obstacles", [])
    if not isinstance(raw, list):
        raise ScenarioError(f"{path}.obstacles: expected a list")
    for i, ob in enumerate(raw):
        p = f"{path}.obstacles[{i}]"
        if not isinstance(ob, dict):
            raise ScenarioError(f"{p}: expected a mapping")
        _check_keys(ob, {"class", "x_min_m", "x_max_m", "y_min_m",
                         "y_max_m"}, p)
        cls = ob.get("class")
        if cls not in _CLASS_NAMES:
            raise ScenarioError(
                f"{p}.class: expected one of {sorted(_CLASS_NAMES)}")
        x0 = _num(ob, "x_min_m", p, required=True)
        x1 = _num(ob, "x_max_m", p, required=True)
        y0 = _num(ob, "y_min_m", p, required=True)
        y1 = _num(ob, "y_max_m", p, required=True)
        if x1 <= x0 or y1 <= y0:
            raise ScenarioError(f"{p}: degenerate rectangle")
        obstacles.append(ObstacleRect(cls, x0, x1, y0, y1))
    return GridSpec(
        resolution_m=_num(data, "resolution_m", path, required=True, lo=1e-6),
        width_cells=_int(data, "width_cells", path, required=True, lo=1),
        height_cells=_int(data, "height_cells", path, required=True, lo=1),
        origin_x_m=_num(data, "origin_x_m", path, default=0.0),
        origin_y_m=_num(data, "origin_y_m", path, default=0.0),
        obstacles=tuple(obstacles))


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully validated scenario; plain-Python fields so equality and YAML
    round-trips are exact."""

    schema_version: int
    seed: int
    dt_s: float
    planner_period_s: float
    grid_source: str
    grid: GridSpec
    # base
    start_x_m: float
    start_y_m: float
    start_gamma_rad: float
    wheelbase_m: float
    max_steer_rad: float
    min_turn_speed_mps: float
    footprint_radius_m: float
    fra_mount_xyz_m: tuple[float, float, float]
    # task
    object_xyz_m: tuple[float, float, float]
    object_yaw_rad: float
    bin_xyz_fra_m: tuple[float, float, float]
    approach_standoff_m: float
    # arms
    chain_source: str
    joint_damping_nms_per_rad: float
    # sensors
    lidar_beams: int
    lidar_range_m: float
    lidar_rate_hz: float
    camera_mount_xyz_m: tuple[float, float, float]
    camera_mount_rpy_rad: tuple[float, float, float]
    camera_fov_half_rad: float
    camera_range_m: tuple[float, float]
    camera_noise_sigma_m: float
    # controller
    vb_i_m: float
    vb_e_m: float
    kp_nm_per_rad: tuple[float, ...]
    kd_nms_per_rad: tuple[float, ...]
    alpha_nullspace: float
    k_fmr_diag: tuple[float, ...]
    k_v_free: float
    k_v_obstacle: float
    k_r: float
    v_gamma_max_rad_s: float
    hold_stiffness: tuple[float, ...]
    hold_damping: tuple[float, ...]
    k_fra_diag: tuple[float, ...]
    k_grasp_guidance_n_per_m: float
    paper_literal_damping: bool
    obstacle_near_radius_m: float
    # planner
    dwa_v_samples: int
    dwa_gamma_samples: int
    dwa_dt_plan_s: float
    dwa_horizon_s: float
    dwa_accel_v: float
    dwa_accel_gamma: float
    dwa_w_heading: float
    dwa_w_clearance: float
    dwa_w_velocity: float
    dwa_clearance_cap_m: float
    # switching / trial
    plan_margin_m: float
    n_confirm: int
    align_epsilon_rad: float
    grasp_epsilon_m: float
    timeout_s: float
    # scripted operator defaults
    operator_waypoints_xy_m: tuple[tuple[float, float], ...]
    operator_tracking_gain_n_per_m: float
    operator_yaw_gain_nm_per_rad: float
    operator_compliance: float
    operator_noise_sigma_n: float
    distraction_gap_s: tuple[float, float]
    distraction_duration_s: float

    # ---- builders ----------------------------------------------------------

    def build_grid(self) -> OccupancyGrid:
        return self.grid.build()

    def base_params(self) -> BaseParams:
        return BaseParams(wheelbase_m=self.wheelbase_m,
                          max_steer_rad=self.max_steer_rad,
                          min_turn_speed_mps=self.min_turn_speed_mps,
                          footprint_radius_m=self.footprint_radius_m)

    def controller_gains(self) -> ControllerGains:
        return ControllerGains(
            kp=np.array(self.kp_nm_per_rad),
            kd=np.array(self.kd_nms_per_rad),
            alpha=self.alpha_nullspace,
            k_fmr_diag=np.array(self.k_fmr_diag),
            k_v_free=self.k_v_free, k_v_obstacle=self.k_v_obstacle,
            k_r=self.k_r, v_gamma_max=self.v_gamma_max_rad_s,
            hold_stiffness=np.array(self.hold_stiffness),
            hold_damping=np.array(self.hold_damping),
            k_fra_diag=np.array(self.k_fra_diag),
            paper_literal_damping=self.paper_literal_damping)

    def virtual_boundary(self) -> VirtualBoundary:
        return VirtualBoundary(vb_i=self.vb_i_m, vb_e=self.vb_e_m)

    def dwa_params(self) -> DwaParams:
        return DwaParams(
            v_samples=self.dwa_v_samples,
            gamma_samples=self.dwa_gamma_samples,
            dt_plan_s=self.dwa_dt_plan_s, horizon_s=self.dwa_horizon_s,
            accel_v=self.dwa_accel_v, accel_gamma=self.dwa_accel_gamma,
            w_heading=self.dwa_w_heading, w_clearance=self.dwa_w_clearance,
            w_velocity=self.dwa_w_velocity,
            clearance_cap_m=self.dwa_clearance_cap_m,
            footprint_radius_m=self.footprint_radius_m)

    def lidar_model(self) -> LidarModel:
        return LidarModel(beams=self.lidar_beams,
                          max_range_m=self.lidar_range_m,
                          rate_hz=self.lidar_rate_hz)

    def marker_camera(self) -> MarkerCamera:
        return MarkerCamera(mount_xyz_m=self.camera_mount_xyz_m,
                            mount_rpy_rad=self.camera_mount_rpy_rad,
                            fov_half_rad=self.camera_fov_half_rad,
                            range_min_m=self.camera_range_m[0],
                            range_max_m=self.camera_range_m[1],
                            noise_sigma_m=self.camera_noise_sigma_m)

    def load_chain(self, base_dir: Path | None = None) -> KinematicChain:
        if self.chain_source == "builtin:panda":
            return KinematicChain.default()
        p = Path(self.chain_source)
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        return KinematicChain.load(p)

    def start_pose(self) -> Pose2D:
        return Pose2D(self.start_x_m, self.start_y_m, self.start_gamma_rad)

    def scenario_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


def _parse_scenario(data: dict, base_dir: Path) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ScenarioError("scenario: expected a mapping at top level")
    _check_keys(data, {"schema_version", "seed", "timestep", "grid", "fmr",
                       "object", "bin", "arms", "lidar", "camera",
                       "controller", "planner", "trial", "operator"},
                "scenario")
    ver = _int(data, "schema_version", "scenario", required=True)
    if ver != SCHEMA_VERSION:
        raise ScenarioError(f"scenario.schema_version: unsupported {ver}")
    seed = _int(data, "seed", "scenario", default=0, lo=0)

    ts = _section(data, "timestep", "scenario.", required=False)
    _check_keys(ts, {"dt_s", "planner_period_s"}, "scenario.timestep")
    dt = _num(ts, "dt_s", "scenario.timestep", default=0.001, lo=1e-6)
    pp = _num(ts, "planner_period_s", "scenario.timestep", default=0.1,
              lo=dt)
    if abs(pp / dt - round(pp / dt)) > 1e-9:
        raise ScenarioError("scenario.timestep.planner_period_s: must be an "
                            "integer multiple of dt_s")

    gr = _section(data, "grid", "scenario.")
    _check_keys(gr, {"source"}, "scenario.grid")
    if "source" not in gr or not isinstance(gr["source"], str):
        raise ScenarioError("scenario.grid.source: missing grid file path")
    grid_source = gr["source"]
    grid_path = Path(grid_source)
    if not grid_path.is_absolute():
        grid_path = base_dir / grid_path
    try:
        grid_raw = yaml.safe_load(grid_path.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"scenario.grid.source: {grid_path} not found")
    except yaml.YAMLError as e:
        raise ScenarioError(f"scenario.grid.source: parse error: {e}")
    grid_spec = _parse_grid_spec(grid_raw, "grid")

    fmr = _section(data, "fmr", "scenario.")
    _check_keys(fmr, {"start_x_m", "start_y_m", "start_gamma_rad",
                      "wheelbase_m", "max_steer_rad", "min_turn_speed_mps",
                      "footprint_radius_m", "fra_mount_x_m", "fra_mount_y_m",
                      "fra_mount_z_m"}, "scenario.fmr")
    obj = _section(data, "object", "scenario.")
    _check_keys(obj, {"x_m", "y_m", "height_m", "yaw_rad"}, "scenario.object")
    bn = _section(data, "bin", "scenario.")
    _check_keys(bn, {"x_m", "y_m", "z_m"}, "scenario.bin")
    arms = _section(data, "arms", "scenario.", required=False)
    _check_keys(arms, {"chain", "joint_damping_nms_per_rad"}, "scenario.arms")
    lid = _section(data, "lidar", "scenario.", required=False)
    _check_keys(lid, {"beams", "max_range_m", "rate_hz"}, "scenario.lidar")
    cam = _section(data, "camera", "scenario.", required=False)
    _check_keys(cam, {"mount_xyz_m", "mount_rpy_rad", "fov_half_rad",
                      "range_min_m", "range_max_m", "noise_sigma_m"},
                "scenario.camera")
    ctl = _section(data, "controller", "scenario.", required=False)
    _check_keys(ctl, {"vb_i_m", "vb_e_m", "kp_nm_per_rad", "kd_nms_per_rad",
                      "alpha_nullspace", "k_fmr_diag", "k_v_free",
                      "k_v_obstacle", "k_r", "v_gamma_max_rad_s",
                      "hold_stiffness", "hold_damping", "k_fra_diag",
                      "paper_literal_damping", "obstacle_near_radius_m",
                      "k_grasp_guidance_n_per_m"}, "scenario.controller")
    pl = _section(data, "planner", "scenario.", required=False)
    _check_keys(pl, {"v_samples", "gamma_samples", "dt_plan_s", "horizon_s",
                     "accel_v", "accel_gamma", "w_heading", "w_clearance",
                     "w_velocity", "clearance_cap_m"}, "scenario.planner")
    tr = _section(data, "trial", "scenario.", required=False)
    _check_keys(tr, {"n_confirm", "align_epsilon_rad", "grasp_epsilon_m",
                     "timeout_s", "approach_standoff_m", "plan_margin_m"},
                "scenario.trial")
    op = _section(data, "operator", "scenario.", required=False)
    _check_keys(op, {"waypoints_xy_m", "tracking_gain_n_per_m",
                     "yaw_gain_nm_per_rad", "compliance", "noise_sigma_n",
                     "distraction_min_gap_s", "distraction_max_gap_s",
                     "distraction_duration_s"}, "scenario.operator")

    vb_i = _num(ctl, "vb_i_m", "scenario.controller", default=0.05, lo=1e-6)
    vb_e = _num(ctl, "vb_e_m", "scenario.controller", default=0.4)
    if vb_e <= vb_i:
        raise ScenarioError("scenario.controller.vb_e_m: must exceed vb_i_m")

    plit = ctl.get("paper_literal_damping", False)
    if not isinstance(plit, bool):
        raise ScenarioError(
            "scenario.controller.paper_literal_damping: expected a boolean")

    waypoints_raw = op.get("waypoints_xy_m", [])
    if not isinstance(waypoints_raw, list):
        raise ScenarioError("scenario.operator.waypoints_xy_m: expected list")
    waypoints = []
    for i, wpt in enumerate(waypoints_raw):
        if not isinstance(wpt, list) or len(wpt) != 2:
            raise ScenarioError(
                f"scenario.operator.waypoints_xy_m[{i}]: expected [x, y]")
        waypoints.append((float(wpt[0]), float(wpt[1])))

    gap_lo = _num(op, "distraction_min_gap_s", "scenario.operator",
                  default=10.0, lo=0.1)
    gap_hi = _num(op, "distraction_max_gap_s", "scenario.operator",
                  default=30.0)
    if gap_hi < gap_lo:
        raise ScenarioError("scenario.operator.distraction_max_gap_s: must "
                            "be >= distraction_min_gap_s")

    chain_source = arms.get("chain", "builtin:panda")
    if not isinstance(chain_source, str):
        raise ScenarioError("scenario.arms.chain: expected a string")

    cfg = ScenarioConfig(
        schema_version=ver,
        seed=seed,
        dt_s=dt,
        planner_period_s=pp,
        grid_source=grid_source,
        grid=grid_spec,
        start_x_m=_num(fmr, "start_x_m", "scenario.fmr", required=True),
        start_y_m=_num(fmr, "start_y_m", "scenario.fmr", required=True),
        start_gamma_rad=_num(fmr, "start_gamma_rad", "scenario.fmr",
                             default=0.0),
        wheelbase_m=_num(fmr, "wheelbase_m", "scenario.fmr", default=0.65,
                         lo=1e-3),
        max_steer_rad=_num(fmr, "max_steer_rad", "scenario.fmr",
                           default=0.524, lo=1e-3, hi=1.4),
        min_turn_speed_mps=_num(fmr, "min_turn_speed_mps", "scenario.fmr",
                                default=0.02, lo=0.0),
        footprint_radius_m=_num(fmr, "footprint_radius_m", "scenario.fmr",
                                default=0.45, lo=0.01),
        fra_mount_xyz_m=(_num(fmr, "fra_mount_x_m", "scenario.fmr",
                              default=0.2),
                         _num(fmr, "fra_mount_y_m", "scenario.fmr",
                              default=0.0),
                         _num(fmr, "fra_mount_z_m", "scenario.fmr",
                              default=0.3)),
        object_xyz_m=(_num(obj, "x_m", "scenario.object", required=True),
                      _num(obj, "y_m", "scenario.object", required=True),
                      _num(obj, "height_m", "scenario.object",
                           required=True, lo=0.0)),
        object_yaw_rad=_num(obj, "yaw_rad", "scenario.object", default=0.0),
        bin_xyz_fra_m=(_num(bn, "x_m", "scenario.bin", required=True),
                       _num(bn, "y_m", "scenario.bin", required=True),
                       _num(bn, "z_m", "scenario.bin", required=True)),
        approach_standoff_m=_num(tr, "approach_standoff_m", "scenario.trial",
                                 default=0.52, lo=0.1),
        chain_source=chain_source,
        joint_damping_nms_per_rad=_num(arms, "joint_damping_nms_per_rad",
                                       "scenario.arms", default=5.0, lo=0.0),
        lidar_beams=_int(lid, "beams", "scenario.lidar", default=360, lo=1),
        lidar_range_m=_num(lid, "max_range_m", "scenario.lidar", default=8.0,
                           lo=0.1),
        lidar_rate_hz=_num(lid, "rate_hz", "scenario.lidar", default=10.0,
                           lo=0.1),
        camera_mount_xyz_m=tuple(_vec(cam, "mount_xyz_m", "scenario.camera",
                                      3, default=[0.0, 0.0, 0.0])),
        camera_mount_rpy_rad=tuple(_vec(cam, "mount_rpy_rad",
                                        "scenario.camera", 3,
                                        default=[0.0,
                                                 -1.5707963267948966,
                                                 0.0])),
        camera_fov_half_rad=_num(cam, "fov_half_rad", "scenario.camera",
                                 default=0.5, lo=1e-3, hi=1.5707),
        camera_range_m=(_num(cam, "range_min_m", "scenario.camera",
                             default=0.1, lo=0.0),
                        _num(cam, "range_max_m", "scenario.camera",
                             default=1.5)),
        camera_noise_sigma_m=_num(cam, "noise_sigma_m", "scenario.camera",
                                  default=0.0, lo=0.0),
        vb_i_m=vb_i,
        vb_e_m=vb_e,
        kp_nm_per_rad=tuple(_vec(ctl, "kp_nm_per_rad", "scenario.controller",
                                 7, default=[60.0] * 7, lo=0.0)),
        kd_nms_per_rad=tuple(_vec(ctl, "kd_nms_per_rad",
                                  "scenario.controller", 7,
                                  default=[12.0] * 7, lo=0.0)),
        alpha_nullspace=_num(ctl, "alpha_nullspace", "scenario.controller",
                             default=4.0, lo=0.0),
        k_fmr_diag=tuple(_vec(ctl, "k_fmr_diag", "scenario.controller", 6,
                              default=[20.0, 20.0, 20.0, 5.0, 5.0, 10.0],
                              lo=0.0)),
        k_v_free=_num(ctl, "k_v_free", "scenario.controller", default=0.5),
        k_v_obstacle=_num(ctl, "k_v_obstacle", "scenario.controller",
                          default=0.2),
        k_r=_num(ctl, "k_r", "scenario.controller", default=-1.0),
        v_gamma_max_rad_s=_num(ctl, "v_gamma_max_rad_s",
                               "scenario.controller", default=1.0, lo=0.01),
        hold_stiffness=tuple(_vec(ctl, "hold_stiffness",
                                  "scenario.controller", 6,
                                  default=[0.0, 200.0, 200.0, 20.0, 20.0,
                                           0.0], lo=0.0)),
        hold_damping=tuple(_vec(ctl, "hold_damping", "scenario.controller",
                                6, default=[0.0, 28.0, 28.0, 6.0, 6.0, 0.0],
                                lo=0.0)),
        k_fra_diag=tuple(_vec(ctl, "k_fra_diag", "scenario.controller", 6,
                              default=[150.0, 150.0, 150.0, 8.0, 8.0, 8.0],
                              lo=0.0)),
        k_grasp_guidance_n_per_m=_num(ctl, "k_grasp_guidance_n_per_m",
                                      "scenario.controller", default=120.0,
                                      lo=0.0),
        paper_literal_damping=plit,
        obstacle_near_radius_m=_num(ctl, "obstacle_near_radius_m",
                                    "scenario.controller", default=1.0,
                                    lo=0.0),
        dwa_v_samples=_int(pl, "v_samples", "scenario.planner", default=5,
                           lo=3),
        dwa_gamma_samples=_int(pl, "gamma_samples", "scenario.planner",
                               default=11, lo=3),
        dwa_dt_plan_s=_num(pl, "dt_plan_s", "scenario.planner",
                           default=0.025, lo=1e-4),
        dwa_horizon_s=_num(pl, "horizon_s", "scenario.planner", default=1.5,
                           lo=0.1),
        dwa_accel_v=_num(pl, "accel_v", "scenario.planner", default=2.0,
                         lo=1e-3),
        dwa_accel_gamma=_num(pl, "accel_gamma", "scenario.planner",
                             default=4.0, lo=1e-3),
        dwa_w_heading=_num(pl, "w_heading", "scenario.planner", default=0.6,
                           lo=0.0),
        dwa_w_clearance=_num(pl, "w_clearance", "scenario.planner",
                             default=0.3, lo=0.0),
        dwa_w_velocity=_num(pl, "w_velocity", "scenario.planner",
                            default=0.1, lo=0.0),
        dwa_clearance_cap_m=_num(pl, "clearance_cap_m", "scenario.planner",
                                 default=1.0, lo=0.01),
        plan_margin_m=_num(tr, "plan_margin_m", "scenario.trial",
                           default=0.15, lo=0.0),
        n_confirm=_int(tr, "n_confirm", "scenario.trial", default=5, lo=1),
        align_epsilon_rad=_num(tr, "align_epsilon_rad", "scenario.trial",
                               default=0.01, lo=1e-6),
        grasp_epsilon_m=_num(tr, "grasp_epsilon_m", "scenario.trial",
                             default=0.02, lo=1e-4),
        timeout_s=_num(tr, "timeout_s", "scenario.trial", default=300.0,
                       lo=1.0),
        operator_waypoints_xy_m=tuple(waypoints),
        operator_tracking_gain_n_per_m=_num(op, "tracking_gain_n_per_m",
                                            "scenario.operator",
                                            default=120.0, lo=0.0),
        operator_yaw_gain_nm_per_rad=_num(op, "yaw_gain_nm_per_rad",
                                          "scenario.operator", default=15.0,
                                          lo=0.0),
        operator_compliance=_num(op, "compliance", "scenario.operator",
                                 default=1.0, lo=0.0),
        operator_noise_sigma_n=_num(op, "noise_sigma_n", "scenario.operator",
                                    default=0.5, lo=0.0),
        distraction_gap_s=(gap_lo, gap_hi),
        distraction_duration_s=_num(op, "distraction_duration_s",
                                    "scenario.operator", default=1.5,
                                    lo=0.01),
    )
    return cfg


def default_scenario_path() -> Path:
    """Path of the bundled desk-scale scenario."""
    from importlib import resources
    return Path(str(resources.files("telemanip.data")
                    .joinpath("default_scenario.yaml")))


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ScenarioError(f"scenario: parse error: {e}")
    return _parse_scenario(data, path.parent)


def serialize_scenario(cfg: ScenarioConfig) -> str:
    """Canonical YAML with every field written explicitly."""
    doc = {
        "schema_version": cfg.schema_version,
        "seed": cfg.seed,
        "timestep": {"dt_s": cfg.dt_s,
                     "planner_period_s": cfg.planner_period_s},
        "grid": {"source": cfg.grid_source},
        "fmr": {
            "start_x_m": cfg.start_x_m, "start_y_m": cfg.start_y_m,
            "start_gamma_rad": cfg.start_gamma_rad,
            "wheelbase_m": cfg.wheelbase_m,
            "max_steer_rad": cfg.max_steer_rad,
            "min_turn_speed_mps": cfg.min_turn_speed_mps,
            "footprint_radius_m": cfg.footprint_radius_m,
            "fra_mount_x_m": cfg.fra_mount_xyz_m[0],
            "fra_mount_y_m": cfg.fra_mount_xyz_m[1],
            "fra_mount_z_m": cfg.fra_mount_xyz_m[2],
        },
        "object": {"x_m": cfg.object_xyz_m[0], "y_m": cfg.object_xyz_m[1],
                   "height_m": cfg.object_xyz_m[2],
                   "yaw_rad": cfg.object_yaw_rad},
        "bin": {"x_m": cfg.bin_xyz_fra_m[0], "y_m": cfg.bin_xyz_fra_m[1],
                "z_m": cfg.bin_xyz_fra_m[2]},
        "arms": {"chain": cfg.chain_source,
                 "joint_damping_nms_per_rad": cfg.joint_damping_nms_per_rad},
        "lidar": {"beams": cfg.lidar_beams,
                  "max_range_m": cfg.lidar_range_m,
                  "rate_hz": cfg.lidar_rate_hz},
        "camera": {
            "mount_xyz_m": list(cfg.camera_mount_xyz_m),
            "mount_rpy_rad": list(cfg.camera_mount_rpy_rad),
            "fov_half_rad": cfg.camera_fov_half_rad,
            "range_min_m": cfg.camera_range_m[0],
            "range_max_m": cfg.camera_range_m[1],
            "noise_sigma_m": cfg.camera_noise_sigma_m,
        },
        "controller": {
            "vb_i_m": cfg.vb_i_m, "vb_e_m": cfg.vb_e_m,
            "kp_nm_per_rad": list(cfg.kp_nm_per_rad),
            "kd_nms_per_rad": list(cfg.kd_nms_per_rad),
            "alpha_nullspace": cfg.alpha_nullspace,
            "k_fmr_diag": list(cfg.k_fmr_diag),
            "k_v_free": cfg.k_v_free, "k_v_obstacle": cfg.k_v_obstacle,
            "k_r": cfg.k_r, "v_gamma_max_rad_s": cfg.v_gamma_max_rad_s,
            "hold_stiffness": list(cfg.hold_stiffness),
            "hold_damping": list(cfg.hold_damping),
            "k_fra_diag": list(cfg.k_fra_diag),
            "k_grasp_guidance_n_per_m": cfg.k_grasp_guidance_n_per_m,
            "paper_literal_damping": cfg.paper_literal_damping,
            "obstacle_near_radius_m": cfg.obstacle_near_radius_m,
        },
        "planner": {
            "v_samples": cfg.dwa_v_samples,
            "gamma_samples": cfg.dwa_gamma_samples,
            "dt_plan_s": cfg.dwa_dt_plan_s,
            "horizon_s": cfg.dwa_horizon_s,
            "accel_v": cfg.dwa_accel_v,
            "accel_gamma": cfg.dwa_accel_gamma,
            "w_heading": cfg.dwa_w_heading,
            "w_clearance": cfg.dwa_w_clearance,
            "w_velocity": cfg.dwa_w_velocity,
            "clearance_cap_m": cfg.dwa_clearance_cap_m,
        },
        "trial": {
            "n_confirm": cfg.n_confirm,
            "align_epsilon_rad": cfg.align_epsilon_rad,
            "grasp_epsilon_m": cfg.grasp_epsilon_m,
            "timeout_s": cfg.timeout_s,
            "approach_standoff_m": cfg.approach_standoff_m,
            "plan_margin_m": cfg.plan_margin_m,
        },
        "operator": {
            "waypoints_xy_m": [list(w) for w in cfg.operator_waypoints_xy_m],
            "tracking_gain_n_per_m": cfg.operator_tracking_gain_n_per_m,
            "yaw_gain_nm_per_rad": cfg.operator_yaw_gain_nm_per_rad,
            "compliance": cfg.operator_compliance,
            "noise_sigma_n": cfg.operator_noise_sigma_n,
            "distraction_min_gap_s": cfg.distraction_gap_s[0],
            "distraction_max_gap_s": cfg.distraction_gap_s[1],
            "distraction_duration_s": cfg.distraction_duration_s,
        },
    }
    return yaml.safe_dump(doc, sort_keys=False)
