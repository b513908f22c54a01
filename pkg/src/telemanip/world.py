"""Deterministic fixed-step world: leader/follower joint dynamics, Ackermann
base integration, lidar discovery, eye-in-hand marker visibility, the
graspability test, collision detection against all obstacle classes, and
object attach/release.

Arms integrate as unit-inertia double integrators with viscous damping
(gravity/friction are assumed compensated upstream), semi-implicit Euler at
1 ms. The base is a kinematic bicycle; commanded velocities apply directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .base_model import BaseParams, bicycle_yaw_rate
from .controller import LeaderCommand
from .core import (BaseVelocity, CellClass, OccupancyGrid, Pose2D, Pose6,
                   Wrench6, normalize_angle, rotation_rpy, rpy_from_rotation)
from .kinematics import KinematicChain, fk_with_jacobian
from .modes import Mode


class SimFault(Exception):
    """Non-finite state detected; carries a diagnostic dump."""


@dataclass(frozen=True)
class LidarModel:
    beams: int = 360
    max_range_m: float = 8.0
    span_rad: float = 2.0 * math.pi
    mount_x_m: float = 0.0
    mount_y_m: float = 0.0
    rate_hz: float = 10.0

    def __post_init__(self):
        if self.beams <= 0 or self.max_range_m <= 0:
            raise ValueError("beams and range must be positive")


@dataclass(frozen=True)
class MarkerCamera:
    """Eye-in-hand detector modeled as a frustum cone along its +x axis."""

    mount_xyz_m: tuple[float, float, float] = (0.0, 0.0, 0.0)
    mount_rpy_rad: tuple[float, float, float] = (0.0, 0.0, 0.0)
    fov_half_rad: float = 0.5
    range_min_m: float = 0.1
    range_max_m: float = 1.5
    noise_sigma_m: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.fov_half_rad < math.pi / 2):
            raise ValueError("fov half-angle must be in (0, pi/2)")
        if not (0.0 <= self.range_min_m < self.range_max_m):
            raise ValueError("need 0 <= range_min < range_max")


@dataclass
class CollisionEvent:
    tick: int
    cell: tuple[int, int]   # (ix, iy)


GRASP_BAND_X = (0.20, 0.45)   # graspability window in front of the arm, m


def graspable(obj_in_fra: np.ndarray,
              lateral_halfwidth_m: float = 0.20) -> bool:
    """True iff the object sits in the frontal graspability band."""
    x, y = float(obj_in_fra[0]), float(obj_in_fra[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("object pose must be finite")
    return GRASP_BAND_X[0] <= x <= GRASP_BAND_X[1] and \
        abs(y) <= lateral_halfwidth_m


class World:
    """Owns all simulation state; advanced only by step(). Single-threaded;
    hand out snapshot() copies to other threads."""

    def __init__(self, grid: OccupancyGrid, leader_chain: KinematicChain,
                 follower_chain: KinematicChain, base_params: BaseParams,
                 lidar: LidarModel, camera: MarkerCamera,
                 base_start: Pose2D, object_xyz: np.ndarray,
                 object_yaw: float, fra_mount_xyz: np.ndarray,
                 bin_xyz_fra: np.ndarray, joint_damping: float = 5.0,
                 dt: float = 0.001, grasp_epsilon_m: float = 0.02,
                 marker_noise_seed: int = 0):
        self.grid = grid
        self.leader_chain = leader_chain
        self.follower_chain = follower_chain
        self.base_params = base_params
        self.lidar = lidar
        self.camera = camera
        self.dt = float(dt)
        self.joint_damping = float(joint_damping)
        self.grasp_epsilon_m = float(grasp_epsilon_m)

        self.tick = 0
        self.t = 0.0
        self.q_lra = leader_chain.home_q.copy()
        self.qd_lra = np.zeros(7)
        self.q_fra = follower_chain.home_q.copy()
        self.qd_fra = np.zeros(7)
        self.base_pose = base_start
        self.base_vel = BaseVelocity(0.0, 0.0)
        self.object_xyz = np.asarray(object_xyz, dtype=float).copy()
        self.object_yaw = float(object_yaw)
        self.object_attached = False
        self.fra_mount_xyz = np.asarray(fra_mount_xyz, dtype=float)
        self.bin_xyz_fra = np.asarray(bin_xyz_fra, dtype=float)
        self.mode = Mode.NAVIGATION
        self.collision_events: list[CollisionEvent] = []
        self._collided_cells: set[tuple[int, int]] = set()
        self.discovery_version = 0

        self._lidar_period = max(1, int(round(1.0 / (lidar.rate_hz * dt))))
        occ = grid.occupied_any()
        if occ.any():
            dist, idx = ndimage.distance_transform_edt(~occ,
                                                       return_indices=True)
            self._hazard_m = dist * grid.resolution
            self._hazard_idx = idx          # nearest occupied (iy, ix)
        else:
            self._hazard_m = np.full(occ.shape, math.inf)
            self._hazard_idx = None
        # static obstacle cell coordinates for the obstacle_near predicate
        iys, ixs = np.nonzero(occ)
        self._occ_ixs = ixs
        self._occ_iys = iys
        self._rng = np.random.default_rng(marker_noise_seed)
        self._camera_R = rotation_rpy(*camera.mount_rpy_rad)
        self._leader_fk_cache: tuple[int, np.ndarray, np.ndarray,
                                     np.ndarray] | None = None
        self._follower_fk_cache: tuple[int, np.ndarray, np.ndarray,
                                       np.ndarray] | None = None
        # pre-marked discoveries from a first scan at the start pose
        self.lidar_scan()

    # --- kinematic queries -------------------------------------------------

    def leader_fk(self):
        """(p, R, J) of the leader end-effector, cached per tick."""
        c = self._leader_fk_cache
        if c is None or c[0] != self.tick:
            p, R, J = fk_with_jacobian(self.leader_chain, self.q_lra,
                                       check_limits=False)
            self._leader_fk_cache = (self.tick, p, R, J)
            return p, R, J
        return c[1], c[2], c[3]

    def follower_fk(self):
        c = self._follower_fk_cache
        if c is None or c[0] != self.tick:
            p, R, J = fk_with_jacobian(self.follower_chain, self.q_fra,
                                       check_limits=False)
            self._follower_fk_cache = (self.tick, p, R, J)
            return p, R, J
        return c[1], c[2], c[3]

    def leader_pose(self) -> Pose6:
        p, R, _ = self.leader_fk()
        return Pose6(position=tuple(p), rpy=rpy_from_rotation(R))

    def follower_pose(self) -> Pose6:
        p, R, _ = self.follower_fk()
        return Pose6(position=tuple(p), rpy=rpy_from_rotation(R))

    def fra_base_origin_world(self) -> np.ndarray:
        """World position of the follower-arm base (mounted on the deck)."""
        c, s = math.cos(self.base_pose.gamma), math.sin(self.base_pose.gamma)
        mx, my, mz = self.fra_mount_xyz
        return np.array([self.base_pose.x + c * mx - s * my,
                         self.base_pose.y + s * mx + c * my, mz])

    def world_to_fra(self, p_world: np.ndarray) -> np.ndarray:
        """Express a world point in the follower-arm base frame."""
        org = self.fra_base_origin_world()
        d = np.asarray(p_world, dtype=float) - org
        c, s = math.cos(self.base_pose.gamma), math.sin(self.base_pose.gamma)
        return np.array([c * d[0] + s * d[1], -s * d[0] + c * d[1], d[2]])

    def object_in_fra(self) -> np.ndarray:
        return self.world_to_fra(self.object_xyz)

    # --- sensing ------------------------------------------------------------

    def lidar_scan(self) -> int:
        """Raycast; first known/semi-known cell per beam within range becomes
        discovered. Unknown-class cells are transparent. Returns newly
        discovered cell count."""
        g = self.grid
        ld = self.lidar
        c, s = math.cos(self.base_pose.gamma), math.sin(self.base_pose.gamma)
        ox = self.base_pose.x + c * ld.mount_x_m - s * ld.mount_y_m
        oy = self.base_pose.y + s * ld.mount_x_m + c * ld.mount_y_m
        rel = np.linspace(-ld.span_rad / 2, ld.span_rad / 2, ld.beams,
                          endpoint=False)
        ang = rel + self.base_pose.gamma
        step = g.resolution * 0.5
        ts = np.arange(step, ld.max_range_m + step, step)
        px = ox + np.outer(ts, np.cos(ang))        # (T, B)
        py = oy + np.outer(ts, np.sin(ang))
        ixs = np.floor((px - g.origin.x) / g.resolution).astype(np.int64)
        iys = np.floor((py - g.origin.y) / g.resolution).astype(np.int64)
        valid = (ixs >= 0) & (ixs < g.width) & (iys >= 0) & (iys < g.height)
        cls = np.zeros(ixs.shape, dtype=np.uint8)
        cls[valid] = g.cells[iys[valid], ixs[valid]]
        opaque = (cls == CellClass.KNOWN) | (cls == CellClass.SEMIKNOWN)
        has_hit = opaque.any(axis=0)
        first = opaque.argmax(axis=0)
        beams = np.nonzero(has_hit)[0]
        if beams.size == 0:
            return 0
        hit_ix = ixs[first[beams], beams]
        hit_iy = iys[first[beams], beams]
        n = self.grid.mark_discovered(hit_ix, hit_iy)
        if n:
            self.discovery_version += 1
        return n

    def marker_visible(self) -> np.ndarray | None:
        """Object position in the follower-arm base frame when the marker
        lies inside the camera frustum cone and range band, else None."""
        p_ee, R_ee, _ = self.follower_fk()
        cam_p = p_ee + R_ee @ np.asarray(self.camera.mount_xyz_m)
        cam_R = R_ee @ self._camera_R
        obj_fra = self.object_in_fra()
        rel = cam_R.T @ (obj_fra - cam_p)
        rng = float(np.linalg.norm(rel))
        if rng < self.camera.range_min_m or rng > self.camera.range_max_m:
            return None
        if rel[0] <= 0.0:
            return None
        if math.atan2(math.hypot(rel[1], rel[2]), rel[0]) > \
                self.camera.fov_half_rad:
            return None
        if self.camera.noise_sigma_m > 0.0:
            return obj_fra + self._rng.normal(
                0.0, self.camera.noise_sigma_m, 3)
        return obj_fra.copy()

    def obstacle_near(self, radius_m: float = 1.0) -> bool:
        """Any lidar-discovered obstacle cell within radius of the base
        footprint (used to derate the drive gain near obstacles)."""
        if self._occ_ixs.size == 0:
            return False
        disc = self.grid.discovered[self._occ_iys, self._occ_ixs]
        if not disc.any():
            return False
        g = self.grid
        cx = g.origin.x + (self._occ_ixs[disc] + 0.5) * g.resolution
        cy = g.origin.y + (self._occ_iys[disc] + 0.5) * g.resolution
        d2 = (cx - self.base_pose.x) ** 2 + (cy - self.base_pose.y) ** 2
        reach = radius_m + self.base_params.footprint_radius_m
        return bool((d2 <= reach * reach).any())

    # --- grasping -----------------------------------------------------------

    def try_grasp(self) -> bool:
        """Attach the object when the follower end-effector is within the
        grasp tolerance; idempotent."""
        if self.mode != Mode.MANIPULATION:
            return self.object_attached
        if self.object_attached:
            return True
        p_ee, _, _ = self.follower_fk()
        ee_world = self._fra_point_to_world(p_ee)
        if np.linalg.norm(ee_world - self.object_xyz) <= self.grasp_epsilon_m:
            self.object_attached = True
        return self.object_attached

    def release_object(self, at_xyz_world: np.ndarray | None = None):
        if not self.object_attached:
            return
        self.object_attached = False
        if at_xyz_world is not None:
            self.object_xyz = np.asarray(at_xyz_world, dtype=float).copy()

    def _fra_point_to_world(self, p_fra: np.ndarray) -> np.ndarray:
        org = self.fra_base_origin_world()
        c, s = math.cos(self.base_pose.gamma), math.sin(self.base_pose.gamma)
        return org + np.array([c * p_fra[0] - s * p_fra[1],
                               s * p_fra[0] + c * p_fra[1], p_fra[2]])

    # --- integration ---------------------------------------------------------

    def step(self, leader_cmd: LeaderCommand, operator_wrench: Wrench6,
             base_cmd: BaseVelocity, follower_torque: np.ndarray) -> None:
        """Advance one tick: semi-implicit joint integration, bicycle base
        integration, periodic lidar, collision recording, attached-object
        update. Raises SimFault on non-finite state."""
        dt = self.dt
        _, _, J_l = self.leader_fk()
        tau_l = leader_cmd.torque + J_l.T @ operator_wrench.as_array() \
            - self.joint_damping * self.qd_lra
        self.qd_lra = self.qd_lra + dt * tau_l
        self.q_lra = self.q_lra + dt * self.qd_lra

        tau_f = follower_torque - self.joint_damping * self.qd_fra
        self.qd_fra = self.qd_fra + dt * tau_f
        self.q_fra = self.q_fra + dt * self.qd_fra

        v = base_cmd.v_x
        yaw_rate = bicycle_yaw_rate(v, base_cmd.v_gamma, self.base_params)
        x0, y0 = self.base_pose.x, self.base_pose.y
        gma = self.base_pose.gamma
        x1 = x0 + v * math.cos(gma) * dt
        y1 = y0 + v * math.sin(gma) * dt
        gma1 = normalize_angle(gma + yaw_rate * dt)
        self.base_pose = Pose2D(x1, y1, gma1)
        self.base_vel = BaseVelocity(v, yaw_rate)

        self.tick += 1
        self.t = self.tick * dt

        if not (np.isfinite(self.q_lra).all() and np.isfinite(self.q_fra).all()
                and math.isfinite(x1) and math.isfinite(y1)):
            raise SimFault(f"non-finite state at tick {self.tick}: "
                           f"q_lra={self.q_lra}, q_fra={self.q_fra}, "
                           f"base=({x1}, {y1}, {gma1})")

        self._record_collisions(x0, y0, x1, y1)

        if self.tick % self._lidar_period == 0:
            self.lidar_scan()

        if self.object_attached:
            p_ee, R_ee, _ = self.follower_fk()
            self.object_xyz = self._fra_point_to_world(p_ee)
            self.object_yaw = normalize_angle(
                self.base_pose.gamma + rpy_from_rotation(R_ee)[2])

    def _record_collisions(self, x0, y0, x1, y1):
        g = self.grid
        dist = math.hypot(x1 - x0, y1 - y0)
        n_sub = max(1, int(math.ceil(dist / (g.resolution * 0.25))))
        for i in range(1, n_sub + 1):
            x = x0 + (x1 - x0) * i / n_sub
            y = y0 + (y1 - y0) * i / n_sub
            ix = math.floor((x - g.origin.x) / g.resolution)
            iy = math.floor((y - g.origin.y) / g.resolution)
            if not (0 <= ix < g.width and 0 <= iy < g.height):
                continue
            if self._hazard_m[iy, ix] > self.base_params.footprint_radius_m:
                continue
            if self._hazard_idx is None:
                continue
            cy = int(self._hazard_idx[0][iy, ix])
            cx = int(self._hazard_idx[1][iy, ix])
            cell = (cx, cy)
            if cell not in self._collided_cells:
                self._collided_cells.add(cell)
                self.collision_events.append(CollisionEvent(self.tick, cell))

    def kinetic_energy(self) -> float:
        return 0.5 * float(self.qd_lra @ self.qd_lra
                           + self.qd_fra @ self.qd_fra)
