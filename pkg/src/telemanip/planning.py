"""Global and local planning over the occupancy grid.

Global: Dijkstra under the 8-connected metric (1 axial, sqrt(2) diagonal).
Local: Dynamic Window Approach sampling velocity candidates, rolling each
out with the shared bicycle model and scoring heading alignment, obstacle
clearance and speed. The local trajectory's sample 40 is the lookahead pose
that feeds the navigation force cue.

Path costs are tracked as integer (axial, diagonal) step counts and
converted to floats the same way everywhere, so equal-cost paths compare
exactly equal.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .base_model import BaseParams, bicycle_yaw_rate
from .core import BaseVelocity, OccupancyGrid, Pose2D, normalize_angle

SQRT2 = math.sqrt(2.0)
LOOKAHEAD_INDEX = 40


class NoPathError(Exception):
    """Start/goal invalid or no collision-free path exists."""


class InsufficientHorizonError(Exception):
    """Local trajectory does not reach the requested lookahead index."""


@dataclass(frozen=True)
class GlobalPath:
    """Ordered cell-center waypoints; headings follow segment directions."""

    waypoints: tuple[Pose2D, ...]
    cells: tuple[tuple[int, int], ...]   # (ix, iy)
    total_length_m: float
    arclen_m: np.ndarray                 # cumulative, per waypoint

    def __len__(self) -> int:
        return len(self.waypoints)


@dataclass(frozen=True)
class DwaParams:
    v_x_min: float = 0.0
    v_x_max: float = 0.5
    v_gamma_min: float = -1.0
    v_gamma_max: float = 1.0
    accel_v: float = 2.0        # m/s^2
    accel_gamma: float = 4.0    # rad/s^2
    v_samples: int = 5
    gamma_samples: int = 11
    dt_plan_s: float = 0.025
    horizon_s: float = 1.5
    w_heading: float = 0.6
    w_clearance: float = 0.3
    w_velocity: float = 0.1
    clearance_cap_m: float = 1.0
    footprint_radius_m: float = 0.45
    path_target_ahead_m: float = 0.8

    def __post_init__(self):
        if self.v_samples < 3 or self.gamma_samples < 3:
            raise ValueError("need at least 3 samples per axis")
        steps = int(round(self.horizon_s / self.dt_plan_s))
        if steps < LOOKAHEAD_INDEX + 1:
            raise ValueError("horizon must cover at least 41 samples")


@dataclass(frozen=True)
class LocalTrajectory:
    """One candidate command rolled out over the horizon.

    poses has shape (steps + 1, 3) as (x, y, gamma); poses[0] is the start
    state, poses[k] the pose after k constant-command steps of dt_plan.
    """

    v_x: float
    v_gamma: float
    poses: np.ndarray
    score_heading: float
    score_clearance: float
    score_velocity: float

    @property
    def score_total(self) -> float:
        return self.score_heading + self.score_clearance + self.score_velocity


@dataclass(frozen=True)
class DwaResult:
    command: BaseVelocity
    trajectory: LocalTrajectory
    blocked: bool = False


class GridView:
    """Planner-visible obstacle picture: known cells plus discovered
    semi-known cells, with a precomputed clearance field.

    Clearance at a point is the distance (m) from the center of the cell
    containing it to the nearest visible-occupied cell center; footprint
    collision checks use the same cell-granular metric. Out-of-grid points
    have zero clearance.
    """

    def __init__(self, grid: OccupancyGrid):
        self.grid = grid
        self.occupied = grid.visible_occupied()
        if self.occupied.any():
            dist_cells = ndimage.distance_transform_edt(~self.occupied)
            self.clearance_m = dist_cells * grid.resolution
        else:
            self.clearance_m = np.full(self.occupied.shape, math.inf)

    def clearance_at(self, x: float, y: float) -> float:
        g = self.grid
        ix = math.floor((x - g.origin.x) / g.resolution)
        iy = math.floor((y - g.origin.y) / g.resolution)
        if not (0 <= ix < g.width and 0 <= iy < g.height):
            return 0.0
        return float(self.clearance_m[iy, ix])

    def passable(self, ix: int, iy: int) -> bool:
        return not self.occupied[iy, ix]


# 8-connected neighborhood: (dix, diy, is_diagonal)
_NEIGHBORS = [(1, 0, False), (-1, 0, False), (0, 1, False), (0, -1, False),
              (1, 1, True), (1, -1, True), (-1, 1, True), (-1, -1, True)]


def _step_cost(n_axial: int, n_diag: int) -> float:
    # single canonical conversion so equal step counts give equal floats
    return n_axial + n_diag * SQRT2


def plan_global(view: GridView, start: Pose2D, goal: Pose2D) -> GlobalPath:
    """Minimum-cost 8-connected path over visible-free cells.

    Ties broken deterministically by (row, column) pop order. Raises
    NoPathError when start/goal are not in visible-free cells or the goal
    is unreachable.
    """
    g = view.grid
    six, siy = g.world_to_grid(start)
    gix, giy = g.world_to_grid(goal)
    if not view.passable(six, siy):
        raise NoPathError(f"start cell ({six}, {siy}) is occupied")
    if not view.passable(gix, giy):
        raise NoPathError(f"goal cell ({gix}, {giy}) is occupied")

    best = {}            # (ix, iy) -> (n_axial, n_diag)
    parent = {}
    best[(six, siy)] = (0, 0)
    heap = [(0.0, siy, six)]
    settled = set()
    while heap:
        cost, iy, ix = heapq.heappop(heap)
        if (ix, iy) in settled:
            continue
        settled.add((ix, iy))
        if (ix, iy) == (gix, giy):
            break
        na, nd = best[(ix, iy)]
        for dix, diy, diag in _NEIGHBORS:
            nx, ny = ix + dix, iy + diy
            if not g.in_bounds(nx, ny) or not view.passable(nx, ny):
                continue
            cand = (na + (not diag), nd + diag)
            new_cost = _step_cost(*cand)
            prev = best.get((nx, ny))
            if prev is None or new_cost < _step_cost(*prev):
                best[(nx, ny)] = cand
                parent[(nx, ny)] = (ix, iy)
                heapq.heappush(heap, (new_cost, ny, nx))
    if (gix, giy) not in settled:
        raise NoPathError(f"no path from ({six}, {siy}) to ({gix}, {giy})")

    cells = [(gix, giy)]
    while cells[-1] != (six, siy):
        cells.append(parent[cells[-1]])
    cells.reverse()

    centers = [g.grid_to_world(ix, iy) for ix, iy in cells]
    headings = []
    for i in range(len(centers)):
        j = min(i, len(centers) - 2)
        if len(centers) == 1:
            headings.append(start.gamma)
            continue
        a, b = centers[j], centers[j + 1]
        headings.append(math.atan2(b.y - a.y, b.x - a.x))
    waypoints = tuple(Pose2D(c.x, c.y, h) for c, h in zip(centers, headings))
    arclen = np.zeros(len(waypoints))
    for i in range(1, len(waypoints)):
        arclen[i] = arclen[i - 1] + math.hypot(
            waypoints[i].x - waypoints[i - 1].x,
            waypoints[i].y - waypoints[i - 1].y)
    na, nd = best[(gix, giy)]
    return GlobalPath(waypoints=waypoints, cells=tuple(cells),
                      total_length_m=_step_cost(na, nd) * g.resolution,
                      arclen_m=arclen)


def rollout(pose: Pose2D, v_x: float, v_gamma: float, steps: int,
            dt: float, base: BaseParams) -> np.ndarray:
    """Constant-command Euler rollout of the bicycle model; (steps+1, 3)."""
    yaw_rate = bicycle_yaw_rate(v_x, v_gamma, base)
    out = np.empty((steps + 1, 3))
    x, y, gma = pose.x, pose.y, pose.gamma
    out[0] = (x, y, gma)
    for k in range(1, steps + 1):
        x += v_x * math.cos(gma) * dt
        y += v_x * math.sin(gma) * dt
        gma = normalize_angle(gma + yaw_rate * dt)
        out[k] = (x, y, gma)
    return out


def _window_axis(current: float, accel: float, dt: float, lo: float,
                 hi: float, n: int) -> list[float]:
    a = max(lo, current - accel * dt)
    b = min(hi, current + accel * dt)
    if b < a:
        a = b = min(max(current, lo), hi)
    if n == 1 or b == a:
        return [a]
    return [a + (b - a) * i / (n - 1) for i in range(n)]


def _path_target(path: GlobalPath, x: float, y: float,
                 ahead_m: float) -> Pose2D:
    """Waypoint a fixed arc length ahead of the nearest waypoint."""
    best_i, best_d = 0, math.inf
    for i, wp in enumerate(path.waypoints):
        d = (wp.x - x) ** 2 + (wp.y - y) ** 2
        if d < best_d:
            best_d, best_i = d, i
    s = path.arclen_m[best_i] + ahead_m
    j = int(np.searchsorted(path.arclen_m, s))
    return path.waypoints[min(j, len(path.waypoints) - 1)]


def score_trajectory(poses: np.ndarray, v_x: float, view: GridView,
                     path: GlobalPath, params: DwaParams
                     ) -> tuple[bool, float, float, float]:
    """(admissible, heading, clearance, velocity) for one rollout.

    Heading: 1 - |bearing error to the path target| / pi at the horizon
    end. Clearance: min cell-granular obstacle distance along the rollout,
    capped. Velocity: |v_x| / cap. Weighted by params.w_*.
    """
    min_clear = math.inf
    for k in range(poses.shape[0]):
        c = view.clearance_at(poses[k, 0], poses[k, 1])
        if c < min_clear:
            min_clear = c
        if min_clear <= params.footprint_radius_m:
            return False, 0.0, 0.0, 0.0
    ex, ey, eg = poses[-1]
    target = _path_target(path, ex, ey, params.path_target_ahead_m)
    dx, dy = target.x - ex, target.y - ey
    if dx * dx + dy * dy < 1e-12:
        err = abs(normalize_angle(target.gamma - eg))
    else:
        err = abs(normalize_angle(math.atan2(dy, dx) - eg))
    h = params.w_heading * (1.0 - err / math.pi)
    c = params.w_clearance * min(min_clear, params.clearance_cap_m)
    v = params.w_velocity * (abs(v_x) / 0.5)
    return True, h, c, v


def dwa_step(pose: Pose2D, velocity: BaseVelocity, view: GridView,
             path: GlobalPath, params: DwaParams,
             base: BaseParams) -> DwaResult:
    """Pick the best admissible velocity command from the dynamic window.

    Candidates within the acceleration-reachable window (intersected with
    absolute bounds and the 0.5 m/s cap) are rolled out with the bicycle
    model; rollouts whose swept footprint intersects a visible obstacle
    are discarded; the rest are scored and the argmax returned with
    deterministic tie-breaking (lowest |v_gamma|, then lowest v_x, then
    signed v_gamma).
    """
    if len(path) == 0:
        raise ValueError("global path is empty")
    steps = int(round(params.horizon_s / params.dt_plan_s))
    vs = _window_axis(velocity.v_x, params.accel_v, params.dt_plan_s,
                      params.v_x_min, min(params.v_x_max, 0.5),
                      params.v_samples)
    ws = _window_axis(velocity.v_gamma, params.accel_gamma, params.dt_plan_s,
                      params.v_gamma_min, params.v_gamma_max,
                      params.gamma_samples)
    best: LocalTrajectory | None = None
    best_key = None
    for v in vs:
        for w in ws:
            poses = rollout(pose, v, w, steps, params.dt_plan_s, base)
            ok, sh, sc, sv = score_trajectory(poses, v, view, path, params)
            if not ok:
                continue
            # tie-break key: maximize score, then minimize |w|, v, signed w
            key = (-(sh + sc + sv), abs(w), v, w)
            if best_key is None or key < best_key:
                best_key = key
                best = LocalTrajectory(v_x=v, v_gamma=w, poses=poses,
                                       score_heading=sh, score_clearance=sc,
                                       score_velocity=sv)
    if best is None:
        stay = rollout(pose, 0.0, 0.0, steps, params.dt_plan_s, base)
        traj = LocalTrajectory(0.0, 0.0, stay, 0.0, 0.0, 0.0)
        return DwaResult(BaseVelocity(0.0, 0.0), traj, blocked=True)
    return DwaResult(BaseVelocity(best.v_x, best.v_gamma), best,
                     blocked=False)


def lookahead_pose(traj: LocalTrajectory,
                   k: int = LOOKAHEAD_INDEX) -> Pose2D:
    """The k-th rollout pose (the force-cue preview point)."""
    if k < 0 or k >= traj.poses.shape[0]:
        raise InsufficientHorizonError(
            f"index {k} outside rollout of {traj.poses.shape[0]} samples")
    x, y, gma = traj.poses[k]
    return Pose2D(float(x), float(y), float(gma))
