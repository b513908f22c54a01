"""Shared geometric and kinematic value types, angle/grid helpers.

Frame conventions: world frame is a fixed right-handed frame with z up; the
mobile-base body frame has +x forward. All angles are radians, normalized to
(-pi, pi]. All core types are immutable values and safe to share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

TWO_PI = 2.0 * math.pi

# Joint vectors (positions rad, velocities rad/s, torques N*m) are plain
# float64 arrays of length 7; role is implied by the use site.
JointVector7 = np.ndarray


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]. Rejects non-finite input."""
    if not math.isfinite(a):
        raise ValueError(f"angle must be finite, got {a!r}")
    return math.pi - (math.pi - a) % TWO_PI


def normalize_angles(a: np.ndarray) -> np.ndarray:
    """Vectorized normalize_angle; same (-pi, pi] convention."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("angles must be finite")
    return math.pi - np.remainder(math.pi - a, TWO_PI)


def as_joint_vector(values) -> JointVector7:
    """Coerce to a finite float64 array of length 7."""
    q = np.asarray(values, dtype=float)
    if q.shape != (7,):
        raise ValueError(f"expected 7 joint values, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("joint values must be finite")
    return q


@dataclass(frozen=True)
class Pose2D:
    """Planar pose: x, y in meters, heading gamma in radians CCW from +x."""

    x: float
    y: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", normalize_angle(self.gamma))

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Pose6:
    """6-DoF pose: position (m) and roll/pitch/yaw (rad), each in (-pi, pi].

    RPY is extrinsic x-y-z, i.e. R = Rz(yaw) @ Ry(pitch) @ Rx(roll).
    """

    position: tuple[float, float, float]
    rpy: tuple[float, float, float]

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        ang = tuple(normalize_angle(float(v)) for v in self.rpy)
        if not all(math.isfinite(v) for v in pos):
            raise ValueError("position must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "rpy", ang)

    @property
    def x(self) -> float:
        return self.position[0]

    @property
    def y(self) -> float:
        return self.position[1]

    @property
    def z(self) -> float:
        return self.position[2]

    @property
    def yaw(self) -> float:
        return self.rpy[2]

    def as_array(self) -> np.ndarray:
        return np.array(self.position + self.rpy)


@dataclass(frozen=True)
class Wrench6:
    """Force (N) and torque (N*m) about x, y, z."""

    force: tuple[float, float, float] = (0.0, 0.0, 0.0)
    torque: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        f = tuple(float(v) for v in self.force)
        t = tuple(float(v) for v in self.torque)
        if not all(math.isfinite(v) for v in f + t):
            raise ValueError("wrench components must be finite")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "torque", t)

    @staticmethod
    def zero() -> "Wrench6":
        return Wrench6()

    @staticmethod
    def from_array(w) -> "Wrench6":
        w = np.asarray(w, dtype=float)
        if w.shape != (6,):
            raise ValueError(f"expected 6-vector, got shape {w.shape}")
        return Wrench6(force=tuple(w[:3]), torque=tuple(w[3:]))

    def as_array(self) -> np.ndarray:
        return np.array(self.force + self.torque)


@dataclass(frozen=True)
class BaseVelocity:
    """Commanded base velocity: v_x m/s forward, v_gamma rad/s yaw rate."""

    v_x: float = 0.0
    v_gamma: float = 0.0

    def as_tuple(self) -> tuple[float, float]:
        return (self.v_x, self.v_gamma)


class CellClass(IntEnum):
    """Obstacle taxonomy: free space plus the three obstacle classes."""

    FREE = 0
    KNOWN = 1      # pre-mapped, lidar-detectable
    SEMIKNOWN = 2  # absent from the prior map, lidar-detectable in range
    UNKNOWN = 3    # never sensed; collisions only


class OutOfBounds(Exception):
    """World coordinate falls outside the occupancy grid."""


class OccupancyGrid:
    """Axis-aligned occupancy grid with per-cell obstacle class and a
    monotone `discovered` mask.

    `cells` holds CellClass values, shape (height, width), indexed
    [iy, ix]; public cell APIs take and return (ix, iy) with ix counting
    along world +x. Cell classes are immutable during a trial; only
    `discovered` changes, and only from False to True.
    """

    def __init__(self, resolution: float, width: int, height: int,
                 origin: Pose2D, cells: np.ndarray | None = None):
        if resolution <= 0:
            raise ValueError("resolution must be > 0")
        if width <= 0 or height <= 0:
            raise ValueError("grid dimensions must be positive")
        self.resolution = float(resolution)
        self.width = int(width)
        self.height = int(height)
        self.origin = origin
        if cells is None:
            cells = np.zeros((height, width), dtype=np.uint8)
        cells = np.asarray(cells, dtype=np.uint8)
        if cells.shape != (height, width):
            raise ValueError(f"cells shape {cells.shape} != {(height, width)}")
        self.cells = cells
        self.cells.flags.writeable = False
        self.discovered = np.zeros((height, width), dtype=bool)

    def copy(self) -> "OccupancyGrid":
        g = OccupancyGrid(self.resolution, self.width, self.height,
                          self.origin, self.cells.copy())
        g.discovered = self.discovered.copy()
        return g

    def world_to_grid(self, p: Pose2D) -> tuple[int, int]:
        """Map a world pose to cell (ix, iy); raises OutOfBounds, never clamps."""
        ix = math.floor((p.x - self.origin.x) / self.resolution)
        iy = math.floor((p.y - self.origin.y) / self.resolution)
        if not (0 <= ix < self.width and 0 <= iy < self.height):
            raise OutOfBounds(f"({p.x}, {p.y}) -> cell ({ix}, {iy})")
        return (ix, iy)

    def grid_to_world(self, ix: int, iy: int) -> Pose2D:
        """Cell-center world pose (inverse of world_to_grid within res/2)."""
        if not (0 <= ix < self.width and 0 <= iy < self.height):
            raise OutOfBounds(f"cell ({ix}, {iy})")
        return Pose2D(self.origin.x + (ix + 0.5) * self.resolution,
                      self.origin.y + (iy + 0.5) * self.resolution, 0.0)

    def point_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return self.world_to_grid(Pose2D(x, y, 0.0))

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def mark_discovered(self, ixs: np.ndarray, iys: np.ndarray) -> int:
        """Set discovery flags; returns how many cells were newly marked."""
        newly = ~self.discovered[iys, ixs]
        self.discovered[iys[newly], ixs[newly]] = True
        return int(newly.sum())

    def visible_occupied(self) -> np.ndarray:
        """Boolean mask of cells the planner may treat as obstacles:
        known-class cells plus discovered semi-known cells."""
        return (self.cells == CellClass.KNOWN) | (
            (self.cells == CellClass.SEMIKNOWN) & self.discovered)

    def occupied_any(self) -> np.ndarray:
        """Boolean mask of all obstacle cells regardless of class."""
        return self.cells != CellClass.FREE


def rotation_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation matrix R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def rpy_from_rotation(R: np.ndarray) -> tuple[float, float, float]:
    """Extract (roll, pitch, yaw) with R = Rz(yaw) @ Ry(pitch) @ Rx(roll).

    At the pitch = +-pi/2 gimbal singularity roll is chosen as 0.
    """
    sp = -R[2, 0]
    sp = min(1.0, max(-1.0, sp))
    pitch = math.asin(sp)
    if abs(sp) > 1.0 - 1e-12:
        # yaw and roll degenerate; fold everything into yaw
        return (0.0, pitch, math.atan2(-R[0, 1], R[1, 1]))
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return (roll, pitch, yaw)
