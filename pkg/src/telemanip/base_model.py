"""Kinematic bicycle model shared by the world integrator and the DWA
rollouts, so local-plan previews use exactly the vehicle model the
simulator integrates."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BaseParams:
    """Ackermann-steered base parameters."""

    wheelbase_m: float = 0.65
    max_steer_rad: float = 0.524
    min_turn_speed_mps: float = 0.02  # below this, no turning in place
    footprint_radius_m: float = 0.45


def bicycle_yaw_rate(v_x: float, v_gamma_cmd: float, p: BaseParams) -> float:
    """Achievable yaw rate for a commanded (v_x, v_gamma).

    The commanded yaw rate maps to a steering angle atan(L*w/v), saturated
    at the steering limit; below the minimum forward speed the vehicle
    cannot turn at all (no turning in place).
    """
    if abs(v_x) < p.min_turn_speed_mps:
        return 0.0
    delta = math.atan(p.wheelbase_m * v_gamma_cmd / v_x)
    delta = max(-p.max_steer_rad, min(p.max_steer_rad, delta))
    return v_x / p.wheelbase_m * math.tan(delta)
