"""Forward kinematics, geometric Jacobian, pseudo-inverse and null-space
projector for a configurable 7-joint revolute serial chain.

Link geometry uses the modified Denavit-Hartenberg convention (Craig):
    T_{i-1,i} = RotX(alpha_{i-1}) TransX(a_{i-1}) RotZ(theta_i) TransZ(d_i)
with one fixed flange transform after joint 7. Jacobian orientation rows use
the world-frame angular-velocity convention, so tau = J^T F maps a
world-frame end-effector wrench to joint torques.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .core import JointVector7, Pose6, as_joint_vector, rpy_from_rotation

# Singular values below SIGMA_REL_CUTOFF * sigma_max are truncated to zero in
# the pseudo-inverse; numerical stand-in for built-in singularity safety.
SIGMA_REL_CUTOFF = 1e-6


class JointLimitError(Exception):
    """A joint position violates the chain's limits."""


@dataclass(frozen=True)
class KinematicChain:
    """7-revolute-joint chain defined by modified-DH rows plus a flange.

    Arrays `a`, `d`, `alpha`, `theta_off` have length 8: entries 0..6 are the
    joint rows, entry 7 is the fixed flange transform (its theta_off is the
    fixed flange rotation).
    """

    name: str
    a: np.ndarray
    d: np.ndarray
    alpha: np.ndarray
    theta_off: np.ndarray
    q_lower: np.ndarray      # rad
    q_upper: np.ndarray      # rad
    tau_max: np.ndarray      # N*m
    qd_max: np.ndarray       # rad/s
    home_q: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        for name in ("a", "d", "alpha", "theta_off"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (8,):
                raise ValueError(f"chain field {name} must have 8 rows "
                                 f"(7 joints + flange), got {arr.shape}")
            object.__setattr__(self, name, arr)
        for name in ("q_lower", "q_upper", "tau_max", "qd_max"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (7,):
                raise ValueError(f"chain field {name} must have 7 entries")
            object.__setattr__(self, name, arr)
        if np.any(self.q_lower >= self.q_upper):
            raise ValueError("joint limits must satisfy lower < upper")
        if np.any(self.tau_max <= 0) or np.any(self.qd_max <= 0):
            raise ValueError("torque and velocity limits must be positive")
        home = self.home_q if self.home_q is not None else np.zeros(7)
        home = as_joint_vector(home)
        object.__setattr__(self, "home_q", home)

    def check_limits(self, q: JointVector7) -> None:
        q = as_joint_vector(q)
        bad = (q < self.q_lower) | (q > self.q_upper)
        if np.any(bad):
            j = int(np.argmax(bad))
            raise JointLimitError(
                f"joint {j + 1} position {q[j]:.4f} outside "
                f"[{self.q_lower[j]:.4f}, {self.q_upper[j]:.4f}]")

    @staticmethod
    def from_dict(data: dict, name: str = "chain") -> "KinematicChain":
        joints = data.get("joints")
        if not isinstance(joints, list) or len(joints) != 7:
            raise ValueError("chain must define exactly 7 joints")
        flange = data.get("flange", {"a_m": 0.0, "d_m": 0.0,
                                     "alpha_rad": 0.0, "theta_rad": 0.0})
        a, d, alpha, toff = [], [], [], []
        qlo, qhi, tmax, qdmax = [], [], [], []
        for i, row in enumerate(joints):
            extra = set(row) - {"a_m", "d_m", "alpha_rad", "theta_offset_rad",
                                "q_min_rad", "q_max_rad", "tau_max_nm",
                                "qd_max_rad_s"}
            if extra:
                raise ValueError(f"joint {i + 1}: unknown keys {sorted(extra)}")
            a.append(float(row.get("a_m", 0.0)))
            d.append(float(row.get("d_m", 0.0)))
            alpha.append(float(row.get("alpha_rad", 0.0)))
            toff.append(float(row.get("theta_offset_rad", 0.0)))
            qlo.append(float(row["q_min_rad"]))
            qhi.append(float(row["q_max_rad"]))
            tmax.append(float(row["tau_max_nm"]))
            qdmax.append(float(row["qd_max_rad_s"]))
        a.append(float(flange.get("a_m", 0.0)))
        d.append(float(flange.get("d_m", 0.0)))
        alpha.append(float(flange.get("alpha_rad", 0.0)))
        toff.append(float(flange.get("theta_rad", 0.0)))
        return KinematicChain(
            name=str(data.get("name", name)),
            a=np.array(a), d=np.array(d), alpha=np.array(alpha),
            theta_off=np.array(toff),
            q_lower=np.array(qlo), q_upper=np.array(qhi),
            tau_max=np.array(tmax), qd_max=np.array(qdmax),
            home_q=np.array([float(v) for v in data.get("home_q_rad",
                                                        [0.0] * 7)]))

    @staticmethod
    def load(path: str | Path) -> "KinematicChain":
        with open(path) as f:
            data = yaml.safe_load(f)
        return KinematicChain.from_dict(data, name=Path(path).stem)

    @staticmethod
    def default() -> "KinematicChain":
        """The bundled 7-DoF arm geometry used by both leader and follower."""
        text = resources.files("telemanip.data").joinpath(
            "panda_chain.yaml").read_text()
        return KinematicChain.from_dict(yaml.safe_load(text))


def _frames(chain: KinematicChain, q: np.ndarray):
    """Accumulate the transform chain.

    Returns (p_ee, R_ee, origins, z_axes) with origins/z_axes shaped (7, 3):
    joint-frame origins and joint rotation axes in the base frame.
    """
    R = np.eye(3)
    p = np.zeros(3)
    origins = np.empty((7, 3))
    axes = np.empty((7, 3))
    a, d, alpha, toff = chain.a, chain.d, chain.alpha, chain.theta_off
    for i in range(8):
        theta = toff[i] + (q[i] if i < 7 else 0.0)
        ct, st = math.cos(theta), math.sin(theta)
        ca, sa = math.cos(alpha[i]), math.sin(alpha[i])
        # fused RotX(alpha)*TransX(a)*RotZ(theta)*TransZ(d)
        A = np.array([
            [ct, -st, 0.0, a[i]],
            [st * ca, ct * ca, -sa, -d[i] * sa],
            [st * sa, ct * sa, ca, d[i] * ca],
        ])
        p = p + R @ A[:, 3]
        R = R @ A[:, :3]
        if i < 7:
            origins[i] = p
            axes[i] = R[:, 2]
    return p, R, origins, axes


def forward_kinematics(chain: KinematicChain, q: JointVector7) -> Pose6:
    """End-effector pose in the chain base frame; joint limits enforced."""
    q = as_joint_vector(q)
    chain.check_limits(q)
    p, R, _, _ = _frames(chain, q)
    return Pose6(position=tuple(p), rpy=rpy_from_rotation(R))


def fk_with_jacobian(chain: KinematicChain, q: JointVector7,
                     check_limits: bool = True):
    """One-pass FK + geometric Jacobian: returns (p_ee, R_ee, J 6x7)."""
    q = as_joint_vector(q)
    if check_limits:
        chain.check_limits(q)
    p, R, origins, axes = _frames(chain, q)
    J = np.empty((6, 7))
    J[:3] = np.cross(axes, p - origins).T
    J[3:] = axes.T
    return p, R, J


def jacobian(chain: KinematicChain, q: JointVector7) -> np.ndarray:
    """Geometric Jacobian (6x7), linear rows m/s, angular rows rad/s,
    world-frame angular velocity convention."""
    return fk_with_jacobian(chain, q)[2]


def pinv(J: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with relative singular-value truncation."""
    J = np.asarray(J, dtype=float)
    if not np.all(np.isfinite(J)):
        raise ValueError("matrix must be finite")
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(J.T.shape)
    inv_s = np.where(s > SIGMA_REL_CUTOFF * s[0], 1.0 / s, 0.0)
    return (Vt.T * inv_s) @ U.T


def nullspace_projector(J: np.ndarray) -> np.ndarray:
    """N = I - J^T pinv(J^T): joint-space directions exerting zero
    end-effector force through tau = J^T F."""
    Jt = np.asarray(J, dtype=float).T
    return np.eye(Jt.shape[0]) - Jt @ pinv(Jt)


def ik_position(chain: KinematicChain, target_p: np.ndarray,
                q0: JointVector7, tol: float = 1e-4,
                max_iter: int = 200) -> JointVector7:
    """Damped-least-squares position-only IK, biased toward q0 in the
    null space. Deterministic; raises if the target is unreachable."""
    target_p = np.asarray(target_p, dtype=float)
    q = as_joint_vector(q0).copy()
    for _ in range(max_iter):
        p, _, J = fk_with_jacobian(chain, q, check_limits=False)
        err = target_p - p
        if np.linalg.norm(err) < tol:
            q = np.clip(q, chain.q_lower, chain.q_upper)
            p2, _, _ = fk_with_jacobian(chain, q, check_limits=False)
            if np.linalg.norm(target_p - p2) < 10 * tol:
                return q
            break
        Jp = J[:3]
        JJt = Jp @ Jp.T + 1e-6 * np.eye(3)
        dq = Jp.T @ np.linalg.solve(JJt, err)
        dq += 0.05 * (nullspace_projector(Jp) @ (as_joint_vector(q0) - q))
        step = np.linalg.norm(dq)
        if step > 0.5:
            dq *= 0.5 / step
        q = np.clip(q + dq, chain.q_lower, chain.q_upper)
    raise ValueError(f"position IK failed to reach {target_p}")
