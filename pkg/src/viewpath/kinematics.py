"""Kinematics of an 8-DoF mobile manipulator (planar holonomic base + 5R arm).

The camera frame coincides with the end-effector frame; its optical axis is
the local +x axis mapped to the world frame. All Jacobians are analytic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

N_BASE = 3
N_ARM = 5
N_TOTAL = N_BASE + N_ARM

# camera-local forward (optical) axis
FORWARD_AXIS = np.array([1.0, 0.0, 0.0])


def wrap_angle(a):
    """Wrap angle(s) into (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    out = -((-a + np.pi) % (2.0 * np.pi) - np.pi)
    return float(out) if out.ndim == 0 else out


def rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


@dataclass(frozen=True)
class JointDescriptor:
    """One revolute joint: fixed link translation to the joint origin, then
    rotation about `axis` (unit, in the preceding frame)."""
    axis: np.ndarray
    offset: np.ndarray


@dataclass(frozen=True)
class RobotModel:
    footprint_radius: float
    joints: tuple[JointDescriptor, ...]
    camera_offset: np.ndarray          # translation from last joint frame
    qdot_lim: np.ndarray               # (8,) velocity bounds, all > 0
    q_l: np.ndarray                    # (5,) arm lower limits
    q_u: np.ndarray                    # (5,) arm upper limits

    def __post_init__(self):
        assert len(self.joints) == N_ARM
        assert np.all(self.q_l < self.q_u)
        assert np.all(self.qdot_lim > 0)


@dataclass(frozen=True)
class Configuration:
    """Base pose (x, y, theta) plus 5 arm joint angles; angles in (-pi, pi]."""
    base: tuple[float, float, float]
    arm: np.ndarray

    @staticmethod
    def from_array(q: np.ndarray) -> "Configuration":
        q = np.asarray(q, dtype=float)
        return Configuration(
            base=(q[0], q[1], wrap_angle(q[2])),
            arm=wrap_angle(q[3:8]),
        )

    def as_array(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.base), self.arm])


@dataclass(frozen=True)
class TaskVector:
    """Controlled quantity: camera position p and unit view direction l."""
    p: np.ndarray
    l: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.p, self.l])


def _chain_frames(model: RobotModel, q: np.ndarray):
    """Walk the chain; returns camera position, camera rotation, and the
    per-joint world axes and origins needed by the Jacobians."""
    x, y, theta = q[0], q[1], q[2]
    R = rotation_about(np.array([0.0, 0.0, 1.0]), theta)
    p = np.array([x, y, 0.0])
    axes = np.empty((N_ARM, 3))
    origins = np.empty((N_ARM, 3))
    for j, joint in enumerate(model.joints):
        p = p + R @ joint.offset
        axis_w = R @ joint.axis
        axes[j] = axis_w
        origins[j] = p
        R = R @ rotation_about(joint.axis, q[3 + j])
    p_cam = p + R @ model.camera_offset
    return p_cam, R, axes, origins


def forward_kinematics(model: RobotModel, q: Configuration):
    """Camera pose in the world frame: (position, rotation matrix)."""
    p, R, _, _ = _chain_frames(model, q.as_array())
    return p, R


def task_vector(model: RobotModel, q: Configuration) -> TaskVector:
    p, R = forward_kinematics(model, q)
    l = R @ FORWARD_AXIS
    return TaskVector(p=p, l=l / np.linalg.norm(l))


def fk_jacobians(model: RobotModel, q: np.ndarray):
    """One-pass FK + Jacobians.

    Returns (p, R, l, J_p, J_l, J_w) where J_p = dp/dq (3x8),
    J_l = dl/dq (3x8) and J_w maps qdot to the camera angular velocity (3x8).
    """
    q = np.asarray(q, dtype=float)
    p_cam, R, axes, origins = _chain_frames(model, q)
    l = R @ FORWARD_AXIS

    ez = np.array([0.0, 0.0, 1.0])
    J_p = np.zeros((3, N_TOTAL))
    J_w = np.zeros((3, N_TOTAL))
    J_p[0, 0] = 1.0
    J_p[1, 1] = 1.0
    base_origin = np.array([q[0], q[1], 0.0])
    J_p[:, 2] = np.cross(ez, p_cam - base_origin)
    J_w[:, 2] = ez
    for j in range(N_ARM):
        J_p[:, 3 + j] = np.cross(axes[j], p_cam - origins[j])
        J_w[:, 3 + j] = axes[j]
    # unit direction rotates with the frame: dl/dq_i = w_i x l
    J_l = np.cross(J_w, l[:, None], axis=0)
    return p_cam, R, l, J_p, J_l, J_w


def translation_jacobian(model: RobotModel, q: Configuration) -> np.ndarray:
    return fk_jacobians(model, q.as_array())[3]


def direction_jacobian(model: RobotModel, q: Configuration) -> np.ndarray:
    return fk_jacobians(model, q.as_array())[4]


def integrate(q: Configuration, qdot: np.ndarray, dt: float) -> Configuration:
    """Explicit Euler step with angle wrapping; qdot is assumed box-clamped."""
    assert dt > 0
    return Configuration.from_array(q.as_array() + np.asarray(qdot) * dt)


def load_robot_model(path) -> RobotModel:
    """Load a robot description file (YAML; see data/robot.yaml for schema)."""
    with open(path) as f:
        spec = yaml.safe_load(f)
    return _model_from_dict(spec)


def _model_from_dict(spec: dict) -> RobotModel:
    joints = tuple(
        JointDescriptor(
            axis=np.asarray(j["axis"], dtype=float),
            offset=np.asarray(j["offset"], dtype=float),
        )
        for j in spec["joints"]
    )
    return RobotModel(
        footprint_radius=float(spec["footprint_radius"]),
        joints=joints,
        camera_offset=np.asarray(spec["camera_offset"], dtype=float),
        qdot_lim=np.asarray(spec["qdot_lim"], dtype=float),
        q_l=np.asarray(spec["arm_limits"]["lower"], dtype=float),
        q_u=np.asarray(spec["arm_limits"]["upper"], dtype=float),
    )


def default_robot_model() -> RobotModel:
    ref = resources.files("viewpath.data").joinpath("robot.yaml")
    with ref.open() as f:
        return _model_from_dict(yaml.safe_load(f))


def home_configuration() -> Configuration:
    """A non-singular rest posture with the camera near candidate-view height."""
    return Configuration(base=(0.0, 0.0, 0.0),
                         arm=np.array([0.0, -0.5, 0.3, -0.2, 0.0]))
