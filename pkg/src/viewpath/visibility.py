"""Camera FoV plane geometry and the visibility-constraint Jacobian.

The four FoV planes (left, right, top, bottom) intersect at the camera
center; a point is inside the shrunken visibility zone when its signed
inward distance to every plane exceeds the threshold distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kinematics as kin

FOV_DEFAULT = (math.radians(74.0), math.radians(60.0))
D_TH_DEFAULT = 0.75

PLANE_LABELS = ("left", "right", "top", "bottom")


def _local_normals(fov) -> np.ndarray:
    """Unit inward normals in the camera frame (+x forward, +y left, +z up)."""
    th_h = 0.5 * fov[0]
    th_v = 0.5 * fov[1]
    return np.array([
        [math.sin(th_h), -math.cos(th_h), 0.0],   # left
        [math.sin(th_h), math.cos(th_h), 0.0],    # right
        [math.sin(th_v), 0.0, -math.cos(th_v)],   # top
        [math.sin(th_v), 0.0, math.cos(th_v)],    # bottom
    ])


@dataclass(frozen=True)
class FovPlanes:
    normals: np.ndarray    # (4, 3) unit inward normals, world frame
    apex: np.ndarray       # camera center p_c


def fov_planes(position: np.ndarray, rotation: np.ndarray,
               fov=FOV_DEFAULT) -> FovPlanes:
    return FovPlanes(normals=_local_normals(fov) @ rotation.T,
                     apex=np.asarray(position, dtype=float))


def plane_distances(planes: FovPlanes, p_f: np.ndarray) -> np.ndarray:
    """Signed inward distances d_v[i] = n_i . (p_f - p_c)."""
    return planes.normals @ (np.asarray(p_f) - planes.apex)


def visibility_distances(model, q: np.ndarray, p_f: np.ndarray,
                         fov=FOV_DEFAULT, d_th: float = D_TH_DEFAULT):
    """Thresholded distances d~_v = d_v - d_th at configuration q."""
    p, R, _, _, _, _ = kin.fk_jacobians(model, q)
    return plane_distances(fov_planes(p, R, fov), p_f) - d_th


def visibility_jacobian(model, q: np.ndarray, p_f: np.ndarray,
                        fov=FOV_DEFAULT) -> np.ndarray:
    """4x8 Jacobian of the thresholded plane distances w.r.t. q.

    The planes ride on the camera while p_f is fixed in the world, so
    d d_i/dq_j = (w_j x n_i) . (p_f - p_c) - n_i . dp_c/dq_j,
    where w_j is the camera angular-velocity column.
    """
    p, R, _, J_p, _, J_w = kin.fk_jacobians(model, np.asarray(q, dtype=float))
    normals = _local_normals(fov) @ R.T
    r = np.asarray(p_f) - p
    # (w_j x n_i) . r = w_j . (n_i x r), so each row is (n_i x r)' J_w - n_i' J_p
    torque_arm = np.cross(normals, r)          # (4, 3)
    return torque_arm @ J_w - normals @ J_p
