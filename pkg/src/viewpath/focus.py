"""Informative focus point: cast a virtual focus FoV toward the search-space
cylinder, take the most informative ray, and park a point at a fixed
distance along it. The point is only recomputed after the camera moves a
threshold distance from where it was last computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import voxel_world as vw
from .nbv import _look_rotation

FOCUS_FOV_DEFAULT = (math.radians(90.0), math.radians(90.0))
FOCUS_DISTANCE_DEFAULT = 2.5
RECOMPUTE_THRESHOLD_DEFAULT = 0.3
FOCUS_GRID_K_DEFAULT = 16


@dataclass(frozen=True)
class FocusState:
    point: np.ndarray          # the maintained focus point
    anchor: np.ndarray         # camera position at computation time
    best_ray_gain: float


def generate_focus_rays(camera_position, cylinder_center,
                        focus_fov=FOCUS_FOV_DEFAULT,
                        k=FOCUS_GRID_K_DEFAULT,
                        aim_height=None) -> np.ndarray:
    """K*K unit rays filling the focus FoV pyramid.

    The central axis points from the camera toward the cylinder axis,
    pitched toward aim_height (default: the cylinder-center z if given a
    3-vector, else horizontal).
    """
    cam = np.asarray(camera_position, dtype=float)
    ctr = np.asarray(cylinder_center, dtype=float)
    if aim_height is None:
        aim_height = ctr[2] if ctr.shape[0] == 3 else cam[2]
    aim = np.array([ctr[0], ctr[1], float(aim_height)])
    axis = aim - cam
    norm = np.linalg.norm(axis)
    if norm < 1e-9:
        raise ValueError("camera position coincides with the focus aim point")
    rot = _look_rotation(axis / norm)
    return vw.camera_ray_directions(rot, focus_fov, (k, k))


def best_ray(occ_map: vw.OccupancyMap, rays: np.ndarray,
             max_dist=vw.D_MAX_DEFAULT, origin=None, box=None):
    """Index and gain of the ray with maximal information; ties break to
    the lowest index.

    With `box` given, gains only count cells inside the reconstruction
    volume, so the focus stays on the object instead of drifting toward
    unobserved free space elsewhere in the world.
    """
    assert rays.shape[0] >= 1
    origins = np.broadcast_to(np.asarray(origin, dtype=float),
                              rays.shape).copy()
    gains = vw.ray_information_batch(occ_map, origins, rays, max_dist,
                                     box=box)
    idx = int(np.argmax(gains))    # first maximum
    return idx, float(gains[idx])


def update_focus(state, camera_position, occ_map: vw.OccupancyMap,
                 cylinder_center,
                 recompute_threshold=RECOMPUTE_THRESHOLD_DEFAULT,
                 focus_distance=FOCUS_DISTANCE_DEFAULT,
                 focus_fov=FOCUS_FOV_DEFAULT,
                 k=FOCUS_GRID_K_DEFAULT,
                 max_dist=vw.D_MAX_DEFAULT,
                 aim_height=None, box=None,
                 proximity_threshold=1.5,
                 near_tie_fraction=0.5, camera_axis=None) -> FocusState:
    """Return the current focus state, recomputing it only when the camera
    has moved more than the threshold from the previous anchor (or when
    there is no prior state).

    A recompute is also forced when the camera has closed to within
    `proximity_threshold` of the point itself: below ~d_th/sin(theta_v)
    no orientation can hold the point the required margin inside every
    FoV plane, so a stale nearby point pins the controller against an
    unsatisfiable constraint.
    """
    cam = np.asarray(camera_position, dtype=float)
    if state is not None and \
            np.linalg.norm(cam - state.anchor) <= recompute_threshold and \
            np.linalg.norm(cam - state.point) >= proximity_threshold:
        return state
    rays = generate_focus_rays(cam, cylinder_center, focus_fov=focus_fov,
                               k=k, aim_height=aim_height)
    origins = np.broadcast_to(cam, rays.shape).copy()
    gains = vw.ray_information_batch(occ_map, origins, rays, max_dist,
                                     box=box)
    gmax = float(gains.max())
    if camera_axis is not None:
        prefer = np.asarray(camera_axis, dtype=float)
    elif state is not None:
        prefer = state.point - state.anchor
    else:
        prefer = None
    if prefer is None or gmax <= 0.0:
        idx = int(np.argmax(gains))
    else:
        # the gain field over the pyramid is typically a broad plateau, so
        # a bare argmax chatters between rays tens of degrees apart on
        # every recompute; among near-maximal rays take the one the camera
        # can reach fastest (closest to its current axis, or failing that
        # the previous focus direction) so the constraint stays satisfiable
        prefer = prefer / np.linalg.norm(prefer)
        near = gains >= (1.0 - near_tie_fraction) * gmax
        align = rays @ prefer
        align = np.where(near, align, -np.inf)
        idx = int(np.argmax(align))
    return FocusState(point=cam + focus_distance * rays[idx],
                      anchor=cam, best_ray_gain=float(gains[idx]))
