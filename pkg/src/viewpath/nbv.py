"""Cylindrical candidate-view search space and rear-side-voxel NBV scoring.

A rear-side voxel is an unknown-band cell immediately following an occupied
cell along a cast ray; a candidate's score is the number of distinct such
cells over its scoring ray grid (optionally their entropy sum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as kern
from . import voxel_world as vw

CYLINDER_RADIUS_DEFAULT = 3.0
N_POSITIONS_DEFAULT = 40
VIEW_HEIGHT_DEFAULT = 0.45
ORIENTATION_OFFSET = math.pi / 6.0
SCORING_GRID_DEFAULT = (32, 24)
UNKNOWN_BAND = (0.45, 0.55)

ORIENTATION_LABELS = ("forward", "up", "down", "left", "right")


class EpisodeComplete(Exception):
    """Raised by select_nbv when every candidate has been visited."""


@dataclass
class CandidateView:
    id: int
    position: np.ndarray
    direction: np.ndarray
    orientation_label: str
    score: float = 0.0


def _rotate_about(v, axis, angle):
    axis = axis / np.linalg.norm(axis)
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * (axis @ v) * (1 - c)


def generate_candidates(cylinder_center,
                        radius=CYLINDER_RADIUS_DEFAULT,
                        n_pos=N_POSITIONS_DEFAULT,
                        view_height=VIEW_HEIGHT_DEFAULT) -> list:
    """n_pos equally spaced azimuths x 5 orientations.

    Forward points horizontally at the cylinder axis; up/down pitch by
    +-pi/6 about the local horizontal left axis, left/right yaw by +-pi/6
    about the vertical.
    """
    assert radius > 0
    cx, cy = float(cylinder_center[0]), float(cylinder_center[1])
    ez = np.array([0.0, 0.0, 1.0])
    views = []
    vid = 0
    for k in range(n_pos):
        phi = 2.0 * math.pi * k / n_pos
        pos = np.array([cx + radius * math.cos(phi),
                        cy + radius * math.sin(phi),
                        view_height])
        forward = np.array([-math.cos(phi), -math.sin(phi), 0.0])
        left = np.cross(ez, forward)
        dirs = {
            "forward": forward,
            "up": _rotate_about(forward, left, -ORIENTATION_OFFSET),
            "down": _rotate_about(forward, left, ORIENTATION_OFFSET),
            "left": _rotate_about(forward, ez, ORIENTATION_OFFSET),
            "right": _rotate_about(forward, ez, -ORIENTATION_OFFSET),
        }
        for label in ORIENTATION_LABELS:
            views.append(CandidateView(id=vid, position=pos.copy(),
                                       direction=dirs[label],
                                       orientation_label=label))
            vid += 1
    return views


class RearSideScorer:
    """Scores candidate views against a map snapshot; owns the scratch
    buffers so repeated scoring does not reallocate the grid."""

    def __init__(self, occ_map: vw.OccupancyMap,
                 fov=vw.FOV_DEFAULT, grid=SCORING_GRID_DEFAULT,
                 d_max=vw.D_MAX_DEFAULT, entropy_weighted=False):
        self.map = occ_map
        self.fov = fov
        self.grid = grid
        self.d_max = float(d_max)
        self.entropy_weighted = entropy_weighted
        self._marks = np.zeros(int(np.prod(occ_map.shape)), dtype=np.uint8)
        self._out = np.empty(1_000_000, dtype=np.int64)
        self._l_unk = (vw.logit(UNKNOWN_BAND[0]), vw.logit(UNKNOWN_BAND[1]))

    def score(self, view: CandidateView) -> float:
        rot = _look_rotation(view.direction)
        dirs = vw.camera_ray_directions(rot, self.fov, self.grid)
        m = self.map
        count, ent = kern.rear_side_cells(
            m.log_odds, m.origin[0], m.origin[1], m.origin[2], m.resolution,
            view.position[0], view.position[1], view.position[2], dirs,
            self.d_max, m.l_occ, self._l_unk[0], self._l_unk[1],
            self._marks, self._out)
        return float(ent) if self.entropy_weighted else float(count)


def _look_rotation(direction: np.ndarray) -> np.ndarray:
    """Rotation whose +x axis is `direction`, +z as vertical as possible."""
    f = np.asarray(direction, dtype=float)
    f = f / np.linalg.norm(f)
    ez = np.array([0.0, 0.0, 1.0])
    left = np.cross(ez, f)
    n = np.linalg.norm(left)
    if n < 1e-9:
        left = np.array([0.0, 1.0, 0.0])
    else:
        left = left / n
    up = np.cross(f, left)
    return np.column_stack([f, left, up])


def rear_side_voxel_gain(occ_map: vw.OccupancyMap, view: CandidateView,
                         fov=vw.FOV_DEFAULT, grid=SCORING_GRID_DEFAULT,
                         d_max=vw.D_MAX_DEFAULT,
                         entropy_weighted=False) -> float:
    return RearSideScorer(occ_map, fov=fov, grid=grid, d_max=d_max,
                          entropy_weighted=entropy_weighted).score(view)


def select_nbv(occ_map: vw.OccupancyMap, candidates, visited,
               scorer: RearSideScorer | None = None) -> CandidateView:
    """Argmax rear-side-voxel score over unvisited candidates; ties break
    toward the lowest id. Raises EpisodeComplete with nothing left."""
    if scorer is None:
        scorer = RearSideScorer(occ_map)
    best = None
    for view in candidates:
        if view.id in visited:
            continue
        view.score = scorer.score(view)
        if best is None or view.score > best.score:
            best = view
    if best is None:
        raise EpisodeComplete("all candidate views visited")
    return best
