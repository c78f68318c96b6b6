"""Ground-truth scene, probabilistic occupancy map, simulated depth sensing,
voxel ray traversal, and entropy queries.

The map is a dense axis-aligned log-odds grid. Single-ray `traverse` is the
reference grid walk; the hot paths (scans, scoring) run the same walk inside
numba kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kern

RESOLUTION_DEFAULT = 0.03
D_MAX_DEFAULT = 4.5
SENSOR_GRID_DEFAULT = (64, 48)
FOV_DEFAULT = (math.radians(74.0), math.radians(60.0))


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


@dataclass
class GroundTruthScene:
    """Hidden object + workspace geometry used by the simulated sensor."""
    occ: np.ndarray                 # bool voxel grid of the object
    origin: np.ndarray              # world position of the grid min corner
    resolution: float
    bounding_box: tuple             # (min 3-vector, max 3-vector)
    forbidden_cylinder: tuple       # (cx, cy, radius)
    obstacles: list                 # [(cx, cy, radius), ...] ground circles


class OccupancyMap:
    """Dense log-odds occupancy grid with clamped updates.

    Unvisited cells have log-odds 0 (P = 0.5, unknown). Interpretation
    thresholds: free below p_free, occupied above p_occ.
    """

    def __init__(self, origin, shape, resolution=RESOLUTION_DEFAULT,
                 p_hit=0.85, p_miss=0.40, p_clamp=(0.12, 0.97),
                 p_free=0.2, p_occ=0.7):
        self.origin = np.asarray(origin, dtype=float)
        self.resolution = float(resolution)
        self.log_odds = np.zeros(tuple(shape), dtype=np.float32)
        self.l_hit = logit(p_hit)
        self.l_miss = logit(p_miss)
        self.l_min = logit(p_clamp[0])
        self.l_max = logit(p_clamp[1])
        self.p_free = p_free
        self.p_occ = p_occ
        self.l_occ = logit(p_occ)

    @classmethod
    def for_scene(cls, scene: GroundTruthScene, **kwargs) -> "OccupancyMap":
        return cls(scene.origin, scene.occ.shape,
                   resolution=scene.resolution, **kwargs)

    @property
    def shape(self):
        return self.log_odds.shape

    def world_to_index(self, point):
        return tuple(np.floor(
            (np.asarray(point) - self.origin) / self.resolution).astype(int))

    def index_to_center(self, idx):
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.resolution

    def probability(self, idx=None):
        lo = self.log_odds if idx is None else self.log_odds[idx]
        return 1.0 / (1.0 + np.exp(-np.asarray(lo, dtype=float)))

    def occupied_indices(self) -> np.ndarray:
        """Indices of cells above the occupied threshold, lexicographic order."""
        return np.argwhere(self.log_odds > self.l_occ)

    def save_snapshot(self, path):
        """Plain-text dump of visited cells: 'x y z log_odds' per line."""
        idx = np.argwhere(self.log_odds != 0.0)
        centers = self.origin + (idx + 0.5) * self.resolution
        with open(path, "w") as f:
            for (x, y, z), i in zip(centers, idx):
                f.write(f"{x:.6f} {y:.6f} {z:.6f} "
                        f"{self.log_odds[tuple(i)]:.6f}\n")


@dataclass(frozen=True)
class DepthScan:
    """One simulated frame: shared origin, unit ray directions (row-major
    over the ray grid), per-ray hit flag and hit distance (entry of the hit
    voxel, <= d_max)."""
    origin: np.ndarray
    directions: np.ndarray
    hit: np.ndarray
    dist: np.ndarray
    hit_idx: np.ndarray


def traverse(grid_like, origin, direction, max_dist):
    """Exact amortized voxel walk along one ray.

    grid_like: an OccupancyMap (yields (index, P)) or any object with
    .origin/.resolution and a 3-D array under .log_odds or .occ.
    Returns an ordered list of (index tuple, value).
    """
    if isinstance(grid_like, OccupancyMap):
        arr = grid_like.log_odds
        value = lambda ijk: float(1.0 / (1.0 + math.exp(-arr[ijk])))
    else:
        arr = grid_like.occ
        value = lambda ijk: bool(arr[ijk])
    go = np.asarray(grid_like.origin, dtype=float)
    res = float(grid_like.resolution)
    shape = arr.shape
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)

    t0, t1 = 0.0, float(max_dist)
    for a in range(3):
        lo, hi = go[a], go[a] + shape[a] * res
        if d[a] == 0.0:
            if o[a] < lo or o[a] >= hi:
                return []
        else:
            ta, tb = (lo - o[a]) / d[a], (hi - o[a]) / d[a]
            if ta > tb:
                ta, tb = tb, ta
            t0, t1 = max(t0, ta), min(t1, tb)
    if t0 > t1:
        return []

    p0 = o + t0 * d
    idx = np.clip(np.floor((p0 - go) / res).astype(int), 0,
                  np.array(shape) - 1)
    step = np.zeros(3, dtype=int)
    tmax = np.full(3, np.inf)
    tdelta = np.full(3, np.inf)
    for a in range(3):
        if d[a] > 0:
            step[a] = 1
            tmax[a] = (go[a] + (idx[a] + 1) * res - o[a]) / d[a]
            tdelta[a] = res / d[a]
        elif d[a] < 0:
            step[a] = -1
            tmax[a] = (go[a] + idx[a] * res - o[a]) / d[a]
            tdelta[a] = -res / d[a]

    out = []
    while True:
        ijk = (int(idx[0]), int(idx[1]), int(idx[2]))
        out.append((ijk, value(ijk)))
        a = int(np.argmin(tmax))
        if tmax[a] >= max_dist:
            break
        idx[a] += step[a]
        if idx[a] < 0 or idx[a] >= shape[a]:
            break
        tmax[a] += tdelta[a]
    return out


def camera_ray_directions(rotation, fov, grid) -> np.ndarray:
    """Row-major pinhole ray grid in the world frame.

    Camera frame: +x forward, +y left, +z up. A 1x1 grid is exactly the
    optical axis.
    """
    w, h = grid
    tan_h = math.tan(0.5 * fov[0])
    tan_v = math.tan(0.5 * fov[1])
    us = np.linspace(-1.0, 1.0, w) if w > 1 else np.zeros(1)
    vs = np.linspace(-1.0, 1.0, h) if h > 1 else np.zeros(1)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    local = np.stack([np.ones_like(uu), -tan_h * uu, -tan_v * vv],
                     axis=-1).reshape(-1, 3)
    local /= np.linalg.norm(local, axis=1, keepdims=True)
    return local @ np.asarray(rotation).T


def simulate_depth_scan(scene: GroundTruthScene, position, rotation,
                        fov=FOV_DEFAULT, grid=SENSOR_GRID_DEFAULT,
                        d_max=D_MAX_DEFAULT) -> DepthScan:
    """Cast the sensor ray grid against the ground truth: each ray reports
    the first occupied voxel within d_max, else a miss."""
    dirs = camera_ray_directions(rotation, fov, grid)
    o = np.asarray(position, dtype=float)
    hit, dist, hit_idx = kern.cast_first_hit(
        scene.occ, scene.origin[0], scene.origin[1], scene.origin[2],
        scene.resolution, o[0], o[1], o[2], dirs, float(d_max))
    return DepthScan(origin=o, directions=dirs, hit=hit, dist=dist,
                     hit_idx=hit_idx)


def integrate_scan(occ_map: OccupancyMap, scan: DepthScan,
                   d_max=D_MAX_DEFAULT) -> OccupancyMap:
    """Log-odds fusion: miss updates before each hit, a hit update at the
    hit cell; rays processed row-major for determinism."""
    o = scan.origin
    kern.update_from_scan(
        occ_map.log_odds, occ_map.origin[0], occ_map.origin[1],
        occ_map.origin[2], occ_map.resolution, o[0], o[1], o[2],
        scan.directions, scan.hit, scan.hit_idx, float(d_max),
        np.float32(occ_map.l_miss), np.float32(occ_map.l_hit),
        np.float32(occ_map.l_min), np.float32(occ_map.l_max))
    return occ_map


def voxel_entropy(p):
    """Binary entropy in nats with the 0*ln(0) = 0 convention."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    inner = (p > 0.0) & (p < 1.0)
    q = p[inner]
    out[inner] = -q * np.log(q) - (1.0 - q) * np.log(1.0 - q)
    return float(out) if out.ndim == 0 else out


def ray_information(occ_map: OccupancyMap, origin, direction,
                    max_dist=D_MAX_DEFAULT) -> float:
    """Summed entropy over traversed cells, halting at (and excluding) the
    first occupied cell."""
    origins = np.asarray(origin, dtype=float).reshape(1, 3)
    dirs = np.asarray(direction, dtype=float).reshape(1, 3)
    gains = kern.ray_entropy_batch(
        occ_map.log_odds, occ_map.origin[0], occ_map.origin[1],
        occ_map.origin[2], occ_map.resolution, origins, dirs,
        float(max_dist), occ_map.l_occ)
    return float(gains[0])


def ray_information_batch(occ_map: OccupancyMap, origins, dirs,
                          max_dist=D_MAX_DEFAULT, box=None) -> np.ndarray:
    """Per-ray summed entropy. With `box` given, only cells inside that
    axis-aligned region accumulate entropy (occlusion still applies
    everywhere); used when gains should be scoped to the reconstruction
    volume rather than the whole world."""
    origins = np.ascontiguousarray(origins, dtype=float)
    dirs = np.ascontiguousarray(dirs, dtype=float)
    if box is None:
        return kern.ray_entropy_batch(
            occ_map.log_odds, occ_map.origin[0], occ_map.origin[1],
            occ_map.origin[2], occ_map.resolution, origins, dirs,
            float(max_dist), occ_map.l_occ)
    i0, i1 = box_index_range(occ_map, box)
    return kern.ray_entropy_batch_box(
        occ_map.log_odds, occ_map.origin[0], occ_map.origin[1],
        occ_map.origin[2], occ_map.resolution, origins, dirs,
        float(max_dist), occ_map.l_occ,
        i0[0], i1[0], i0[1], i1[1], i0[2], i1[2])


def box_index_range(occ_map: OccupancyMap, box):
    bmin, bmax = (np.asarray(b, dtype=float) for b in box)
    i0 = np.floor((bmin - occ_map.origin) / occ_map.resolution + 1e-9).astype(int)
    i1 = np.ceil((bmax - occ_map.origin) / occ_map.resolution - 1e-9).astype(int)
    return i0, i1


def total_entropy(occ_map: OccupancyMap, box) -> float:
    """Entropy summed over every voxel inside the axis-aligned box; cells
    outside the stored grid count as unknown (P = 0.5)."""
    i0, i1 = box_index_range(occ_map, box)
    n_total = int(np.prod(np.maximum(i1 - i0, 0)))
    c0 = np.clip(i0, 0, occ_map.shape)
    c1 = np.clip(i1, 0, occ_map.shape)
    n_stored = int(np.prod(np.maximum(c1 - c0, 0)))
    sub = occ_map.log_odds[c0[0]:c1[0], c0[1]:c1[1], c0[2]:c1[2]]
    p = 1.0 / (1.0 + np.exp(-sub.astype(np.float64)))
    ent = np.where((p > 0) & (p < 1),
                   -p * np.log(np.clip(p, 1e-300, None))
                   - (1 - p) * np.log(np.clip(1 - p, 1e-300, None)), 0.0)
    unknown_cells = n_total - n_stored
    return float(ent.sum()) + unknown_cells * voxel_entropy(0.5)
