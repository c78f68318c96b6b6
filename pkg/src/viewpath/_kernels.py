"""Numba kernels for batched voxel-grid ray traversal.

All kernels share the same amortized grid walk as voxel_world.traverse
(tests assert agreement); they exist because episodes cast millions of rays.
"""

from __future__ import annotations

import numpy as np
from numba import njit

INF = 1e30


@njit(cache=True, inline="always")
def _clip_to_grid(ox, oy, oz, dx, dy, dz, gx, gy, gz, res, nx, ny, nz,
                  max_dist):
    """Slab-clip a ray to the grid AABB; returns (t0, t1), t0 > t1 if empty."""
    t0 = 0.0
    t1 = max_dist
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    g = (gx, gy, gz)
    n = (nx, ny, nz)
    for a in range(3):
        lo = g[a]
        hi = g[a] + n[a] * res
        if d[a] == 0.0:
            if o[a] < lo or o[a] >= hi:
                return 1.0, 0.0
        else:
            ta = (lo - o[a]) / d[a]
            tb = (hi - o[a]) / d[a]
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
    return t0, t1


@njit(cache=True, inline="always")
def _walk_init(ox, oy, oz, dx, dy, dz, gx, gy, gz, res, nx, ny, nz, t0):
    """Initial voxel index, per-axis step, and boundary-crossing times."""
    px = ox + t0 * dx
    py = oy + t0 * dy
    pz = oz + t0 * dz
    ix = int(np.floor((px - gx) / res))
    iy = int(np.floor((py - gy) / res))
    iz = int(np.floor((pz - gz) / res))
    if ix < 0:
        ix = 0
    if iy < 0:
        iy = 0
    if iz < 0:
        iz = 0
    if ix > nx - 1:
        ix = nx - 1
    if iy > ny - 1:
        iy = ny - 1
    if iz > nz - 1:
        iz = nz - 1

    idx = (ix, iy, iz)
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    g = (gx, gy, gz)
    step = np.empty(3, dtype=np.int64)
    tmax = np.empty(3)
    tdelta = np.empty(3)
    for a in range(3):
        if d[a] > 0.0:
            step[a] = 1
            tmax[a] = (g[a] + (idx[a] + 1) * res - o[a]) / d[a]
            tdelta[a] = res / d[a]
        elif d[a] < 0.0:
            step[a] = -1
            tmax[a] = (g[a] + idx[a] * res - o[a]) / d[a]
            tdelta[a] = -res / d[a]
        else:
            step[a] = 0
            tmax[a] = INF
            tdelta[a] = INF
    return ix, iy, iz, step, tmax, tdelta


@njit(cache=True, inline="always")
def _prob(lo):
    return 1.0 / (1.0 + np.exp(-lo))


@njit(cache=True, inline="always")
def _entropy(lo):
    p = _prob(lo)
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * np.log(p) - (1.0 - p) * np.log(1.0 - p)


@njit(cache=True)
def cast_first_hit(occ, gx, gy, gz, res, ox, oy, oz, dirs, max_dist):
    """First ground-truth occupied voxel along each ray.

    Returns (hit flags, entry distance of the hit voxel, hit voxel indices).
    """
    n_rays = dirs.shape[0]
    nx, ny, nz = occ.shape
    hit = np.zeros(n_rays, dtype=np.bool_)
    dist = np.full(n_rays, max_dist)
    hit_idx = np.full((n_rays, 3), -1, dtype=np.int64)
    for r in range(n_rays):
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        t0, t1 = _clip_to_grid(ox, oy, oz, dx, dy, dz,
                               gx, gy, gz, res, nx, ny, nz, max_dist)
        if t0 > t1:
            continue
        ix, iy, iz, step, tmax, tdelta = _walk_init(
            ox, oy, oz, dx, dy, dz, gx, gy, gz, res, nx, ny, nz, t0)
        t_cur = t0
        while True:
            if occ[ix, iy, iz]:
                hit[r] = True
                dist[r] = t_cur
                hit_idx[r, 0] = ix
                hit_idx[r, 1] = iy
                hit_idx[r, 2] = iz
                break
            a = 0
            if tmax[1] < tmax[a]:
                a = 1
            if tmax[2] < tmax[a]:
                a = 2
            t_next = tmax[a]
            if t_next >= max_dist:
                break
            t_cur = t_next
            if a == 0:
                ix += step[0]
                if ix < 0 or ix >= nx:
                    break
            elif a == 1:
                iy += step[1]
                if iy < 0 or iy >= ny:
                    break
            else:
                iz += step[2]
                if iz < 0 or iz >= nz:
                    break
            tmax[a] += tdelta[a]
    return hit, dist, hit_idx


@njit(cache=True)
def update_from_scan(log_odds, gx, gy, gz, res, ox, oy, oz, dirs,
                     hit, hit_idx, max_dist, l_miss, l_hit, l_min, l_max):
    """Log-odds fusion of one scan: misses before the hit cell, a hit update
    at the hit cell, nothing beyond it. Rays are processed in order."""
    nx, ny, nz = log_odds.shape
    n_rays = dirs.shape[0]
    for r in range(n_rays):
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        t0, t1 = _clip_to_grid(ox, oy, oz, dx, dy, dz,
                               gx, gy, gz, res, nx, ny, nz, max_dist)
        if t0 > t1:
            continue
        ix, iy, iz, step, tmax, tdelta = _walk_init(
            ox, oy, oz, dx, dy, dz, gx, gy, gz, res, nx, ny, nz, t0)
        hx, hy, hz = hit_idx[r, 0], hit_idx[r, 1], hit_idx[r, 2]
        while True:
            if hit[r] and ix == hx and iy == hy and iz == hz:
                v = log_odds[ix, iy, iz] + l_hit
                if v > l_max:
                    v = l_max
                if v < l_min:
                    v = l_min
                log_odds[ix, iy, iz] = v
                break
            v = log_odds[ix, iy, iz] + l_miss
            if v > l_max:
                v = l_max
            if v < l_min:
                v = l_min
            log_odds[ix, iy, iz] = v
            a = 0
            if tmax[1] < tmax[a]:
                a = 1
            if tmax[2] < tmax[a]:
                a = 2
            if tmax[a] >= max_dist:
                break
            if a == 0:
                ix += step[0]
                if ix < 0 or ix >= nx:
                    break
            elif a == 1:
                iy += step[1]
                if iy < 0 or iy >= ny:
                    break
            else:
                iz += step[2]
                if iz < 0 or iz >= nz:
                    break
            tmax[a] += tdelta[a]


@njit(cache=True)
def ray_entropy_batch(log_odds, gx, gy, gz, res, origins, dirs, max_dist,
                      l_occ):
    """Per-ray summed voxel entropy, stopping at (and excluding) the first
    cell whose occupancy log-odds exceeds l_occ."""
    nx, ny, nz = log_odds.shape
    n_rays = dirs.shape[0]
    gains = np.zeros(n_rays)
    for r in range(n_rays):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        t0, t1 = _clip_to_grid(ox, oy, oz, dx, dy, dz,
                               gx, gy, gz, res, nx, ny, nz, max_dist)
        if t0 > t1:
            continue
        ix, iy, iz, step, tmax, tdelta = _walk_init(
            ox, oy, oz, dx, dy, dz, gx, gy, gz, res, nx, ny, nz, t0)
        total = 0.0
        while True:
            lo = log_odds[ix, iy, iz]
            if lo > l_occ:
                break
            total += _entropy(lo)
            a = 0
            if tmax[1] < tmax[a]:
                a = 1
            if tmax[2] < tmax[a]:
                a = 2
            if tmax[a] >= max_dist:
                break
            if a == 0:
                ix += step[0]
                if ix < 0 or ix >= nx:
                    break
            elif a == 1:
                iy += step[1]
                if iy < 0 or iy >= ny:
                    break
            else:
                iz += step[2]
                if iz < 0 or iz >= nz:
                    break
            tmax[a] += tdelta[a]
        gains[r] = total
    return gains


@njit(cache=True)
def ray_entropy_batch_box(log_odds, gx, gy, gz, res, origins, dirs, max_dist,
                          l_occ, bx0, bx1, by0, by1, bz0, bz1):
    """Like ray_entropy_batch, but only cells inside the half-open index box
    [b*0, b*1) contribute entropy. Occlusion still stops the ray anywhere."""
    nx, ny, nz = log_odds.shape
    n_rays = dirs.shape[0]
    gains = np.zeros(n_rays)
    for r in range(n_rays):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        t0, t1 = _clip_to_grid(ox, oy, oz, dx, dy, dz,
                               gx, gy, gz, res, nx, ny, nz, max_dist)
        if t0 > t1:
            continue
        ix, iy, iz, step, tmax, tdelta = _walk_init(
            ox, oy, oz, dx, dy, dz, gx, gy, gz, res, nx, ny, nz, t0)
        total = 0.0
        while True:
            lo = log_odds[ix, iy, iz]
            if lo > l_occ:
                break
            if (bx0 <= ix < bx1 and by0 <= iy < by1 and bz0 <= iz < bz1):
                total += _entropy(lo)
            a = 0
            if tmax[1] < tmax[a]:
                a = 1
            if tmax[2] < tmax[a]:
                a = 2
            if tmax[a] >= max_dist:
                break
            if a == 0:
                ix += step[0]
                if ix < 0 or ix >= nx:
                    break
            elif a == 1:
                iy += step[1]
                if iy < 0 or iy >= ny:
                    break
            else:
                iz += step[2]
                if iz < 0 or iz >= nz:
                    break
            tmax[a] += tdelta[a]
        gains[r] = total
    return gains


@njit(cache=True)
def rear_side_cells(log_odds, gx, gy, gz, res, ox, oy, oz, dirs, max_dist,
                    l_occ, l_unk_lo, l_unk_hi, marks, out):
    """Collect distinct rear-side voxels: an unknown-band cell immediately
    following an occupied cell along a ray. Returns (count, entropy sum).

    `marks` is a caller-owned scratch byte array over the flat grid; touched
    entries are reset before returning.
    """
    nx, ny, nz = log_odds.shape
    n_rays = dirs.shape[0]
    count = 0
    ent_sum = 0.0
    for r in range(n_rays):
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        t0, t1 = _clip_to_grid(ox, oy, oz, dx, dy, dz,
                               gx, gy, gz, res, nx, ny, nz, max_dist)
        if t0 > t1:
            continue
        ix, iy, iz, step, tmax, tdelta = _walk_init(
            ox, oy, oz, dx, dy, dz, gx, gy, gz, res, nx, ny, nz, t0)
        prev_occupied = False
        while True:
            lo = log_odds[ix, iy, iz]
            if prev_occupied and l_unk_lo <= lo <= l_unk_hi:
                lin = (ix * ny + iy) * nz + iz
                if marks[lin] == 0 and count < out.shape[0]:
                    marks[lin] = 1
                    out[count] = lin
                    count += 1
                    ent_sum += _entropy(lo)
            prev_occupied = lo > l_occ
            a = 0
            if tmax[1] < tmax[a]:
                a = 1
            if tmax[2] < tmax[a]:
                a = 2
            if tmax[a] >= max_dist:
                break
            if a == 0:
                ix += step[0]
                if ix < 0 or ix >= nx:
                    break
            elif a == 1:
                iy += step[1]
                if iy < 0 or iy >= ny:
                    break
            else:
                iz += step[2]
                if iz < 0 or iz >= nz:
                    break
            tmax[a] += tdelta[a]
    for k in range(count):
        marks[out[k]] = 0
    return count, ent_sum
