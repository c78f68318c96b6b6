"""RRT*-based informative path planning between NBVs (the sampling
baseline): shortest tree path in the base plane, then entropy-scored
candidate views sampled in spheres around the path nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import voxel_world as vw
from .nbv import _look_rotation

YAW_PITCH_BOUND = math.pi / 6.0


@dataclass(frozen=True)
class RrtParams:
    step: float = 0.3
    neighbor_radius: float = 0.9
    max_iters: int = 2000
    goal_tolerance: float = 0.15
    goal_bias: float = 0.1
    bounds: tuple = ((-5.0, -5.0), (5.0, 5.0))
    inflation: float = 0.25          # robot footprint radius
    sphere_radius: float = 0.5
    views_per_node: int = 10
    waypoint_stride: float = 0.8     # spacing of evaluated path nodes


@dataclass
class RrtTree:
    nodes: np.ndarray                # (N, 2)
    parent: np.ndarray               # (N,), -1 at root
    cost: np.ndarray                 # cost-to-root
    goal_id: int                     # -1 when unreached
    path: np.ndarray                 # (K, 2) start..goal (fallback: 2 rows)
    reached: bool


@dataclass
class LocalView:
    position: np.ndarray
    direction: np.ndarray
    yaw: float
    pitch: float
    score: float = 0.0


def _segment_free(a, b, circles, inflation) -> bool:
    """Straight segment vs inflated circles, by closest-point distance."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    den = float(ab @ ab)
    for cx, cy, r in circles:
        c = np.array([cx, cy])
        t = 0.0 if den == 0.0 else float(np.clip((c - a) @ ab / den, 0.0, 1.0))
        if np.linalg.norm(a + t * ab - c) <= r + inflation:
            return False
    return True


def build_rrt_star(start, goal, obstacles, forbidden_cylinder,
                   params: RrtParams, rng: np.random.Generator) -> RrtTree:
    """RRT* in the base plane with rewiring; collision checks against
    inflated circular obstacles and the forbidden cylinder.

    Falls back to the direct start-goal segment when the goal region is not
    reached within the iteration budget.
    """
    circles = list(obstacles)
    if forbidden_cylinder is not None:
        circles.append(forbidden_cylinder)
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)

    cap = params.max_iters + 1
    nodes = np.empty((cap, 2))
    parent = np.full(cap, -1, dtype=int)
    cost = np.zeros(cap)
    nodes[0] = start
    n = 1

    lo = np.asarray(params.bounds[0])
    hi = np.asarray(params.bounds[1])

    if np.linalg.norm(goal - start) <= params.goal_tolerance:
        path = np.vstack([start, start])
        return RrtTree(nodes=nodes[:1], parent=parent[:1], cost=cost[:1],
                       goal_id=0, path=path[:1], reached=True)

    for _ in range(params.max_iters):
        if rng.random() < params.goal_bias:
            sample = goal.copy()
        else:
            sample = lo + rng.random(2) * (hi - lo)
        d2 = np.einsum("ij,ij->i", nodes[:n] - sample, nodes[:n] - sample)
        nearest = int(np.argmin(d2))
        delta = sample - nodes[nearest]
        dist = float(np.linalg.norm(delta))
        if dist < 1e-9:
            continue
        new = nodes[nearest] + delta * min(1.0, params.step / dist)
        if not _segment_free(nodes[nearest], new, circles, params.inflation):
            continue

        # choose the cheapest collision-free parent among neighbors
        d2 = np.einsum("ij,ij->i", nodes[:n] - new, nodes[:n] - new)
        near = np.flatnonzero(d2 <= params.neighbor_radius ** 2)
        best_parent = nearest
        best_cost = cost[nearest] + float(np.linalg.norm(new - nodes[nearest]))
        for j in near:
            c = cost[j] + float(np.linalg.norm(new - nodes[j]))
            if c < best_cost and _segment_free(nodes[j], new, circles,
                                               params.inflation):
                best_parent, best_cost = int(j), c
        nodes[n] = new
        parent[n] = best_parent
        cost[n] = best_cost
        # rewire neighbors through the new node when cheaper
        for j in near:
            c = best_cost + float(np.linalg.norm(new - nodes[j]))
            if c < cost[j] and _segment_free(new, nodes[j], circles,
                                             params.inflation):
                parent[j] = n
                _propagate_cost(nodes, parent, cost, n_nodes=n + 1,
                                root=int(j), new_cost=c)
        n += 1

    # cheapest node inside the goal region
    d = np.linalg.norm(nodes[:n] - goal, axis=1)
    in_goal = np.flatnonzero(d <= params.goal_tolerance)
    if in_goal.size:
        goal_id = int(in_goal[np.argmin(cost[in_goal])])
        chain = []
        k = goal_id
        while k != -1:
            chain.append(k)
            k = int(parent[k])
        path = nodes[chain[::-1]]
        reached = True
    else:
        goal_id = -1
        path = np.vstack([start, goal])
        reached = False
    return RrtTree(nodes=nodes[:n].copy(), parent=parent[:n].copy(),
                   cost=cost[:n].copy(), goal_id=goal_id, path=path,
                   reached=reached)


def _propagate_cost(nodes, parent, cost, n_nodes, root, new_cost):
    """Push a cost improvement down the subtree after rewiring."""
    cost[root] = new_cost
    stack = [root]
    while stack:
        k = stack.pop()
        for j in range(n_nodes):
            if parent[j] == k:
                cost[j] = cost[k] + float(np.linalg.norm(nodes[j] - nodes[k]))
                stack.append(j)


def path_waypoints(path: np.ndarray, stride: float) -> np.ndarray:
    """Decimate a dense RRT* path to waypoints roughly `stride` apart; the
    final node (the NBV) is always kept."""
    if len(path) <= 2:
        return path[-1:].copy()
    keep = []
    acc = 0.0
    for i in range(1, len(path)):
        acc += float(np.linalg.norm(path[i] - path[i - 1]))
        if acc >= stride and i < len(path) - 1:
            keep.append(i)
            acc = 0.0
    keep.append(len(path) - 1)
    return path[keep].copy()


def sample_views_around_node(node, sphere_radius, count, view_height,
                             cylinder_center,
                             rng: np.random.Generator) -> list:
    """Candidate views uniform in a sphere around a path node, facing the
    search-space center perturbed by yaw/pitch in [-pi/6, pi/6]."""
    assert count >= 1
    center = np.array([node[0], node[1], view_height])
    ctr = np.asarray(cylinder_center, dtype=float)
    aim_z = ctr[2] if ctr.shape[0] >= 3 else view_height
    aim = np.array([ctr[0], ctr[1], aim_z])
    views = []
    for _ in range(count):
        while True:
            v = rng.uniform(-1.0, 1.0, 3)
            if v @ v <= 1.0:
                break
        pos = center + sphere_radius * v
        yaw = rng.uniform(-YAW_PITCH_BOUND, YAW_PITCH_BOUND)
        pitch = rng.uniform(-YAW_PITCH_BOUND, YAW_PITCH_BOUND)
        views.append(LocalView(position=pos,
                               direction=_face_direction(pos, aim, yaw, pitch),
                               yaw=yaw, pitch=pitch))
    return views


def path_node_target(path: np.ndarray, current_position, view_height,
                     cylinder_center, nbv_view=None, node_idx=None):
    """Next path node as a plain waypoint (no sampled detour): the view sits
    exactly on the node, facing the search-space center. At the end of the
    path the NBV itself is the target.

    With an explicit node_idx the nodes are followed strictly in order;
    nearest-node selection can jump the target across an impassable wall
    when the robot strays off the corridor."""
    assert len(path) >= 1
    if node_idx is None:
        cur = np.asarray(current_position[:2], dtype=float)
        d = np.linalg.norm(path - cur, axis=1)
        node_idx = int(np.argmin(d)) + 1
    if node_idx >= len(path) - 1:
        return nbv_view, len(path) - 1
    node = path[node_idx]
    pos = np.array([node[0], node[1], view_height])
    ctr = np.asarray(cylinder_center, dtype=float)
    aim_z = ctr[2] if ctr.shape[0] >= 3 else view_height
    aim = np.array([ctr[0], ctr[1], aim_z])
    return LocalView(position=pos,
                     direction=_face_direction(pos, aim, 0.0, 0.0),
                     yaw=0.0, pitch=0.0), node_idx


def _face_direction(position, aim, yaw, pitch) -> np.ndarray:
    """Direction toward `aim`, then yawed about vertical and pitched about
    the local left axis; zero offsets face the aim point exactly."""
    f = np.asarray(aim, dtype=float) - np.asarray(position, dtype=float)
    norm = np.linalg.norm(f)
    f = np.array([1.0, 0.0, 0.0]) if norm < 1e-9 else f / norm
    ez = np.array([0.0, 0.0, 1.0])
    cy, sy = math.cos(yaw), math.sin(yaw)
    f = np.array([f[0] * cy - f[1] * sy, f[0] * sy + f[1] * cy, f[2]])
    left = np.cross(ez, f)
    n = np.linalg.norm(left)
    left = np.array([0.0, 1.0, 0.0]) if n < 1e-9 else left / n
    c, s = math.cos(pitch), math.sin(pitch)
    f = f * c + np.cross(left, f) * s
    return f / np.linalg.norm(f)


def evaluate_view_entropy(occ_map: vw.OccupancyMap, view: LocalView,
                          fov=vw.FOV_DEFAULT, d_max=vw.D_MAX_DEFAULT,
                          grid=(32, 24), box=None) -> float:
    """Total ray information over the camera's scoring grid at this view.

    With `box` given the gain is scoped to the reconstruction volume, so
    local views are ranked by what they reveal about the object rather than
    by unexplored space elsewhere.
    """
    rot = _look_rotation(view.direction)
    dirs = vw.camera_ray_directions(rot, fov, grid)
    origins = np.broadcast_to(view.position, dirs.shape).copy()
    return float(vw.ray_information_batch(occ_map, origins, dirs,
                                          d_max, box=box).sum())


def next_local_target(path: np.ndarray, occ_map: vw.OccupancyMap,
                      current_position, params: RrtParams,
                      rng: np.random.Generator,
                      view_height, cylinder_center,
                      fov=vw.FOV_DEFAULT, d_max=vw.D_MAX_DEFAULT,
                      nbv_view=None, box=None, obstacles=None,
                      node_idx=None):
    """Best sampled view around the closest path node ahead of the robot;
    at the end of the path the NBV itself is the target.

    Views whose base footprint would collide with an obstacle, or that
    cannot be reached from the path node on a straight free segment, are
    discarded: the sampling sphere may overlap clutter the path avoids,
    and an unreachable view wedges the controller against an obstacle."""
    assert len(path) >= 1
    if node_idx is None:
        cur = np.asarray(current_position[:2], dtype=float)
        d = np.linalg.norm(path - cur, axis=1)
        node_idx = int(np.argmin(d)) + 1      # closest node ahead
    if node_idx >= len(path) - 1:
        return nbv_view, len(path) - 1
    node = path[node_idx]
    views = sample_views_around_node(node, params.sphere_radius,
                                     params.views_per_node, view_height,
                                     cylinder_center, rng)
    if obstacles is not None and len(obstacles):
        views = [v for v in views
                 if _segment_free(node, v.position[:2], obstacles,
                                  params.inflation)]
        if not views:
            return path_node_target(path, current_position, view_height,
                                    cylinder_center, nbv_view=nbv_view,
                                    node_idx=node_idx)
    best = None
    for v in views:
        v.score = evaluate_view_entropy(occ_map, v, fov=fov, d_max=d_max,
                                        box=box)
        if best is None or v.score > best.score:
            best = v
    return best, node_idx
