"""Procedural environments and episode orchestration.

An episode: repeatedly pick the next-best view, drive to it with the
configured strategy (focus / no_path / sampling), integrate depth scans on
the way, and record coverage/entropy/time at each arrival. Everything is a
pure function of (config, seed); planner wall-clock time is the only
non-deterministic output and is kept out of the deterministic log fields.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, asdict, replace

import numpy as np
import yaml

from . import controller as ctl
from . import focus as fp
from . import kinematics as kin
from . import metrics as mx
from . import nbv
from . import sampling as smp
from . import voxel_world as vw

log = logging.getLogger(__name__)

STRATEGIES = ("focus", "no_path", "sampling")


@dataclass
class ScenarioConfig:
    seed: int = 0
    strategy: str = "focus"
    n_nbv: int = 10

    # world
    resolution: float = vw.RESOLUTION_DEFAULT
    world_min: tuple = (-6.0, -6.0, 0.0)
    world_max: tuple = (6.0, 6.0, 4.05)
    box_size: tuple = (5.5, 5.5, 4.0)          # entropy bounding box
    obstacle_count: int = 10
    obstacle_radius: tuple = (0.1, 0.3)
    forbidden_radius: float | None = None      # default: object footprint + margin
    object_file: str | None = None             # optional voxel list (x y z per line)

    # search space
    cylinder_radius: float = nbv.CYLINDER_RADIUS_DEFAULT
    n_positions: int = nbv.N_POSITIONS_DEFAULT
    view_height: float = nbv.VIEW_HEIGHT_DEFAULT

    # sensing
    fov: tuple = vw.FOV_DEFAULT
    sensor_grid: tuple = vw.SENSOR_GRID_DEFAULT
    d_max: float = vw.D_MAX_DEFAULT
    scan_every: int = 5

    # control loop
    dt: float = 0.02
    arrival_pos_tol: float = 0.05
    arrival_ang_tol: float = math.radians(5.0)
    leg_timeout: float = 120.0
    infeasible_abort: int = 100
    control: ctl.ControlParams = field(default_factory=ctl.ControlParams)

    # strategy details
    # episode-level recompute threshold; looser than the module default so
    # the focus direction is not refreshed faster than the camera can swing
    focus_threshold: float = 1.0
    focus_k: int = fp.FOCUS_GRID_K_DEFAULT
    focus_distance: float = fp.FOCUS_DISTANCE_DEFAULT
    rrt: smp.RrtParams = field(default_factory=smp.RrtParams)
    waypoint_pos_tol: float = 0.20
    waypoint_ang_tol: float = math.radians(15.0)
    # fraction of the leg budget that may be spent visiting informative
    # local views; past it the robot commits straight to the NBV so a
    # slow detour cannot starve the goal scan
    local_view_budget: float = 0.5
    # aim height for sampled local views: roughly mid-object, so detour
    # scans land on the surface instead of the floor in front of it
    local_aim_height: float = 1.0

    robot_file: str | None = None

    def __post_init__(self):
        assert self.n_nbv >= 1
        assert self.strategy in STRATEGIES
        assert 0 < self.obstacle_radius[0] <= self.obstacle_radius[1]

    @staticmethod
    def from_yaml(path) -> "ScenarioConfig":
        with open(path) as f:
            raw = yaml.safe_load(f) or {}
        return ScenarioConfig.from_dict(raw)

    @staticmethod
    def from_dict(raw: dict) -> "ScenarioConfig":
        raw = dict(raw)
        ctrl = ctl.ControlParams(**raw.pop("control", {}))
        rrt = smp.RrtParams(**{k: tuple(v) if k == "bounds" else v
                               for k, v in raw.pop("rrt", {}).items()})
        for key in ("world_min", "world_max", "box_size", "obstacle_radius",
                    "fov", "sensor_grid"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return ScenarioConfig(control=ctrl, rrt=rrt, **raw)


@dataclass
class StepRecord:
    step: int
    nbv_id: int
    coverage: float
    entropy: float
    sim_time: float            # cumulative simulated travel time (s)
    plan_time: float           # cumulative planner wall time (s)
    plan_rays: int             # cumulative deterministic planner work counter
    min_d_tilde: float         # min obstacle clearance D~ so far
    timed_out: bool
    infeasible_steps: int


@dataclass
class EpisodeLog:
    seed: int
    strategy: str
    steps: list
    min_d_tilde: float
    visibility_checked: int    # focus-strategy steps with ||p_err|| > 0.5
    visibility_ok: int         # ... of those, all d~_v >= -1e-3
    infeasible_steps: int
    aborted: bool

    def final(self) -> StepRecord:
        return self.steps[-1]


# ---------------------------------------------------------------------------
# scene construction


def _fill_box(occ, origin, res, center, half, z0, z1):
    lo = np.floor((np.array([center[0] - half[0], center[1] - half[1], z0])
                   - origin) / res).astype(int)
    hi = np.ceil((np.array([center[0] + half[0], center[1] + half[1], z1])
                  - origin) / res).astype(int)
    lo = np.clip(lo, 0, occ.shape)
    hi = np.clip(hi, 0, occ.shape)
    occ[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True


def _fill_cylinder(occ, origin, res, center, radius, z0, z1):
    i0 = max(int((center[0] - radius - origin[0]) / res) - 1, 0)
    i1 = min(int((center[0] + radius - origin[0]) / res) + 2, occ.shape[0])
    j0 = max(int((center[1] - radius - origin[1]) / res) - 1, 0)
    j1 = min(int((center[1] + radius - origin[1]) / res) + 2, occ.shape[1])
    k0 = max(int((z0 - origin[2]) / res), 0)
    k1 = min(int(np.ceil((z1 - origin[2]) / res)), occ.shape[2])
    if i1 <= i0 or j1 <= j0 or k1 <= k0:
        return
    xs = origin[0] + (np.arange(i0, i1) + 0.5) * res
    ys = origin[1] + (np.arange(j0, j1) + 0.5) * res
    mask = ((xs[:, None] - center[0]) ** 2
            + (ys[None, :] - center[1]) ** 2) <= radius ** 2
    occ[i0:i1, j0:j1, k0:k1] |= mask[:, :, None]


def generate_object_voxels(config: ScenarioConfig,
                           rng: np.random.Generator,
                           occ: np.ndarray, origin: np.ndarray) -> float:
    """Union of random primitives around the world center; returns the
    object footprint radius."""
    res = config.resolution
    body_cyl = rng.random() < 0.5
    body_r = rng.uniform(0.45, 0.85)
    body_h = rng.uniform(1.2, 2.2)
    if body_cyl:
        _fill_cylinder(occ, origin, res, (0.0, 0.0), body_r, 0.0, body_h)
    else:
        _fill_box(occ, origin, res, (0.0, 0.0), (body_r, body_r * 0.8),
                  0.0, body_h)
    footprint = body_r if body_cyl else math.hypot(body_r, body_r * 0.8)
    for _ in range(rng.integers(2, 5)):
        ang = rng.uniform(0, 2 * math.pi)
        off = rng.uniform(0.3, 0.9) * body_r
        cx, cy = off * math.cos(ang), off * math.sin(ang)
        r = rng.uniform(0.15, 0.45)
        z0 = rng.uniform(0.0, body_h * 0.6)
        z1 = z0 + rng.uniform(0.3, 1.0)
        if rng.random() < 0.5:
            _fill_cylinder(occ, origin, res, (cx, cy), r, z0, z1)
        else:
            _fill_box(occ, origin, res, (cx, cy), (r, r), z0, z1)
        footprint = max(footprint, math.hypot(cx, cy) + r)
    return footprint


def generate_obstacles(config: ScenarioConfig, rng: np.random.Generator,
                       forbidden: tuple, footprint_radius: float) -> list:
    """Circular obstacle groups with pairwise surface clearance > 2 R_r;
    circles too close to the forbidden cylinder become touching-circle
    walls connected to it. Deterministic per rng state."""
    r_lo, r_hi = config.obstacle_radius
    clearance = 2.0 * footprint_radius
    fx, fy, fr = forbidden
    placed = []          # all circles, for clearance checks
    groups = 0
    attempts_per = 200
    ring_max = config.cylinder_radius + 1.2

    def clear_of_others(c):
        cx, cy, cr = c
        for px, py, pr in placed:
            if math.hypot(cx - px, cy - py) < cr + pr + clearance:
                return False
        return True

    while groups < config.obstacle_count:
        ok = False
        for _ in range(attempts_per):
            radius = rng.uniform(r_lo, r_hi)
            ang = rng.uniform(0, 2 * math.pi)
            rad = rng.uniform(fr + radius + 0.05, ring_max)
            cx = fx + rad * math.cos(ang)
            cy = fy + rad * math.sin(ang)
            cand = (cx, cy, radius)
            if not clear_of_others(cand):
                continue
            gap = math.hypot(cx - fx, cy - fy) - fr - radius
            group = [cand]
            if gap < clearance:
                # wall: chain of touching circles from the candidate to the
                # cylinder surface
                ux, uy = (fx - cx) / math.hypot(fx - cx, fy - cy), \
                         (fy - cy) / math.hypot(fx - cx, fy - cy)
                d = 2.0 * radius
                while gap - (d - 2.0 * radius) > 0:
                    group.append((cx + ux * d, cy + uy * d, radius))
                    d += 2.0 * radius
            placed.extend(group)
            ok = True
            break
        if not ok:
            log.warning("obstacle placement exhausted after %d groups",
                        groups)
            break
        groups += 1
    return placed


def build_scene(config: ScenarioConfig,
                rng: np.random.Generator) -> vw.GroundTruthScene:
    res = config.resolution
    origin = np.asarray(config.world_min, dtype=float)
    shape = tuple(np.ceil((np.asarray(config.world_max) - origin)
                          / res).astype(int))
    occ = np.zeros(shape, dtype=bool)
    if config.object_file:
        pts = np.loadtxt(config.object_file, ndmin=2)
        idx = np.floor((pts[:, :3] - origin) / res).astype(int)
        valid = np.all((idx >= 0) & (idx < np.array(shape)), axis=1)
        occ[tuple(idx[valid].T)] = True
        footprint = float(np.max(np.hypot(pts[:, 0], pts[:, 1]), initial=0.5))
    else:
        footprint = generate_object_voxels(config, rng, occ, origin)
    forbidden_r = config.forbidden_radius
    if forbidden_r is None:
        forbidden_r = footprint + 0.5
    forbidden = (0.0, 0.0, forbidden_r)
    obstacles = generate_obstacles(config, rng, forbidden,
                                   kin.default_robot_model().footprint_radius)
    half = np.array(config.box_size) / 2.0
    box = (np.array([-half[0], -half[1], 0.0]),
           np.array([half[0], half[1], config.box_size[2]]))
    return vw.GroundTruthScene(occ=occ, origin=origin, resolution=res,
                               bounding_box=box,
                               forbidden_cylinder=forbidden,
                               obstacles=obstacles)


def reference_cloud(scene: vw.GroundTruthScene) -> np.ndarray:
    """Centers of the object's surface voxels (cells with an empty
    6-neighbor), the ground-truth cloud for the coverage metric."""
    occ = scene.occ
    interior = np.ones_like(occ)
    interior[1:] &= occ[:-1]
    interior[:-1] &= occ[1:]
    interior[:, 1:] &= occ[:, :-1]
    interior[:, :-1] &= occ[:, 1:]
    interior[:, :, 1:] &= occ[:, :, :-1]
    interior[:, :, :-1] &= occ[:, :, 1:]
    surface = occ & ~interior
    idx = np.argwhere(surface)
    return scene.origin + (idx + 0.5) * scene.resolution


# ---------------------------------------------------------------------------
# episode


def _angle_between(a, b) -> float:
    c = float(np.clip(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)),
                      -1.0, 1.0))
    return math.acos(c)


def run_episode(config: ScenarioConfig) -> EpisodeLog:
    rng = np.random.default_rng(config.seed)
    scene = build_scene(config, rng)
    model = (kin.load_robot_model(config.robot_file) if config.robot_file
             else kin.default_robot_model())
    occ_map = vw.OccupancyMap.for_scene(scene)
    ref_cloud = reference_cloud(scene)
    cyl_center = np.array([0.0, 0.0, config.box_size[2] / 2.0])
    local_aim = np.array([0.0, 0.0, config.local_aim_height])

    candidates = nbv.generate_candidates(
        cyl_center, radius=config.cylinder_radius,
        n_pos=config.n_positions, view_height=config.view_height)
    scorer = nbv.RearSideScorer(occ_map, fov=config.fov, d_max=config.d_max)

    params = replace(config.control, fov=config.fov)
    obstacles = list(scene.obstacles) + [scene.forbidden_cylinder]

    # start on the candidate ring, at the first azimuth whose footprint
    # clears every obstacle (the zero azimuth can land inside one)
    start_r = config.cylinder_radius + 0.6
    for k in range(config.n_positions):
        phi = 2.0 * math.pi * k / config.n_positions
        base_xy = (start_r * math.cos(phi), start_r * math.sin(phi))
        d_start, _, _ = ctl.obstacle_distances(base_xy, obstacles,
                                               model.footprint_radius)
        if d_start.min() >= 0.05:
            break
    q = kin.Configuration(base=(base_xy[0], base_xy[1], phi + math.pi),
                          arm=kin.home_configuration().arm.copy())

    # initial measurement so RSV scoring has occupied surface to work from
    tv = kin.task_vector(model, q)
    scan = vw.simulate_depth_scan(scene, tv.p, nbv._look_rotation(tv.l),
                                  fov=config.fov, grid=config.sensor_grid,
                                  d_max=config.d_max)
    vw.integrate_scan(occ_map, scan, d_max=config.d_max)

    visited = set()
    focus_state = None       # persists across legs: anchors carry over
    steps: list[StepRecord] = []
    sim_time = 0.0
    plan_time = 0.0
    plan_rays = 0
    min_d_tilde = math.inf
    vis_checked = 0
    vis_ok = 0
    infeasible_total = 0
    aborted = False

    for step_no in range(1, config.n_nbv + 1):
        try:
            target = nbv.select_nbv(occ_map, candidates, visited,
                                    scorer=scorer)
        except nbv.EpisodeComplete:
            break
        visited.add(target.id)
        x_d = np.concatenate([target.position, target.direction])

        rrt_path = None
        local_target = None
        # alternate plain path waypoints with sampled detour views so the
        # base always returns to the collision-free corridor between
        # detours; chasing two successive off-path views can wedge the
        # controller against clutter the path avoids. Nodes are followed
        # strictly in order (node_idx), never by nearest-node lookup: the
        # nearest node can sit across an impassable wall.
        local_on_path = False
        node_idx = 1
        if config.strategy == "sampling":
            t0 = time.perf_counter()
            tree = smp.build_rrt_star(
                np.asarray(q.base[:2]), target.position[:2],
                scene.obstacles, scene.forbidden_cylinder,
                config.rrt, rng)
            rrt_path = smp.path_waypoints(tree.path,
                                          config.rrt.waypoint_stride)
            plan_time += time.perf_counter() - t0
            plan_rays += len(tree.nodes)

        leg_steps = 0
        max_steps = int(config.leg_timeout / config.dt)
        infeasible_streak = 0
        timed_out = False

        while True:
            tv = kin.task_vector(model, q)

            if config.strategy == "focus":
                # the slack weight already de-prioritizes visibility near
                # the goal; drop the rows entirely inside the final 0.5 m
                # so docking is a pure tracking problem
                if np.linalg.norm(tv.p - target.position) > 0.5:
                    t0 = time.perf_counter()
                    new_state = fp.update_focus(
                        focus_state, tv.p, occ_map, cyl_center,
                        recompute_threshold=config.focus_threshold,
                        focus_distance=config.focus_distance,
                        k=config.focus_k, max_dist=config.d_max,
                        box=scene.bounding_box, camera_axis=tv.l)
                    if new_state is not focus_state:
                        plan_time += time.perf_counter() - t0
                        plan_rays += config.focus_k ** 2
                    focus_state = new_state
                    focus_point = focus_state.point
                else:
                    focus_point = None
                step_xd = x_d
            elif config.strategy == "sampling":
                focus_point = None
                budget = int(config.local_view_budget * max_steps)
                if leg_steps == budget and local_target is not target:
                    local_target = None    # abandon the in-progress detour
                if local_target is None:
                    if leg_steps >= budget or not local_on_path:
                        # regain the corridor (or, past the detour budget,
                        # follow the remaining waypoints straight in)
                        view, _ = smp.path_node_target(
                            rrt_path, np.asarray(q.base[:2]),
                            config.view_height, local_aim, nbv_view=target,
                            node_idx=node_idx)
                        local_on_path = True
                    else:
                        t0 = time.perf_counter()
                        view, _ = smp.next_local_target(
                            rrt_path, occ_map, np.asarray(q.base[:2]),
                            config.rrt, rng, config.view_height, local_aim,
                            fov=config.fov, d_max=config.d_max,
                            nbv_view=target, box=scene.bounding_box,
                            obstacles=scene.obstacles, node_idx=node_idx)
                        plan_time += time.perf_counter() - t0
                        if view is not target:
                            plan_rays += config.rrt.views_per_node * 32 * 24
                        local_on_path = False
                    local_target = view
                step_xd = np.concatenate([local_target.position,
                                          local_target.direction])
            else:
                focus_point = None
                step_xd = x_d

            qdot, info = ctl.control_step(model, q, step_xd, focus_point,
                                          obstacles, params)
            if info["status"] != "optimal":
                infeasible_streak += 1
                infeasible_total += 1
                if infeasible_streak > config.infeasible_abort:
                    aborted = True
                    break
            else:
                infeasible_streak = 0

            if info["D_tilde"] is not None:
                min_d_tilde = min(min_d_tilde, info["D_tilde"])
            if config.strategy == "focus" and info["d_v"] is not None:
                if np.linalg.norm(info["p_err"]) > 0.5:
                    vis_checked += 1
                    if np.all(info["d_v"] >= -1e-3):
                        vis_ok += 1

            q = kin.integrate(q, qdot, config.dt)
            sim_time += config.dt
            leg_steps += 1

            if leg_steps % config.scan_every == 0:
                tv = kin.task_vector(model, q)
                scan = vw.simulate_depth_scan(
                    scene, tv.p, nbv._look_rotation(tv.l), fov=config.fov,
                    grid=config.sensor_grid, d_max=config.d_max)
                vw.integrate_scan(occ_map, scan, d_max=config.d_max)

            # arrival / waypoint switching
            tv = kin.task_vector(model, q)
            if config.strategy == "sampling" and local_target is not target:
                lt_pos = local_target.position
                if (np.linalg.norm(tv.p - lt_pos) < config.waypoint_pos_tol
                        and _angle_between(tv.l, local_target.direction)
                        < config.waypoint_ang_tol):
                    # a finished detour (or, past the budget, a reached
                    # waypoint) moves the corridor position forward
                    if not local_on_path or leg_steps >= budget:
                        node_idx += 1
                    local_target = None      # pick the next one
                    continue
            p_err = np.linalg.norm(tv.p - target.position)
            ang = _angle_between(tv.l, target.direction)
            if p_err < config.arrival_pos_tol and ang < config.arrival_ang_tol:
                break
            if leg_steps >= max_steps:
                timed_out = True
                break

        # measurement + metrics at the NBV (or where the leg ended)
        tv = kin.task_vector(model, q)
        scan = vw.simulate_depth_scan(scene, tv.p, nbv._look_rotation(tv.l),
                                      fov=config.fov,
                                      grid=config.sensor_grid,
                                      d_max=config.d_max)
        vw.integrate_scan(occ_map, scan, d_max=config.d_max)

        cloud = mx.reconstruct_cloud(occ_map)
        cov = mx.coverage(cloud, ref_cloud)
        ent = vw.total_entropy(occ_map, scene.bounding_box)
        steps.append(StepRecord(
            step=step_no, nbv_id=target.id, coverage=cov, entropy=ent,
            sim_time=sim_time, plan_time=plan_time, plan_rays=plan_rays,
            min_d_tilde=(min_d_tilde if math.isfinite(min_d_tilde)
                         else float("nan")),
            timed_out=timed_out, infeasible_steps=infeasible_total))
        if aborted:
            break

    return EpisodeLog(seed=config.seed, strategy=config.strategy,
                      steps=steps, min_d_tilde=min_d_tilde,
                      visibility_checked=vis_checked, visibility_ok=vis_ok,
                      infeasible_steps=infeasible_total, aborted=aborted)
