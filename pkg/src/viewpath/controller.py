"""Per-step whole-body QP controller.

Tracks a desired camera position/direction while enforcing: a softmin
obstacle vector-field inequality on the base, a circulation constraint near
obstacles, velocity and arm joint-limit bounds, and (optionally) a
slack-relaxed visibility constraint that keeps a focus point inside the
camera FoV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kinematics as kin
from . import visibility as vis
from .qp import QpProblem, QpResult, solve_qp

N_V = 4  # four FoV planes

# circulation generator: maps the distance gradient to a planar tangent
OMEGA = np.array([
    [0.0, 1.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0],
])

# minimum slack-weight so the kappa block stays positive definite
LAMBDA_KAPPA_FLOOR = 1e-9


@dataclass(frozen=True)
class ControlParams:
    lam: float = 5.0            # task gain
    lam_q: float = 0.01         # damping
    alpha: float = 40.0         # slack-weight scale
    gamma: float = 1.0          # slack-weight exponent
    lam_d: float = 1.0          # obstacle VFI gain
    lam_v: float = 10.0         # visibility VFI gain
    lam_phi: float = 1.0        # joint-limit gain
    b: float = 0.044            # circulation speed factor (m/s)
    d0: float = 0.14            # circulation activation distance (m)
    delta: float = 0.05         # softmin margin (m)
    h: float = 0.03             # softmin sharpness
    d_th: float = vis.D_TH_DEFAULT
    # extra margin the QP enforces beyond d_th, so the closed-loop
    # equilibrium settles strictly inside the threshold instead of
    # hovering a few millimetres outside it
    vis_margin: float = 0.02
    fov: tuple = vis.FOV_DEFAULT


def softmin_distance(distances: np.ndarray, h: float, delta: float) -> float:
    """Smooth minimum minus the safety margin delta (overflow-safe)."""
    d = np.asarray(distances, dtype=float)
    dmin = d.min()
    return float(dmin - h * math.log(np.mean(np.exp(-(d - dmin) / h))) - delta)


def softmin_weights(distances: np.ndarray, h: float) -> np.ndarray:
    d = np.asarray(distances, dtype=float)
    e = np.exp(-(d - d.min()) / h)
    return e / e.sum()


def softmin_gradient(distances: np.ndarray, gradients: np.ndarray,
                     h: float) -> np.ndarray:
    """Gradient of the softmin: exp-weighted average of per-obstacle grads."""
    w = softmin_weights(distances, h)
    return w @ np.asarray(gradients, dtype=float)


def obstacle_distances(base_position: np.ndarray, obstacles,
                       footprint_radius: float):
    """Signed clearance and gradient per circular obstacle.

    obstacles: iterable of (cx, cy, radius). Gradient is the planar unit
    vector from the obstacle center to the base (zero theta component);
    coincident centers give a zero gradient with degenerate=True.
    """
    bx, by = float(base_position[0]), float(base_position[1])
    dists, grads, degenerate = [], [], False
    for cx, cy, radius in obstacles:
        dx, dy = bx - cx, by - cy
        dist = math.hypot(dx, dy)
        d_safe = footprint_radius + radius
        dists.append(dist - d_safe)
        if dist < 1e-12:
            grads.append(np.zeros(3))
            degenerate = True
        else:
            grads.append(np.array([dx / dist, dy / dist, 0.0]))
    return np.array(dists), np.array(grads), degenerate


def circulation_tangent(grad: np.ndarray, eps: float = 1e-9):
    """Unit tangent T = Omega g / ||Omega g||; None when g is parallel to z."""
    v = OMEGA @ np.asarray(grad, dtype=float)
    norm = np.linalg.norm(v)
    if norm <= eps:
        return None
    return v / norm


def beta(d_tilde: float, b: float, d0: float) -> float:
    """Circulation activation speed: positive inside the activation zone."""
    return b * (1.0 - d_tilde / d0)


def slack_weight(p_err: np.ndarray, alpha: float, gamma: float) -> float:
    """Distance-dependent visibility weight: vanishes at the goal."""
    return alpha * float(np.linalg.norm(p_err)) ** gamma


def build_qp(model: kin.RobotModel, q: np.ndarray, x_d: np.ndarray,
             focus_point, obstacles, params: ControlParams):
    """Assemble the per-step QP over (qdot in R8 [, kappa in R4]).

    Returns (QpProblem, info) where info carries diagnostics used by
    control_step (softmin distance, visibility distances, slack weight).
    """
    q = np.asarray(q, dtype=float)
    p, R, l, J_p, J_l, J_w = kin.fk_jacobians(model, q)
    x = np.concatenate([p, l])
    x_err = x - np.asarray(x_d, dtype=float)

    n = kin.N_TOTAL
    has_focus = focus_point is not None
    dim = n + N_V if has_focus else n

    J = np.vstack([J_p, J_l])
    H = np.zeros((dim, dim))
    g = np.zeros(dim)
    H[:n, :n] = 2.0 * (J.T @ J + params.lam_q * np.eye(n))
    g[:n] = 2.0 * params.lam * (J.T @ x_err)

    info = {
        "p_err": x_err[:3],
        "l_err": x_err[3:],
        "D_tilde": None,
        "d_v": None,
        "lam_kappa": None,
        "circulation": False,
        "full_stop": False,
    }

    rows_a, rows_b = [], []

    def add_row(a, ub):
        rows_a.append(a)
        rows_b.append(ub)

    # (i)-(ii) obstacle VFI + circulation on the base coordinates
    if len(obstacles) > 0:
        d_i, grad_i, degenerate = obstacle_distances(
            q[:2], obstacles, model.footprint_radius)
        d_tilde = softmin_distance(d_i, params.h, params.delta)
        grad = softmin_gradient(d_i, grad_i, params.h)
        info["D_tilde"] = d_tilde
        if degenerate:
            # coincident centers: full stop of the base this step
            info["full_stop"] = True
            for k in range(2):
                a = np.zeros(dim)
                a[k] = 1.0
                add_row(a.copy(), 0.0)
                add_row(-a, 0.0)
        else:
            a = np.zeros(dim)
            a[:3] = -grad
            add_row(a, params.lam_d * d_tilde)
            tangent = circulation_tangent(grad)
            if tangent is not None:
                a = np.zeros(dim)
                a[:3] = -tangent
                add_row(a, -beta(d_tilde, params.b, params.d0))
                info["circulation"] = True

    # (iii) velocity box
    for k in range(n):
        a = np.zeros(dim)
        a[k] = 1.0
        add_row(a.copy(), model.qdot_lim[k])
        add_row(-a, model.qdot_lim[k])

    # (iv) arm joint-limit rows, as printed:
    #   -lam_phi (q - q_l) <= qdot_arm <= -lam_phi (q - q_u)
    q_arm = q[3:]
    for k in range(kin.N_ARM):
        a = np.zeros(dim)
        a[3 + k] = 1.0
        add_row(a.copy(), -params.lam_phi * (q_arm[k] - model.q_u[k]))
        add_row(-a, params.lam_phi * (q_arm[k] - model.q_l[k]))

    # (v)-(vi) slack-relaxed visibility rows
    if has_focus:
        planes = vis.fov_planes(p, R, params.fov)
        d_v = vis.plane_distances(planes, focus_point) - params.d_th
        J_v = vis.visibility_jacobian(model, q, focus_point, params.fov)
        lam_kappa = max(slack_weight(x_err[:3], params.alpha, params.gamma),
                        LAMBDA_KAPPA_FLOOR)
        H[n:, n:] = 2.0 * lam_kappa * np.eye(N_V)
        info["d_v"] = d_v
        info["lam_kappa"] = lam_kappa
        for i in range(N_V):
            a = np.zeros(dim)
            a[:n] = -J_v[i]
            a[n + i] = -1.0
            add_row(a, params.lam_v * (d_v[i] - params.vis_margin))
        for i in range(N_V):
            a = np.zeros(dim)
            a[n + i] = -1.0
            add_row(a, 0.0)

    A = np.array(rows_a) if rows_a else np.zeros((0, dim))
    b = np.array(rows_b) if rows_b else np.zeros(0)
    return QpProblem(H=H, g=g, A=A, b=b), info


def control_step(model: kin.RobotModel, q: kin.Configuration,
                 x_d: np.ndarray, focus_point, obstacles,
                 params: ControlParams):
    """Build and solve the QP, clamp to velocity limits.

    Returns (qdot, diagnostics); on an infeasible QP qdot is zero and
    diagnostics["status"] records it.
    """
    qa = q.as_array() if isinstance(q, kin.Configuration) else np.asarray(q)
    problem, info = build_qp(model, qa, x_d, focus_point, obstacles, params)
    result = solve_qp(problem)
    if result.status != "optimal":
        qdot = np.zeros(kin.N_TOTAL)
    else:
        qdot = np.clip(result.x[:kin.N_TOTAL],
                       -model.qdot_lim, model.qdot_lim)
    info["status"] = result.status
    info["kappa"] = result.x[kin.N_TOTAL:] if focus_point is not None else None
    return qdot, info
