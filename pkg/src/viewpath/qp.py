"""Small dense convex QP solver.

Solves min 0.5 x'Hx + g'x subject to Ax <= b with H symmetric positive
definite, via an infeasible-start primal-dual interior-point iteration.
Everything is plain numpy with no randomness, so identical inputs give
identical solutions bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STAT_TOL = 1e-9
MAX_ITERS = 60


@dataclass(frozen=True)
class QpProblem:
    H: np.ndarray            # (n, n) symmetric PD
    g: np.ndarray            # (n,)
    A: np.ndarray            # (m, n), m may be 0
    b: np.ndarray            # (m,)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class QpResult:
    x: np.ndarray
    z: np.ndarray            # dual variables for Ax <= b
    status: str              # "optimal" or "infeasible"
    iterations: int


def solve_qp(problem: QpProblem) -> QpResult:
    H, g, A, b = problem.H, problem.g, problem.A, problem.b
    n, m = problem.n, problem.m

    if m == 0:
        x = np.linalg.solve(H, -g)
        return QpResult(x=x, z=np.zeros(0), status="optimal", iterations=0)

    x = np.zeros(n)
    s = np.maximum(b - A @ x, 1.0)
    z = np.ones(m)

    for it in range(1, MAX_ITERS + 1):
        r_d = H @ x + g + A.T @ z
        r_p = A @ x + s - b
        mu = float(s @ z) / m

        if mu < STAT_TOL and np.linalg.norm(r_d, np.inf) < 1e-8 \
                and np.linalg.norm(r_p, np.inf) < 1e-8:
            return QpResult(x=x, z=z, status="optimal", iterations=it)

        sigma = 0.1
        r_c = s * z - sigma * mu
        w = z / s
        M = H + A.T @ (w[:, None] * A)
        rhs = -r_d - A.T @ ((z * r_p - r_c) / s)
        try:
            dx = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            break
        ds = -r_p - A @ dx
        dz = (-r_c - z * ds) / s

        # fraction-to-boundary step keeping s, z strictly positive
        alpha = 1.0
        neg_s = ds < 0
        if np.any(neg_s):
            alpha = min(alpha, float(np.min(-s[neg_s] / ds[neg_s])) * 0.995)
        neg_z = dz < 0
        if np.any(neg_z):
            alpha = min(alpha, float(np.min(-z[neg_z] / dz[neg_z])) * 0.995)

        x = x + alpha * dx
        s = s + alpha * ds
        z = z + alpha * dz

    # Converged duals blow up / primal residual stuck => no feasible point.
    r_p = A @ x + s - b
    if np.linalg.norm(np.maximum(A @ x - b, 0.0), np.inf) > 1e-6:
        return QpResult(x=x, z=z, status="infeasible", iterations=MAX_ITERS)
    return QpResult(x=x, z=z, status="optimal", iterations=MAX_ITERS)
