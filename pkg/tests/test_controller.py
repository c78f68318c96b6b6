"""Whole-body QP controller: softmin distance field, circulation,
constraint assembly, and closed-loop tracking."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from viewpath import kinematics as kin
from viewpath.controller import (
    ControlParams,
    beta,
    build_qp,
    circulation_tangent,
    control_step,
    obstacle_distances,
    slack_weight,
    softmin_distance,
    softmin_gradient,
    softmin_weights,
)

MODEL = kin.default_robot_model()
PARAMS = ControlParams()


class TestSoftmin:
    def test_single_distance_is_exact(self):
        assert softmin_distance(np.array([0.3]), h=0.03, delta=0.05) == \
            pytest.approx(0.25, abs=1e-12)

    @given(st.lists(st.floats(min_value=-1, max_value=3), min_size=1,
                    max_size=8))
    def test_brackets_true_min(self, ds):
        # mean-normalized softmin sits within h*ln(n) above the true min
        d = np.array(ds)
        s = softmin_distance(d, h=0.03, delta=0.05)
        assert d.min() - 0.05 - 1e-12 <= s
        assert s <= d.min() - 0.05 + 0.03 * math.log(len(ds)) + 1e-12

    def test_approaches_min_for_small_h(self):
        d = np.array([0.2, 0.5, 0.9])
        assert softmin_distance(d, h=1e-4, delta=0.0) == \
            pytest.approx(0.2, abs=1e-3)

    def test_weights_sum_to_one_and_favor_nearest(self):
        d = np.array([0.1, 0.5, 0.5])
        w = softmin_weights(d, h=0.03)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert w[0] > w[1] == pytest.approx(w[2], abs=1e-15)

    def test_gradient_is_convex_combination(self):
        d = np.array([0.1, 0.2])
        grads = np.array([[1.0, 0, 0], [0, 1.0, 0]])
        g = softmin_gradient(d, grads, h=0.03)
        w = softmin_weights(d, h=0.03)
        np.testing.assert_allclose(g, w @ grads, atol=1e-12)


class TestObstacleField:
    def test_clearance_and_gradient(self):
        d, g, degenerate = obstacle_distances(
            np.array([1.0, 0.0]), [(0.0, 0.0, 0.3)], footprint_radius=0.25)
        assert not degenerate
        assert d[0] == pytest.approx(1.0 - 0.55, abs=1e-12)
        np.testing.assert_allclose(g[0], [1.0, 0.0, 0.0], atol=1e-12)

    def test_coincident_center_flags_degenerate(self):
        _, g, degenerate = obstacle_distances(
            np.array([0.0, 0.0]), [(0.0, 0.0, 0.3)], footprint_radius=0.25)
        assert degenerate
        np.testing.assert_allclose(g[0], 0.0)

    def test_circulation_tangent_orthogonal_and_planar(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            g = rng.normal(size=3)
            g[2] = 0.0
            if np.linalg.norm(g) < 1e-6:
                continue
            t = circulation_tangent(g)
            assert abs(t @ g) < 1e-12
            assert t[2] == 0.0
            assert np.linalg.norm(t) == pytest.approx(1.0, abs=1e-12)

    def test_vertical_gradient_has_no_tangent(self):
        assert circulation_tangent(np.array([0.0, 0.0, 1.0])) is None

    def test_beta_activation(self):
        b, d0 = 0.044, 0.14
        assert beta(0.0, b, d0) == pytest.approx(b)
        assert beta(d0, b, d0) == pytest.approx(0.0)
        assert beta(0.07, b, d0) == pytest.approx(0.022)


class TestSlackWeight:
    def test_values(self):
        assert slack_weight(np.array([0.5, 0, 0]), alpha=40.0, gamma=1.0) == \
            pytest.approx(20.0)
        assert slack_weight(np.zeros(3), alpha=40.0, gamma=1.0) == 0.0

    @given(st.floats(min_value=0.0, max_value=5.0))
    def test_monotone_in_distance(self, r):
        w1 = slack_weight(np.array([r, 0, 0]), 40.0, 1.0)
        w2 = slack_weight(np.array([r + 0.1, 0, 0]), 40.0, 1.0)
        assert w2 >= w1


class TestQpAssembly:
    def _goal(self, q):
        tv = kin.task_vector(MODEL, kin.Configuration.from_array(q))
        return np.concatenate([tv.p, tv.l])

    def test_row_counts(self):
        q = np.zeros(8)
        x_d = self._goal(q) + 0.1
        # no obstacles, no focus: velocity box (16) + arm limits (10)
        prob, info = build_qp(MODEL, q, x_d, None, [], PARAMS)
        assert prob.A.shape == (26, 8)
        assert info["d_v"] is None and info["D_tilde"] is None
        # one obstacle adds VFI + circulation rows; focus adds 4+4 slack rows
        prob, info = build_qp(MODEL, q, x_d, np.array([2.0, 0, 1.0]),
                              [(3.0, 0.0, 0.3)], PARAMS)
        assert prob.A.shape == (26 + 2 + 8, 12)
        assert info["circulation"]
        assert info["lam_kappa"] > 0

    def test_at_goal_stays_put(self):
        q = np.array([0.2, -0.1, 0.3, 0.1, -0.2, 0.15, 0.05, -0.1])
        qdot, info = control_step(MODEL, q, self._goal(q), None, [], PARAMS)
        assert info["status"] == "optimal"
        assert np.abs(qdot).max() < 1e-6

    def test_respects_velocity_limits(self):
        q = np.zeros(8)
        x_d = self._goal(q) + np.array([3.0, 3.0, 1.0, 0, 0, 0])
        qdot, _ = control_step(MODEL, q, x_d, None, [], PARAMS)
        assert np.all(np.abs(qdot) <= MODEL.qdot_lim + 1e-9)

    def test_obstacle_rows_limit_approach_speed(self):
        # base right next to an obstacle, goal straight through it
        q = np.zeros(8)
        q[0] = -(MODEL.footprint_radius + 0.3 + 0.1)   # 10 cm clearance
        x_d = self._goal(q) + np.array([2.0, 0, 0, 0, 0, 0])
        qdot, info = control_step(MODEL, q, x_d, None, [(0.0, 0.0, 0.3)],
                                  PARAMS)
        d_tilde = info["D_tilde"]
        assert d_tilde == pytest.approx(0.05, abs=2e-2)
        # VFI: approach speed toward the obstacle bounded by lam_d * D~
        assert qdot[0] <= PARAMS.lam_d * d_tilde + 1e-6

    def test_visibility_row_is_slack_relaxed(self):
        # focus point far outside the FoV: rows stay feasible via slack
        q = np.zeros(8)
        x_d = self._goal(q)
        behind = kin.task_vector(
            MODEL, kin.Configuration.from_array(q)).p - np.array([0, 0, 0.5])
        qdot, info = control_step(MODEL, q, x_d, behind, [], PARAMS)
        assert info["status"] == "optimal"
        assert info["d_v"].min() < 0
        assert info["kappa"].max() > 0
        assert info["kappa"].min() >= -1e-9

    def test_visible_focus_needs_no_slack(self):
        q = np.zeros(8)
        tv = kin.task_vector(MODEL, kin.Configuration.from_array(q))
        focus = tv.p + 2.5 * tv.l
        # small tracking error keeps the slack weight strictly positive
        x_d = np.concatenate([tv.p + np.array([0.05, 0.0, 0.0]), tv.l])
        qdot, info = control_step(MODEL, q, x_d, focus, [], PARAMS)
        assert info["status"] == "optimal"
        assert info["d_v"].min() > 0
        assert info["kappa"].max() < 1e-3


class TestClosedLoopTracking:
    def test_exponential_error_decay(self):
        # small initial error so no constraint saturates; the task row
        # enforces x_err_dot = -lam * x_err up to damping
        dt = 1e-3
        lam = PARAMS.lam
        q = kin.Configuration.from_array(
            np.array([0.0, 0.0, 0.0, 0.2, -0.4, 0.3, 0.1, -0.2]))
        tv0 = kin.task_vector(MODEL, q)
        x_d = np.concatenate([tv0.p + np.array([0.03, -0.02, 0.02]), tv0.l])
        err0 = np.linalg.norm(
            np.concatenate([tv0.p, tv0.l]) - x_d)
        t_total = 0.1
        for _ in range(int(t_total / dt)):
            qdot, info = control_step(MODEL, q, x_d, None, [], PARAMS)
            q = kin.integrate(q, qdot, dt)
        tv = kin.task_vector(MODEL, q)
        err = np.linalg.norm(np.concatenate([tv.p, tv.l]) - x_d)
        expected = err0 * math.exp(-lam * t_total)
        assert err == pytest.approx(expected, rel=0.1)

    def test_infeasible_problem_reports_zero_motion(self):
        # base pinned by a degenerate obstacle and dragged by limits is
        # still feasible; force infeasibility with contradictory limits
        bad = ControlParams(lam_phi=1.0)
        model = kin.default_robot_model()
        q = np.zeros(8)
        q[0] = 0.0
        # coincident obstacle center: full-stop rows appear but are feasible
        qdot, info = control_step(model, q, np.ones(6), None,
                                  [(0.0, 0.0, 0.3)], bad)
        assert info["full_stop"]
        assert abs(qdot[0]) < 1e-9 and abs(qdot[1]) < 1e-9
