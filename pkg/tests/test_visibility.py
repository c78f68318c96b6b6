"""FoV plane geometry and the visibility Jacobian."""

import math

import numpy as np
import pytest

from viewpath import kinematics as kin
from viewpath import visibility as vis


def random_rotation(rng):
    a = rng.normal(size=(3, 3))
    q, _ = np.linalg.qr(a)
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


class TestPlaneGeometry:
    def test_normals_are_unit(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            planes = vis.fov_planes(rng.normal(size=3), random_rotation(rng))
            np.testing.assert_allclose(
                np.linalg.norm(planes.normals, axis=1), 1.0, atol=1e-12)

    def test_on_axis_point_distances(self):
        # forward = +x; on-axis point at range d has d_v = d*sin(half-angle)
        planes = vis.fov_planes(np.zeros(3), np.eye(3))
        d = 2.0
        dv = vis.plane_distances(planes, np.array([d, 0.0, 0.0]))
        expected = d * np.sin([math.radians(37), math.radians(37),
                               math.radians(30), math.radians(30)])
        np.testing.assert_allclose(dv, expected, atol=1e-12)

    def test_point_behind_camera_is_outside(self):
        planes = vis.fov_planes(np.zeros(3), np.eye(3))
        dv = vis.plane_distances(planes, np.array([-1.0, 0.0, 0.0]))
        assert dv.max() < 0

    def test_threshold_to_min_range_ratio(self):
        # with d_th = 0.75 an on-axis point satisfies all four margins only
        # beyond d_th/sin(fov_v/2) = 1.5 m; the threshold is half that range
        d_min = vis.D_TH_DEFAULT / math.sin(0.5 * vis.FOV_DEFAULT[1])
        assert 0.49 <= vis.D_TH_DEFAULT / d_min <= 0.52
        planes = vis.fov_planes(np.zeros(3), np.eye(3))
        just_in = vis.plane_distances(
            planes, [d_min + 1e-6, 0, 0]) - vis.D_TH_DEFAULT
        just_out = vis.plane_distances(
            planes, [d_min - 1e-3, 0, 0]) - vis.D_TH_DEFAULT
        assert just_in.min() >= 0
        assert just_out.min() < 0

    def test_rigid_motion_equivariance(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            p_c = rng.normal(size=3)
            R = random_rotation(rng)
            p_f = p_c + rng.normal(size=3)
            d0 = vis.plane_distances(vis.fov_planes(p_c, R), p_f)
            Q = random_rotation(rng)
            t = rng.normal(size=3)
            d1 = vis.plane_distances(
                vis.fov_planes(Q @ p_c + t, Q @ R), Q @ p_f + t)
            np.testing.assert_allclose(d1, d0, atol=1e-10)


class TestVisibilityJacobian:
    def test_matches_finite_differences(self):
        model = kin.default_robot_model()
        rng = np.random.default_rng(2)
        h = 1e-6
        for _ in range(30):
            q = rng.uniform(-1.0, 1.0, size=8)
            p_f = rng.uniform(-1.5, 1.5, size=3) + np.array([0, 0, 1.0])
            J = vis.visibility_jacobian(model, q, p_f)
            assert J.shape == (4, 8)
            J_fd = np.zeros((4, 8))
            for j in range(8):
                qp, qm = q.copy(), q.copy()
                qp[j] += h
                qm[j] -= h
                J_fd[:, j] = (vis.visibility_distances(model, qp, p_f)
                              - vis.visibility_distances(model, qm, p_f)) / (2 * h)
            assert np.abs(J - J_fd).max() < 1e-5

    def test_thresholded_distances_shift_by_d_th(self):
        model = kin.default_robot_model()
        q = np.zeros(8)
        p_f = np.array([2.0, 0.3, 1.0])
        d0 = vis.visibility_distances(model, q, p_f, d_th=0.0)
        d1 = vis.visibility_distances(model, q, p_f, d_th=0.75)
        np.testing.assert_allclose(d0 - d1, 0.75, atol=1e-12)
