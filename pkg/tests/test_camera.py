import numpy as np
import pytest

from conftest import random_preshape, random_rotation
from kss3d.camera import (CameraPose, is_stiefel, kendall_project, reprojection_error,
                          reprojection_error_grad_Q, rotation_from_stiefel,
                          unique_representative, weak_perspective_project)
from kss3d.errors import DegenerateProjection
from kss3d.kendall import shape_distance, to_preshape, well_position
from kss3d.solver import random_stiefel, retract, tangent_projection

I2 = np.eye(3)[:, :2]


def test_identity_camera(rng):
    X = rng.standard_normal((3, 7))
    assert np.allclose(weak_perspective_project(X, CameraPose(np.eye(3))), X[:2])


def test_translation(rng):
    X = rng.standard_normal((3, 7))
    t = np.array([2.0, -1.0])
    W = weak_perspective_project(X, CameraPose(np.eye(3), 1.0, t))
    assert np.allclose(W - X[:2], t[:, None])


def test_preshape_ignores_scale_and_translation(rng):
    X = rng.standard_normal((3, 10))
    R = random_rotation(rng)
    a = weak_perspective_project(X, CameraPose(R, 0.7, [1.0, 2.0]))
    b = weak_perspective_project(X, CameraPose(R, 1.4, [-3.0, 0.5]))
    assert np.abs(to_preshape(a) - to_preshape(b)).max() < 1e-12


def test_pose_validation():
    with pytest.raises(ValueError):
        CameraPose(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        CameraPose(np.eye(3), alpha=0.0)


def test_stiefel_completion(rng):
    Q = random_stiefel(rng)
    assert is_stiefel(Q)
    R = rotation_from_stiefel(Q)
    assert np.allclose(R @ R.T, np.eye(3)) and np.isclose(np.linalg.det(R), 1)
    assert np.allclose(CameraPose.from_stiefel(Q).stiefel, Q)


class TestRepresentative:
    def test_reference_itself(self, rng):
        ref = random_preshape(rng)
        assert np.allclose(unique_representative(ref, ref), ref, atol=1e-12)

    def test_rotated_reference(self, rng):
        ref = random_preshape(rng)
        assert np.abs(unique_representative(random_rotation(rng) @ ref, ref) - ref).max() < 1e-9

    def test_well_positioned(self, rng):
        ref, p = random_preshape(rng), random_preshape(rng)
        P = unique_representative(p, ref)
        A = P @ ref.T
        assert np.linalg.norm(A - A.T) < 1e-9
        assert np.vdot(P, ref) == pytest.approx(np.cos(shape_distance(p, ref)), abs=1e-12)


class TestKendallProject:
    def test_planar(self, rng):
        xy = rng.standard_normal((2, 8))
        p = to_preshape(np.vstack([xy, np.zeros(8)]))
        assert shape_distance(kendall_project(p, I2, p), to_preshape(xy)) < 1e-12

    def test_quotient_well_defined(self, rng):
        p, ref = random_preshape(rng), random_preshape(rng)
        Q = random_stiefel(rng)
        a = kendall_project(p, Q, ref)
        b = kendall_project(random_rotation(rng) @ p, Q, ref)
        assert np.abs(a - b).max() < 1e-9

    def test_consistent_with_weak_perspective(self, rng):
        p, ref = random_preshape(rng), random_preshape(rng)
        Q = random_stiefel(rng)
        cam = CameraPose.from_stiefel(Q, 3.2, [0.4, -7.0])
        W = weak_perspective_project(well_position(p, ref), cam)
        assert shape_distance(kendall_project(p, Q, ref), to_preshape(W)) < 1e-12

    def test_unit_norm_and_centered(self, rng):
        Z = kendall_project(random_preshape(rng), random_stiefel(rng), random_preshape(rng))
        assert np.isclose(np.linalg.norm(Z), 1) and np.abs(Z.sum(axis=1)).max() < 1e-14

    @pytest.mark.filterwarnings("ignore::kss3d.errors.NonUniqueAlignment")
    def test_degenerate(self):
        # all landmarks on the viewing axis
        p = to_preshape(np.vstack([np.zeros(5), np.zeros(5), np.arange(5.0)]))
        with pytest.raises(DegenerateProjection):
            kendall_project(p, I2, p)


class TestReprojectionError:
    def test_zero_at_projection(self, rng):
        p, ref = random_preshape(rng), random_preshape(rng)
        Q = random_stiefel(rng)
        assert reprojection_error(p, Q, kendall_project(p, Q, ref), ref) < 1e-12

    def test_invariant_to_2d_rotation(self, rng):
        p, ref, W = random_preshape(rng), random_preshape(rng), random_preshape(rng, m=2)
        Q = random_stiefel(rng)
        c, s = np.cos(0.8), np.sin(0.8)
        R2 = np.array([[c, -s], [s, c]])
        assert np.isclose(reprojection_error(p, Q, W, ref), reprojection_error(p, Q, R2 @ W, ref),
                          atol=1e-14)

    def test_first_order_in_geodesic_step(self, rng):
        p, ref, W = random_preshape(rng), random_preshape(rng), random_preshape(rng, m=2)
        Q = random_stiefel(rng)
        P = well_position(p, ref)
        _, G = reprojection_error_grad_Q(P, Q, W)
        xi = tangent_projection(Q, rng.standard_normal((3, 2)))
        xi /= np.linalg.norm(xi)
        eps = 1e-3
        fp = reprojection_error(p, retract(Q, eps * xi), W, ref)
        fm = reprojection_error(p, retract(Q, -eps * xi), W, ref)
        assert abs((fp - fm) / (2 * eps) - np.vdot(G, xi)) < 1e-5
        assert abs(fp - reprojection_error(p, Q, W, ref)) < 10 * eps
