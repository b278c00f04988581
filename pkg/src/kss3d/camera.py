"""Weak-perspective camera and the projection from 3D to 2D shape space."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProjection
from .kendall import align, angle, shape_distance, well_position, well_position_jvp

PROJECTION_TOL = 1e-10


@dataclass(frozen=True)
class CameraPose:
    """Weak-perspective camera ``W = alpha * (R X)[:2] + t``."""
    rotation: np.ndarray
    alpha: float = 1.0
    t: np.ndarray = None

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        if R.shape != (3, 3):
            raise ValueError("rotation must be 3 x 3")
        if (np.abs(R @ R.T - np.eye(3)).max() > 1e-10
                or abs(np.linalg.det(R) - 1.0) > 1e-10):
            raise ValueError("rotation must be orthogonal with determinant +1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        t = np.zeros(2) if self.t is None else np.asarray(self.t, dtype=float).reshape(2)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "t", t)

    @property
    def stiefel(self):
        """The projecting rows of the rotation, as a 3 x 2 Stiefel point."""
        return self.rotation[:2].T.copy()

    @classmethod
    def from_stiefel(cls, Q, alpha=1.0, t=None):
        return cls(rotation_from_stiefel(Q), alpha, t)


def is_stiefel(Q, tol=1e-10) -> bool:
    Q = np.asarray(Q)
    return Q.shape == (3, 2) and np.abs(Q.T @ Q - np.eye(2)).max() <= tol


def rotation_from_stiefel(Q) -> np.ndarray:
    """Complete a 3 x 2 Stiefel point to a rotation whose first rows are ``Q^T``."""
    Q = np.asarray(Q, dtype=float)
    return np.vstack([Q[:, 0], Q[:, 1], np.cross(Q[:, 0], Q[:, 1])])


def weak_perspective_project(X, cam: CameraPose) -> np.ndarray:
    """Project a 3 x k configuration to a 2 x k image."""
    X = np.asarray(X, dtype=float)
    return cam.alpha * (cam.rotation[:2] @ X) + cam.t[:, None]


def unique_representative(p, ref) -> np.ndarray:
    """Representative of the shape of ``p`` well-positioned to ``ref``."""
    return well_position(p, ref)


def kendall_project(p, Q, ref) -> np.ndarray:
    """Project the shape of ``p`` by the Stiefel point ``Q``.

    Returns the unit-norm 2 x k pre-shape ``Q^T P / |Q^T P|``, where ``P`` is
    the representative of ``p`` well-positioned to ``ref``.

    Raises:
        DegenerateProjection: the projected configuration has norm <= 1e-10.
    """
    P = unique_representative(p, ref)
    Z = np.asarray(Q, dtype=float).T @ P
    nz = np.linalg.norm(Z)
    if nz <= PROJECTION_TOL:
        raise DegenerateProjection(f"projected configuration has norm {nz:.3g}")
    return Z / nz


def reprojection_error(p, Q, W, ref) -> float:
    """Squared 2D shape distance between ``W`` and the projection of ``p``."""
    return shape_distance(W, kendall_project(p, Q, ref)) ** 2


def _distance_sq_and_grad(W, Z):
    """Squared shape distance from ``W`` to ``Z/|Z|`` and its gradient in ``Z``."""
    nz = np.linalg.norm(Z)
    if nz <= PROJECTION_TOL:
        raise DegenerateProjection(f"projected configuration has norm {nz:.3g}")
    Zn = Z / nz
    a = align(W, Zn)
    theta = angle(W, a.rotation @ Zn)
    # d(theta^2)/ds with s = cos(theta) is -2 theta / sin(theta), -> -2 at 0
    factor = -2.0 if theta < 1e-8 else -2.0 * theta / np.sin(theta)
    G = a.rotation.T @ W
    gZ = (G - Zn * np.vdot(Zn, G)) / nz
    return theta ** 2, factor * gZ


def reprojection_error_grad_Q(P, Q, W):
    """Objective and Euclidean gradient w.r.t. ``Q`` for a fixed 3D representative ``P``."""
    f, gZ = _distance_sq_and_grad(W, Q.T @ P)
    return f, P @ gZ.T


def reprojection_error_jvp(P, dP, Q, W):
    """Objective and its derivatives along tangents ``dP`` of the representative."""
    f, gZ = _distance_sq_and_grad(W, Q.T @ P)
    dZ = np.einsum("ji,djk->dik", Q, dP)
    return f, np.einsum("ik,dik->d", gZ, dZ)


def representative_jvp(mu, dmu, ref):
    """``unique_representative`` and its derivatives along ``dmu``."""
    return well_position_jvp(mu, ref, dmu, np.zeros_like(dmu))
