"""Kendall shape space primitives.

Configurations are stored as ``m x k`` arrays with one landmark per column.
Pre-shapes are plain arrays that are centered and have unit Frobenius norm;
a shape (an SO(m) orbit) is represented by any of its pre-shapes, and nothing
in this module canonicalizes a representative behind the caller's back.
"""
from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

from .errors import (AntipodalShapes, DegenerateConfiguration, NoConvergence,
                     NonUniqueAlignment)

ANTIPODAL_TOL = 1e-6
DEGENERATE_ANGLE = 1e-12
NONUNIQUE_TOL = 1e-9


class Alignment(NamedTuple):
    """Optimal rotation of ``Y`` onto ``X``.

    ``singular_values`` holds the pseudo-singular values of ``Y X^T``, i.e. the
    singular values in decreasing order with the sign of the last one flipped
    when a reflection correction was needed.
    """
    rotation: np.ndarray
    pseudo_singular_sum: float
    singular_values: np.ndarray
    non_unique: bool


def to_preshape(c) -> np.ndarray:
    """Center the landmarks and scale to unit Frobenius norm."""
    c = np.asarray(c, dtype=float)
    if c.ndim != 2:
        raise ValueError(f"expected an m x k matrix, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("configuration contains non-finite entries")
    centered = c - c.mean(axis=1, keepdims=True)
    norm = np.linalg.norm(centered)
    if norm < 1e-12:
        raise DegenerateConfiguration(
            f"centered configuration has norm {norm:.3g}; all landmarks coincide")
    return centered / norm


def _rotation_from_svd(A):
    U, d, Vt = np.linalg.svd(A)
    V = Vt.T
    s = np.ones(len(d))
    if np.linalg.det(V @ U.T) < 0:
        s[-1] = -1.0
    R = (V * s) @ U.T
    return R, d, s, V


def align(X, Y) -> Alignment:
    """Rotation ``R`` maximizing ``<X, R Y>`` over SO(m)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    R, d, s, _ = _rotation_from_svd(Y @ X.T)
    lam = d * s
    non_unique = len(d) > 1 and abs(d[-1] - d[-2]) <= NONUNIQUE_TOL
    return Alignment(R, float(lam.sum()), lam, bool(non_unique))


def angle(X, Y) -> float:
    """Angle between unit-norm matrices, ``arccos <X, Y>`` evaluated stably.

    The half-chord form keeps full relative precision near 0 and pi, where
    ``arccos`` of a rounded inner product loses about half the digits.
    """
    return float(2.0 * np.arctan2(np.linalg.norm(X - Y), np.linalg.norm(X + Y)))


def shape_distance(X, Y) -> float:
    """Geodesic distance between the shapes of two pre-shapes (radians).

    Equals ``arccos`` of the pseudo-singular value sum of ``Y X^T``.
    """
    X = np.asarray(X, dtype=float)
    return angle(X, align(X, Y).rotation @ np.asarray(Y, dtype=float))


def spherical_distance(X, Y) -> float:
    """Great-circle distance between two pre-shapes on the pre-shape sphere."""
    return angle(np.asarray(X, dtype=float), np.asarray(Y, dtype=float))


def well_position(Y, X) -> np.ndarray:
    """Rotate ``Y`` so that it is well-positioned with respect to ``X``.

    The result ``Y'`` satisfies ``Y' X^T`` symmetric and
    ``spherical_distance(X, Y') == shape_distance(X, Y)``.
    """
    a = align(X, Y)
    if a.non_unique:
        warnings.warn("optimal rotation is not unique; alignment is arbitrary",
                      NonUniqueAlignment, stacklevel=2)
    return a.rotation @ np.asarray(Y, dtype=float)


def geodesic(X, Y, t) -> np.ndarray:
    """Point at parameter ``t`` on the shortest geodesic from ``X`` to ``Y``.

    The returned pre-shape lives in the frame of ``X``. ``t`` outside [0, 1]
    extrapolates along the same great circle.

    Raises:
        AntipodalShapes: the shape distance is within 1e-6 of pi.
    """
    X = np.asarray(X, dtype=float)
    Yw = well_position(Y, X)
    theta = angle(X, Yw)
    if theta >= np.pi - ANTIPODAL_TOL:
        raise AntipodalShapes(f"shape distance {theta:.9f} is numerically antipodal")
    if theta < DEGENERATE_ANGLE:
        return X.copy()
    g = (np.sin((1.0 - t) * theta) * X + np.sin(t * theta) * Yw) / np.sin(theta)
    return g / np.linalg.norm(g)


def is_regular(p, tol=1e-10) -> bool:
    """True when the pre-shape has rank at least ``m - 1``."""
    p = np.asarray(p, dtype=float)
    sv = np.linalg.svd(p, compute_uv=False)
    if sv[0] == 0:
        return False
    return int(np.sum(sv > tol * sv[0])) >= p.shape[0] - 1


def log_map(p, q) -> np.ndarray:
    """Horizontal logarithm of the shape of ``q`` at pre-shape ``p``."""
    qw = well_position(q, p)
    theta = angle(p, qw)
    v = qw - np.vdot(p, qw) * p
    nv = np.linalg.norm(v)
    if nv < 1e-15:
        return np.zeros_like(p)
    return theta * v / nv


def exp_map(p, v) -> np.ndarray:
    """Sphere exponential at ``p`` of a tangent vector ``v``."""
    nv = np.linalg.norm(v)
    if nv < 1e-15:
        return np.array(p, dtype=float)
    out = np.cos(nv) * p + np.sin(nv) * v / nv
    return out / np.linalg.norm(out)


def frechet_mean(shapes, weights=None, max_iter=500, tol=1e-10) -> np.ndarray:
    """Weighted Fréchet mean via Karcher flow with unit step.

    Starts at the first shape; each iteration moves along the weighted sum of
    horizontal log maps. Stops once that sum has norm below ``tol``.

    Raises:
        NoConvergence: the residual is still above ``tol`` after ``max_iter``.
    """
    shapes = [np.asarray(s, dtype=float) for s in shapes]
    n = len(shapes)
    if weights is None:
        weights = np.full(n, 1.0 / n)
    weights = np.asarray(weights, dtype=float)
    if len(weights) != n:
        raise ValueError("need one weight per shape")
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be positive and sum to 1")
    p = shapes[0].copy()
    for _ in range(max_iter):
        v = sum(w * log_map(p, s) for w, s in zip(weights, shapes))
        if np.linalg.norm(v) < tol:
            return p
        p = exp_map(p, v)
    raise NoConvergence(
        f"Karcher flow residual {np.linalg.norm(v):.3g} after {max_iter} iterations")


def frechet_residual(p, shapes, weights) -> float:
    """Norm of the weighted sum of log maps at ``p`` (zero at a mean)."""
    v = sum(w * log_map(p, s) for w, s in zip(weights, shapes))
    return float(np.linalg.norm(v))


# -- forward-mode derivatives ------------------------------------------------
#
# Tangents are batched along a leading axis: ``dX`` has shape (d, m, k).

def well_position_jvp(Y, X, dY, dX):
    """``well_position(Y, X)`` and its directional derivatives.

    The rotation derivative ``dR = Omega R`` follows from differentiating the
    symmetry condition on ``R Y X^T``: a Sylvester equation for the skew
    matrix ``Omega``, solved in the eigenbasis of that symmetric product.
    """
    R, d, s, V = _rotation_from_svd(Y @ X.T)
    Yw = R @ Y
    lam = d * s
    dA = dY @ X.T + Y @ np.swapaxes(dX, -1, -2)
    B = R @ dA
    C = np.swapaxes(B, -1, -2) - B
    Ct = V.T @ C @ V
    denom = lam[:, None] + lam[None, :]
    np.fill_diagonal(denom, 1.0)
    Om = V @ (Ct / denom) @ V.T
    dYw = Om @ Yw + R @ dY
    return Yw, dYw


def geodesic_jvp(X, Y, t, dX, dY, dt):
    """``geodesic(X, Y, t)`` and its directional derivatives.

    ``dt`` has shape (d,) and matches the leading axis of ``dX``/``dY``.
    """
    Yw, dYw = well_position_jvp(Y, X, dY, dX)
    theta = angle(X, Yw)
    if theta >= np.pi - ANTIPODAL_TOL:
        raise AntipodalShapes(f"shape distance {theta:.9f} is numerically antipodal")
    if theta < DEGENERATE_ANGLE:
        return X.copy(), dX.copy()
    st = np.sin(theta)
    dc = np.einsum("ij,dij->d", Yw, dX) + np.einsum("ij,dij->d", X, dYw)
    dth = -dc / st
    u, v = (1.0 - t) * theta, t * theta
    a, b = np.sin(u) / st, np.sin(v) / st
    ct = np.cos(theta)
    da = (np.cos(u) * ((1.0 - t) * dth - theta * dt) * st - np.sin(u) * ct * dth) / st**2
    db = (np.cos(v) * (t * dth + theta * dt) * st - np.sin(v) * ct * dth) / st**2
    g = a * X + b * Yw
    dg = da[:, None, None] * X + a * dX + db[:, None, None] * Yw + b * dYw
    ng = np.linalg.norm(g)
    gam = g / ng
    dgam = (dg - np.einsum("ij,dij->d", gam, dg)[:, None, None] * gam) / ng
    return gam, dgam
