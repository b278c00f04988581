"""Euclidean active-shape-model baseline (the non-convex alternation).

The 3D estimate is an affine blend ``X = sum_j c_j B_j`` with ``sum_j c_j = 1``
and the image is modelled as ``W = alpha * (R X)[:2] + t``. Camera and
coefficients are fitted in turn; each step is a least-squares minimizer given
the other, so the residual never increases.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from .camera import CameraPose, weak_perspective_project
from .errors import DegenerateTarget, RankDeficientCoefficients
from .solver import random_stiefel


@dataclass
class AsmOptions:
    max_iters: int = 200
    rel_tol: float = 1e-8
    restarts: int = 3
    seed: int = 0


@dataclass
class AsmResult:
    c: np.ndarray
    cam: CameraPose
    X3d: np.ndarray
    residual: float
    trace: list = field(default_factory=list)
    restart_index: int = 0
    warnings: list = field(default_factory=list)


def camera_residual(W, X, cam) -> float:
    """Frobenius norm of ``W`` minus the weak-perspective image of ``X``."""
    return float(np.linalg.norm(np.asarray(W, dtype=float) - weak_perspective_project(X, cam)))


def _centered(A):
    mean = A.mean(axis=1, keepdims=True)
    return A - mean, mean[:, 0]


def _svd_rows(Wc, Xc):
    """Orthonormal 2 x 3 rows maximizing the correlation with the cross-covariance."""
    U, _, Vt = np.linalg.svd(Wc @ Xc.T, full_matrices=False)
    return U @ Vt


def _complete(M):
    return np.vstack([M[0], M[1], np.cross(M[0], M[1])])


def _scale_for(Wc, Xc, R):
    proj = R[:2] @ Xc
    return float(np.vdot(Wc, proj) / np.vdot(proj, proj))


def _refine(Wc, Xc, R0, rounds=3):
    """Levenberg-Marquardt polish of (alpha, R) on the centered residual.

    The rotation is parameterized by a left rotation vector around the current
    estimate; re-anchoring between rounds keeps the analytic Jacobian (taken
    at a zero rotation vector) accurate.
    """
    R = np.asarray(R0, dtype=float)
    alpha = _scale_for(Wc, Xc, R)
    gens = [np.cross(np.eye(3)[i], np.eye(3)) for i in range(3)]  # [e_i]x (skew)
    for _ in range(rounds):
        def resid(x, R=R):
            Rx = Rotation.from_rotvec(x[1:]).as_matrix() @ R
            return (Wc - x[0] * (Rx[:2] @ Xc)).ravel()

        def jac(x, R=R):
            Rx = Rotation.from_rotvec(x[1:]).as_matrix() @ R
            cols = [-(Rx[:2] @ Xc).ravel()]
            cols += [-x[0] * ((-G @ Rx)[:2] @ Xc).ravel() for G in gens]
            return np.stack(cols, axis=1)

        sol = least_squares(resid, np.r_[alpha, 0.0, 0.0, 0.0], jac=jac, method="lm",
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        R = Rotation.from_rotvec(sol.x[1:]).as_matrix() @ R
        alpha = sol.x[0]
    if alpha < 0:
        # negating the two projecting rows keeps R a proper rotation
        R = np.diag([-1.0, -1.0, 1.0]) @ R
        alpha = -alpha
    return alpha, R


def orthographic_camera_fit(W, X, init=None) -> CameraPose:
    """Weak-perspective camera best explaining the image ``W`` of ``X``.

    The rotation is seeded from the SVD of the 2 x 3 cross-covariance (rows
    completed to a rotation with a cross product) and, optionally, from
    ``init``; each seed is polished by Levenberg-Marquardt and the lower
    residual wins. The translation matches the centroids.

    Raises:
        DegenerateTarget: ``X`` has centered rank below 2.
    """
    W = np.asarray(W, dtype=float)
    X = np.asarray(X, dtype=float)
    Wc, wbar = _centered(W)
    Xc, xbar = _centered(X)
    sv = np.linalg.svd(Xc, compute_uv=False)
    if sv[0] < 1e-12 or sv[1] <= 1e-10 * sv[0]:
        raise DegenerateTarget("centered 3D configuration has rank < 2")
    seeds = [_complete(_svd_rows(Wc, Xc))]
    if init is not None:
        seeds.append(np.asarray(init, dtype=float))
    best = None
    for R0 in seeds:
        alpha, R = _refine(Wc, Xc, R0)
        if alpha <= 0:
            continue
        r = float(np.linalg.norm(Wc - alpha * (R[:2] @ Xc)))
        if best is None or r < best[0]:
            best = (r, alpha, R)
    if best is None:
        # W carries no signal correlated with X; any rotation is optimal
        best = (float(np.linalg.norm(Wc)), 1e-300, seeds[0])
    _, alpha, R = best
    # re-orthonormalize to remove drift from the rotation-vector composition
    U, _, Vt = np.linalg.svd(R)
    R = U @ Vt
    t = wbar - alpha * (R[:2] @ xbar)
    return CameraPose(R, alpha, t)


def blend(basis, c) -> np.ndarray:
    return np.tensordot(np.asarray(c, dtype=float), basis, axes=1)


def coefficient_step(W, basis, cam, notes=None):
    """Least-squares sum-to-one coefficients for a fixed camera.

    The constraint is eliminated by writing ``c_n = 1 - sum_{j<n} c_j``.
    A singular system falls back to the minimum-norm solution.
    """
    n = len(basis)
    if n == 1:
        return np.ones(1)
    P = cam.alpha * cam.rotation[:2]
    last = P @ basis[-1]
    rhs = (W - cam.t[:, None] - last).ravel()
    A = np.stack([(P @ (basis[j] - basis[-1])).ravel() for j in range(n - 1)], axis=1)
    sol, _, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
    if rank < n - 1:
        msg = f"coefficient system has rank {rank} < {n - 1}; using minimum-norm solution"
        warnings.warn(msg, RankDeficientCoefficients, stacklevel=2)
        if notes is not None:
            notes.append(msg)
    return np.r_[sol, 1.0 - sol.sum()]


def _run(W, basis, R_init, opts):
    n = len(basis)
    c = np.full(n, 1.0 / n)
    X = blend(basis, c)
    cam = orthographic_camera_fit(W, X, init=R_init)
    res = camera_residual(W, X, cam)
    trace = [res]
    notes = []
    for _ in range(opts.max_iters):
        c_new = coefficient_step(W, basis, cam, notes)
        X_new = blend(basis, c_new)
        if camera_residual(W, X_new, cam) <= res:
            c, X = c_new, X_new
        try:
            cam_new = orthographic_camera_fit(W, X, init=cam.rotation)
        except DegenerateTarget:
            cam_new = cam
        if camera_residual(W, X, cam_new) <= camera_residual(W, X, cam):
            cam = cam_new
        res_new = camera_residual(W, X, cam)
        trace.append(res_new)
        done = res - res_new <= opts.rel_tol * res or res_new < 1e-15
        res = res_new
        if done:
            break
    return c, cam, X, res, trace, notes


def asm_reconstruct(W, basis, opts=AsmOptions()) -> AsmResult:
    """Fit sum-to-one blend coefficients and a weak-perspective camera to ``W``.

    ``basis`` is an ``(n, 3, k)`` stack of (GPA-aligned) configurations. The
    first run seeds the camera from the SVD fit alone; later runs add a random
    rotation seed. The lowest final residual wins.
    """
    W = np.asarray(W, dtype=float)
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 3 or basis.shape[1] != 3:
        raise ValueError(f"basis must be (n, 3, k), got {basis.shape}")
    if W.shape != (2, basis.shape[2]):
        raise ValueError(f"image has shape {W.shape}, basis needs (2, {basis.shape[2]})")
    rng = np.random.default_rng(opts.seed)
    inits = [None] + [_complete(random_stiefel(rng).T) for _ in range(opts.restarts - 1)]
    best = None
    for r, R0 in enumerate(inits):
        c, cam, X, res, trace, notes = _run(W, basis, R0, opts)
        if best is None or res < best[0].residual:
            best = (AsmResult(c, cam, X, res, trace, r), notes)
    result, notes = best
    result.warnings = notes
    return result
