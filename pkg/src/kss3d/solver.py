"""Alternating reconstruction over Stiefel rotations and barycentric weights.

The objective is the squared 2D shape distance between the observed landmarks
``W`` and the projection ``Q^T P / |Q^T P|`` of ``P``, the representative of
``inductive_mean(basis, w)`` well-positioned to a fixed reference pre-shape.
Each outer iteration takes Armijo steepest-descent steps in ``Q`` (Riemannian,
on the Stiefel manifold) and then in ``w``; both only accept decreasing steps.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .barycentric import (BasisSet, check_weights, inductive_mean,
                          inductive_mean_jvp, normalize_weights)
from .camera import (_distance_sq_and_grad, reprojection_error_grad_Q,
                     reprojection_error_jvp, representative_jvp)
from .errors import AllRestartsFailed, KSSError
from .kendall import to_preshape, well_position

log = logging.getLogger(__name__)

GRAD_TOL = 1e-10


@dataclass(frozen=True)
class Armijo:
    initial_step: float = 1.0
    backtrack: float = 0.5
    slope: float = 1e-4
    max_backtracks: int = 30


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of :func:`reconstruct`.

    ``restarts`` counts rotation initializations: the identity first, then
    ``restarts - 1`` random Stiefel points drawn from ``seed``.
    ``abs_tol`` stops the outer loop once the objective itself is negligible.
    """
    max_outer_iters: int = 100
    inner_iters: int = 20
    rel_tol: float = 1e-6
    abs_tol: float = 1e-14
    armijo: Armijo = field(default_factory=Armijo)
    gradient_mode: str = "finite_difference"
    fd_step: float = 1e-6
    restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.gradient_mode not in ("finite_difference", "exact"):
            raise ValueError(f"unknown gradient_mode {self.gradient_mode!r}")
        if not 0 < self.armijo.backtrack < 1:
            raise ValueError("armijo.backtrack must lie in (0, 1)")
        if min(self.rel_tol, self.fd_step, self.armijo.initial_step,
               self.armijo.slope) <= 0 or self.abs_tol < 0:
            raise ValueError("tolerances and step sizes must be positive")
        if self.restarts < 1 or self.max_outer_iters < 0 or self.inner_iters < 0:
            raise ValueError("iteration counts must be non-negative, restarts >= 1")

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        if "armijo" in d:
            d["armijo"] = Armijo(**d["armijo"])
        return cls(**d)


@dataclass
class ReconstructionResult:
    weights: np.ndarray
    Q: np.ndarray
    shape3d: np.ndarray
    objective: float
    objective_trace: list
    iterations: int
    restart_index: int
    warnings: list = field(default_factory=list)
    ref: np.ndarray = None

    @property
    def rotation(self):
        from .camera import rotation_from_stiefel
        return rotation_from_stiefel(self.Q)

    @property
    def landmarks3d(self):
        """Estimated shape expressed in the frame of the reference pre-shape."""
        return well_position(self.shape3d, self.ref)


class StepResult(NamedTuple):
    point: np.ndarray
    objective: float
    iterations: int
    stalled: bool


class GradientReport(NamedTuple):
    name: str
    rel_error: float
    threshold: float
    passed: bool


class ReconstructionProblem:
    """Objective of the reconstruction for one observation and basis."""

    def __init__(self, W, basis, ref=None):
        self.basis = basis if isinstance(basis, BasisSet) else BasisSet(basis)
        W = np.asarray(W, dtype=float)
        if W.shape != (2, self.basis.k):
            raise ValueError(
                f"observation has shape {W.shape}, basis needs (2, {self.basis.k})")
        self.W = to_preshape(W)
        self.ref = self.basis.shapes[0] if ref is None else to_preshape(ref)

    def representative(self, w):
        return well_position(inductive_mean(self.basis, w), self.ref)

    def rotation_objective(self, P, Q):
        f, _ = _distance_sq_and_grad(self.W, Q.T @ P)
        return f

    def objective(self, Q, w):
        return self.rotation_objective(self.representative(w), Q)

    def grad_Q(self, P, Q, mode="exact", h=1e-6):
        """Euclidean gradient in ``Q`` with the shape representative ``P`` fixed."""
        if mode == "exact":
            return reprojection_error_grad_Q(P, Q, self.W)[1]
        return _central_difference(lambda q: self.rotation_objective(P, q), Q, h)

    def grad_w(self, Q, w, mode="exact", h=1e-6):
        """Euclidean gradient in the weights with ``Q`` fixed."""
        w = np.asarray(w, dtype=float)
        if mode == "exact":
            mu, dmu = inductive_mean_jvp(self.basis, w, np.eye(len(w)))
            P, dP = representative_jvp(mu, dmu, self.ref)
            return reprojection_error_jvp(P, dP, Q, self.W)[1]
        return _central_difference(lambda v: self.objective(Q, v), w, h)


def _central_difference(f, x, h):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    f0 = None
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        try:
            g[idx] = (f(xp) - f(xm)) / (2 * h)
        except KSSError:
            # one-sided fallback next to an invalid region
            if f0 is None:
                f0 = f(x)
            try:
                g[idx] = (f(xp) - f0) / h
            except KSSError:
                g[idx] = (f0 - f(xm)) / h
    return g


def tangent_projection(Q, G):
    """Project an ambient 3 x 2 matrix onto the tangent space at ``Q``."""
    QtG = Q.T @ G
    return G - Q @ (0.5 * (QtG + QtG.T))


def retract(Q, V):
    """Polar retraction onto the Stiefel manifold."""
    U, _, Vt = np.linalg.svd(Q + V, full_matrices=False)
    return U @ Vt


def random_stiefel(seed=None):
    """Haar-distributed Stiefel point from a QR of a Gaussian 3 x 2 matrix."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    Qr, Rr = np.linalg.qr(rng.standard_normal((3, 2)))
    return Qr * np.sign(np.diag(Rr))


def _armijo(f, f0, slope_sq, trial, opts, start):
    """Backtrack from step ``start`` until the Armijo condition holds."""
    a = start
    for _ in range(opts.max_backtracks):
        try:
            cand = trial(a)
            fc = f(cand)
        except KSSError:
            fc = np.inf
        if np.isfinite(fc) and fc <= f0 - opts.slope * a * slope_sq and fc <= f0:
            return cand, fc, a
        a *= opts.backtrack
    return None, f0, 0.0


def _bb_step(s, y, fallback):
    """Barzilai-Borwein trial step; falls back when curvature is not positive."""
    sy = float(np.vdot(s, y))
    if sy <= 0:
        return fallback
    return float(np.vdot(s, s)) / sy


def rotation_step(problem, P, Q, opts=SolverOptions()):
    """Riemannian steepest descent in ``Q`` with the shape held fixed."""
    arm = opts.armijo
    f = problem.rotation_objective(P, Q)
    step = arm.initial_step
    prev = None
    it = 0
    for it in range(1, opts.inner_iters + 1):
        G = problem.grad_Q(P, Q, opts.gradient_mode, opts.fd_step)
        xi = tangent_projection(Q, G)
        gn2 = float(np.vdot(xi, xi))
        if np.sqrt(gn2) < GRAD_TOL:
            return StepResult(Q, f, it - 1, False)
        if prev is not None:
            step = _bb_step(Q - prev[0], xi - prev[1], step)
        Qn, fn, a = _armijo(lambda q: problem.rotation_objective(P, q), f, gn2,
                            lambda a: retract(Q, -a * xi), arm, step)
        if Qn is None:
            return StepResult(Q, f, it, True)
        prev = (Q, xi)
        Q, f = Qn, fn
        step = a / arm.backtrack
    return StepResult(Q, f, it, False)


def weight_step(problem, w, Q, opts=SolverOptions()):
    """Steepest descent in the barycentric weights with ``Q`` held fixed.

    Iterates are renormalized to sum 1; trial steps that hit a vanishing
    prefix sum are halved like any other rejected step.
    """
    arm = opts.armijo
    w = normalize_weights(check_weights(w))
    f = problem.objective(Q, w)
    step = arm.initial_step
    prev = None
    it = 0
    for it in range(1, opts.inner_iters + 1):
        g = problem.grad_w(Q, w, opts.gradient_mode, opts.fd_step)
        gn2 = float(g @ g)
        if np.sqrt(gn2) < GRAD_TOL:
            return StepResult(w, f, it - 1, False)
        if prev is not None:
            step = _bb_step(w - prev[0], g - prev[1], step)
        wn, fn, a = _armijo(lambda v: problem.objective(Q, v), f, gn2,
                            lambda a: normalize_weights(check_weights(w - a * g)),
                            arm, step)
        if wn is None:
            return StepResult(w, f, it, True)
        prev = (w, g)
        w, f = wn, fn
        step = a / arm.backtrack
    return StepResult(w, f, it, False)


def _solve_from(problem, Q, opts, restart):
    n = problem.basis.n
    w = np.full(n, 1.0 / n)
    P = problem.representative(w)
    f = problem.rotation_objective(P, Q)
    trace = [f]
    notes = []
    outer = 0
    for outer in range(1, opts.max_outer_iters + 1):
        rs = rotation_step(problem, P, Q, opts)
        Q = rs.point
        if rs.stalled:
            notes.append(f"restart {restart} outer {outer}: rotation step stalled")
        f_new = rs.objective
        if n > 1:
            ws = weight_step(problem, w, Q, opts)
            if ws.stalled and ws.objective >= f_new:
                notes.append(f"restart {restart} outer {outer}: weight step stalled")
            w, f_new = ws.point, ws.objective
            P = problem.representative(w)
        trace.append(f_new)
        f_prev, f = f, f_new
        if f <= opts.abs_tol or f_prev - f <= opts.rel_tol * f_prev:
            break
    return w, Q, f, trace, outer, notes


def reconstruct(W, basis, opts=SolverOptions(), ref=None) -> ReconstructionResult:
    """Fit barycentric weights and a camera rotation to 2D landmarks ``W``.

    Runs one alternating descent per rotation initialization and keeps the
    lowest objective (ties go to the earliest restart).

    Raises:
        AllRestartsFailed: every initialization was infeasible.
    """
    problem = ReconstructionProblem(W, basis, ref)
    rng = np.random.default_rng(opts.seed)
    starts = [np.eye(3)[:, :2]] + [random_stiefel(rng) for _ in range(opts.restarts - 1)]
    best, failures, notes = None, [], []
    for r, Q0 in enumerate(starts):
        try:
            w, Q, f, trace, iters, run_notes = _solve_from(problem, Q0, opts, r)
        except KSSError as exc:
            failures.append(f"restart {r}: {type(exc).__name__}: {exc}")
            continue
        notes.extend(run_notes)
        log.debug("restart %d: objective %.3e after %d outer iterations", r, f, iters)
        if best is None or f < best[2]:
            best = (w, Q, f, trace, iters, r)
    if best is None:
        raise AllRestartsFailed("; ".join(failures))
    w, Q, f, trace, iters, r = best
    return ReconstructionResult(
        weights=w, Q=Q, shape3d=inductive_mean(problem.basis, w), objective=f,
        objective_trace=trace, iterations=iters, restart_index=r,
        warnings=failures + notes, ref=problem.ref)


def gradient_check(f: Callable, grad: Callable, x, h=1e-6, threshold=1e-5,
                   name="gradient") -> GradientReport:
    """Compare ``grad(x)`` against central finite differences of ``f``."""
    g = np.asarray(grad(x), dtype=float)
    g_fd = _central_difference(f, x, h)
    scale = max(np.linalg.norm(g_fd), np.linalg.norm(g), 1e-300)
    err = float(np.linalg.norm(g - g_fd) / scale)
    return GradientReport(name, err, threshold, err < threshold)


def check_problem_gradients(problem, Q, w, mode="exact", h=1e-6):
    """Gradient reports for both sub-problems at ``(Q, w)``.

    In exact mode the implemented gradients are compared with central
    differences (threshold 1e-5); in finite-difference mode two step sizes
    are compared with each other (threshold 1e-3).
    """
    P = problem.representative(w)
    fq = lambda q: problem.rotation_objective(P, q)  # noqa: E731
    fw = lambda v: problem.objective(Q, v)  # noqa: E731
    if mode == "exact":
        return [
            gradient_check(fq, lambda q: problem.grad_Q(P, q, "exact"), Q, h, 1e-5,
                           "rotation"),
            gradient_check(fw, lambda v: problem.grad_w(Q, v, "exact"), w, h, 1e-5,
                           "weights"),
        ]
    return [
        gradient_check(fq, lambda q: _central_difference(fq, q, 10 * h), Q, h, 1e-3,
                       "rotation"),
        gradient_check(fw, lambda v: _central_difference(fw, v, 10 * h), w, h, 1e-3,
                       "weights"),
    ]
