"""Numerical self-checks run by ``kss3d selfcheck``."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.spatial.transform import Rotation

from .barycentric import BasisSet
from .camera import kendall_project
from .kendall import geodesic, shape_distance, to_preshape
from .solver import ReconstructionProblem, check_problem_gradients, random_stiefel


class Check(NamedTuple):
    name: str
    residual: float
    threshold: float

    @property
    def passed(self):
        return bool(self.residual < self.threshold)


def brute_force_distance(X, Y, n_samples=10**6, seed=0, chunk=200_000) -> float:
    """``min_R arccos <X, R Y>`` over uniformly sampled rotations (m = 3)."""
    M = np.asarray(X) @ np.asarray(Y).T  # <X, R Y> = <R, X Y^T>
    rng = np.random.default_rng(seed)
    best = -1.0
    left = n_samples
    while left > 0:
        m = min(chunk, left)
        R = Rotation.random(m, random_state=rng).as_matrix()
        best = max(best, float(np.einsum("nij,ij->n", R, M).max()))
        left -= m
    return float(np.arccos(np.clip(best, -1.0, 1.0)))


def random_problem(rng, n=4, k=12, spread=0.4):
    base = rng.standard_normal((3, k))
    B = np.stack([to_preshape(base + spread * rng.standard_normal((3, k))) for _ in range(n)])
    basis = BasisSet(B)
    W = kendall_project(B[0] + 0.03 * rng.standard_normal((3, k)), random_stiefel(rng), B[0])
    return ReconstructionProblem(W, basis)


def run_checks(seed=0, fault=None, oracle_samples=10**6):
    """Gradient, distance-oracle and geodesic checks.

    ``fault`` injects a known defect (``"gradient-sign"`` flips the exact
    gradients, ``"distance-offset"`` perturbs the distance) so that the
    harness itself can be shown to fail.
    """
    rng = np.random.default_rng(seed)
    checks = []

    worst = {"rotation": 0.0, "weights": 0.0}
    for _ in range(5):
        prob = random_problem(rng)
        if fault == "gradient-sign":
            gq, gw = prob.grad_Q, prob.grad_w
            prob.grad_Q = lambda *a, **kw: -gq(*a, **kw)
            prob.grad_w = lambda *a, **kw: -gw(*a, **kw)
        w = rng.dirichlet(np.ones(prob.basis.n))
        for rep in check_problem_gradients(prob, random_stiefel(rng), w, "exact"):
            worst[rep.name] = max(worst[rep.name], rep.rel_error)
    checks.append(Check("gradient rotation (exact vs central FD)", worst["rotation"], 1e-5))
    checks.append(Check("gradient weights (exact vs central FD)", worst["weights"], 1e-5))

    worst = 0.0
    for i in range(10):
        X = to_preshape(rng.standard_normal((3, 10)))
        Y = to_preshape(rng.standard_normal((3, 10)))
        d = shape_distance(X, Y) + (0.01 if fault == "distance-offset" else 0.0)
        worst = max(worst, abs(d - brute_force_distance(X, Y, oracle_samples, seed + i)))
    checks.append(Check("shape distance vs brute-force rotations", worst, 2e-3))

    ends = mids = arcs = 0.0
    for _ in range(20):
        X = to_preshape(rng.standard_normal((3, 8)))
        Y = to_preshape(X + 0.5 * rng.standard_normal((3, 8)))
        d = shape_distance(X, Y)
        ends = max(ends, np.abs(geodesic(X, Y, 0.0) - X).max(),
                   shape_distance(geodesic(X, Y, 1.0), Y))
        mid = geodesic(X, Y, 0.5)
        mids = max(mids, abs(shape_distance(X, mid) - shape_distance(mid, Y)))
        t1, t2 = sorted(rng.uniform(0, 1, 2))
        arcs = max(arcs, abs(shape_distance(geodesic(X, Y, t1), geodesic(X, Y, t2))
                             - (t2 - t1) * d))
    checks.append(Check("geodesic endpoints", ends, 1e-8))
    checks.append(Check("geodesic midpoint equidistance", mids, 1e-8))
    checks.append(Check("geodesic arc-length proportionality", arcs, 1e-8))
    return checks


def format_table(checks):
    width = max(len(c.name) for c in checks)
    lines = [f"{'check':<{width}}  {'residual':>10}  {'threshold':>9}  result"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {c.residual:10.3e}  {c.threshold:9.1e}  "
                     f"{'PASS' if c.passed else 'FAIL'}")
    return "\n".join(lines)
