"""Experiment pipeline: alignment, basis selection, test projections, scoring."""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .asm import AsmOptions, asm_reconstruct
from .barycentric import BasisSet
from .camera import kendall_project
from .errors import KSSError
from .kendall import shape_distance, spherical_distance, to_preshape, well_position
from .solver import SolverOptions, reconstruct

log = logging.getLogger(__name__)

METHODS = ("kss", "asm_nonconvex")
NAMED_VIEWS = ("axis_z", "anterior_symmetric", "lateral_asymmetric")

# Mean(variance) of the KSS errors on the human-pose test subjects, keyed by
# (test subject, number of basis shapes). Used only when the corpus is supplied.
REFERENCE_KSS_ERRORS = {
    (13, 32): (0.295, 0.031), (13, 64): (0.295, 0.031), (13, 128): (0.288, 0.038),
    (14, 32): (0.267, 0.029), (14, 64): (0.258, 0.028), (14, 128): (0.242, 0.019),
    (15, 32): (0.221, 0.034), (15, 64): (0.231, 0.027), (15, 128): (0.221, 0.021),
}


# -- generalized Procrustes analysis -----------------------------------------

class GPAResult(NamedTuple):
    aligned: np.ndarray
    mean: np.ndarray
    trace: list           # Procrustes sum of squares, weakly decreasing
    iterations: int
    converged: bool
    distance_trace: list  # sum of squared shape distances, informational


def principal_frame(p):
    """Rotation taking ``p`` to its principal axes (descending spread).

    Axis signs make the third moment of the first two coordinates positive;
    the last axis completes a right-handed frame.
    """
    evals, evecs = np.linalg.eigh(p @ p.T)
    R = evecs[:, ::-1].T.copy()
    for i in range(R.shape[0] - 1):
        if np.sum((R[i] @ p) ** 3) < 0:
            R[i] = -R[i]
    if np.linalg.det(R) < 0:
        R[-1] = -R[-1]
    return R


def gpa(configs, tol=1e-9, max_iter=100, orientation="principal") -> GPAResult:
    """Align configurations to their evolving normalized Euclidean mean.

    ``trace[i]`` is the Procrustes sum of squares ``sum_j |Y_j - mean_i|^2``
    for the mean entering pass ``i``, with every ``Y_j`` freshly aligned to
    that mean. Both half-steps minimize this quantity, so the trace weakly
    decreases. ``distance_trace`` holds ``sum_j d(X_j, mean_i)^2``; the
    Euclidean mean does not minimize it, so it may rise slightly. With
    ``orientation="principal"`` the final frame is the principal-axes frame of
    the mean, so the output does not depend on the input rotations;
    ``"first"`` keeps the frame the iteration settles in, which starts from the
    first configuration.
    """
    if len(configs) < 2:
        raise ValueError("GPA needs at least two configurations")
    if orientation not in ("principal", "first"):
        raise ValueError(f"unknown orientation {orientation!r}")
    shapes = np.stack([to_preshape(c) for c in configs])
    mean = shapes[0].copy()
    if orientation == "principal":
        mean = principal_frame(mean) @ mean
    trace, dist_trace = [], []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        aligned = np.stack([well_position(s, mean) for s in shapes])
        trace.append(float(((aligned - mean) ** 2).sum()))
        dist_trace.append(sum(spherical_distance(a, mean) ** 2 for a in aligned))
        new = aligned.mean(axis=0)
        new /= np.linalg.norm(new)
        move = np.linalg.norm(new - mean)
        mean = new
        if move < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"GPA did not converge: mean still moved {move:.3g} after "
                      f"{max_iter} iterations", RuntimeWarning, stacklevel=2)
    if orientation == "principal":
        mean = principal_frame(mean) @ mean
    aligned = np.stack([well_position(s, mean) for s in shapes])
    return GPAResult(aligned, mean, trace, it, converged, dist_trace)


# -- k-means -----------------------------------------------------------------

class KMeansResult(NamedTuple):
    centers: np.ndarray
    labels: np.ndarray
    sse: float
    sse_trace: list


def _kmeans_pp(X, k, rng):
    centers = [X[rng.integers(len(X))]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(len(X))
        else:
            idx = rng.choice(len(X), p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def _lloyd(X, centers, max_iter):
    trace = []
    labels = None
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        trace.append(float(d2[np.arange(len(X)), new_labels].sum()))
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
        centers = centers.copy()
        for j in range(len(centers)):
            members = labels == j
            if members.any():
                centers[j] = X[members].mean(axis=0)
            else:
                # reseed at the point farthest from its current centroid
                far = int(d2[np.arange(len(X)), labels].argmax())
                centers[j] = X[far]
                labels[far] = j
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    sse = float(d2[np.arange(len(X)), labels].sum())
    return centers, labels, sse, trace


def kmeans(X, k, seed=0, n_init=20, max_iter=300) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding; best of ``n_init`` runs.

    Clusters are renumbered by their smallest member index so the result is
    independent of seeding order.
    """
    X = np.asarray(X, dtype=float)
    if not 1 <= k <= len(X):
        raise ValueError(f"k={k} must lie in [1, {len(X)}]")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        res = _lloyd(X, _kmeans_pp(X, k, rng), max_iter)
        if best is None or res[2] < best[2]:
            best = res
    centers, labels, sse, trace = best
    first = [np.flatnonzero(labels == j).min() for j in range(k)]
    order = np.argsort(first)
    relabel = np.empty(k, dtype=int)
    relabel[order] = np.arange(k)
    return KMeansResult(centers[order], relabel[labels], sse, trace)


def cluster_means(aligned, k, seed=0) -> np.ndarray:
    """Pre-shapes of the k-means cluster means of flattened aligned pre-shapes."""
    aligned = np.asarray(aligned, dtype=float)
    shape = aligned.shape[1:]
    res = kmeans(aligned.reshape(len(aligned), -1), k, seed)
    return np.stack([to_preshape(c.reshape(shape)) for c in res.centers])


def kmeans_basis(aligned, k, seed=0) -> BasisSet:
    """Basis of the k cluster means, renormalized to pre-shapes."""
    return BasisSet(cluster_means(aligned, k, seed)).validate()


# -- views and test projections ----------------------------------------------

def view_vector(view, anterior=(0.0, 1.0, 0.0), lateral=(1.0, 0.0, 0.0)) -> np.ndarray:
    """Unit viewing direction for a named view or an explicit 3-vector.

    ``anterior_symmetric`` looks along the anterior axis; ``lateral_asymmetric``
    looks halfway (45 degrees) between the anterior and lateral axes.
    """
    if isinstance(view, str):
        if view in ("axis_z", "z"):
            v = np.array([0.0, 0.0, 1.0])
        elif view == "x":
            v = np.array([1.0, 0.0, 0.0])
        elif view == "y":
            v = np.array([0.0, 1.0, 0.0])
        elif view == "anterior_symmetric":
            v = np.asarray(anterior, dtype=float)
        elif view == "lateral_asymmetric":
            a = np.asarray(anterior, dtype=float)
            b = np.asarray(lateral, dtype=float)
            v = a / np.linalg.norm(a) + b / np.linalg.norm(b)
        else:
            v = np.array([float(x) for x in view.split(",")])
    else:
        v = np.asarray(view, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)) or np.linalg.norm(v) < 1e-12:
        raise ValueError(f"invalid view {view!r}")
    return v / np.linalg.norm(v)


def stiefel_for_view(v) -> np.ndarray:
    """Image axes ``(u1, u2)`` orthogonal to ``v`` with ``u1 x u2 = v``.

    Opposite view vectors share ``u1`` and flip ``u2``, i.e. they see mirror
    images of each other.
    """
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    helper = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u1 = helper - (helper @ v) * v
    u1 /= np.linalg.norm(u1)
    u2 = np.cross(v, u1)
    return np.column_stack([u1, u2])


def make_test_projection(shape, view="axis_z", **axes) -> np.ndarray:
    """2D pre-shape seen when viewing the given 3D representative along ``view``."""
    shape = np.asarray(shape, dtype=float)
    return kendall_project(shape, stiefel_for_view(view_vector(view, **axes)), shape)


# -- statistics ----------------------------------------------------------------

@dataclass
class ErrorReport:
    errors: list
    mean: float
    variance: float
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    method: str = None
    basis_count: int = None
    view: str = None
    failures: int = 0


def summarize(errors) -> ErrorReport:
    """Mean, population variance, quartiles and 1.5 IQR whiskers."""
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("cannot summarize an empty error list")
    q1, med, q3 = np.percentile(e, [25, 50, 75])
    iqr = q3 - q1
    lo = e[e >= q1 - 1.5 * iqr].min()
    hi = e[e <= q3 + 1.5 * iqr].max()
    return ErrorReport(list(map(float, e)), float(e.mean()), float(e.var()), float(med),
                       float(q1), float(q3), float(lo), float(hi))


# -- experiments -----------------------------------------------------------------

@dataclass
class ExperimentConfig:
    basis_counts: list = field(default_factory=lambda: [32, 64, 128])
    views: list = field(default_factory=lambda: ["axis_z"])
    methods: list = field(default_factory=lambda: ["kss", "asm_nonconvex"])
    seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    asm: AsmOptions = field(default_factory=AsmOptions)
    noise: float = 0.0
    anterior_axis: tuple = (0.0, 1.0, 0.0)
    lateral_axis: tuple = (1.0, 0.0, 0.0)
    gpa_orientation: str = "principal"
    jobs: int = 1

    def __post_init__(self):
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
        for v in self.views:
            view_vector(v, self.anterior_axis, self.lateral_axis)
        if any(int(b) < 1 for b in self.basis_counts):
            raise ValueError("basis counts must be positive")

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        if "view" in d:
            d["views"] = [d.pop("view")]
        if "solver" in d:
            d["solver"] = SolverOptions.from_dict(d["solver"])
        if "asm" in d:
            d["asm"] = AsmOptions(**d["asm"])
        for key in ("anterior_axis", "lateral_axis"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class InstanceResult:
    instance_id: int
    method: str
    basis_count: int
    view: str
    error: float
    status: str = "ok"


def _view_name(view):
    return view if isinstance(view, str) else ",".join(f"{x:g}" for x in view)


def _run_instance(task):
    idx, method, count, view, truth, W, basis, config = task
    try:
        if method == "kss":
            est = reconstruct(W, basis, config.solver).shape3d
        else:
            est = to_preshape(asm_reconstruct(W, basis.shapes, config.asm).X3d)
        return InstanceResult(idx, method, count, view, shape_distance(truth, est))
    except KSSError as exc:
        return InstanceResult(idx, method, count, view, float("nan"),
                              f"failed: {type(exc).__name__}")


def evaluate(training, testing, config=ExperimentConfig()):
    """Run the reconstruction experiment.

    All configurations are aligned jointly by GPA; bases are k-means cluster
    means of the aligned training shapes; each aligned test shape is projected
    along every configured view, reconstructed by every method and scored by
    its shape distance to the truth.

    Returns:
        ``(reports, instances)``: one :class:`ErrorReport` per (method, basis
        count, view) and the per-instance rows in deterministic order.
    """
    if len(training) == 0 or len(testing) == 0:
        raise ValueError("training and testing sets must be nonempty")
    ks = {np.shape(c) for c in list(training) + list(testing)}
    if len(ks) != 1 or next(iter(ks))[0] != 3:
        raise ValueError(f"all configurations must be 3 x k with one k, got {sorted(ks)}")
    aligned = gpa(list(training) + list(testing), orientation=config.gpa_orientation).aligned
    train, test = aligned[:len(training)], aligned[len(training):]
    axes = dict(anterior=config.anterior_axis, lateral=config.lateral_axis)

    tasks = []
    for count in config.basis_counts:
        if count > len(train):
            raise ValueError(f"basis count {count} exceeds {len(train)} training shapes")
        basis = kmeans_basis(train, int(count), config.seed)
        for view in config.views:
            name = _view_name(view)
            for i, truth in enumerate(test):
                try:
                    W = make_test_projection(truth, view, **axes)
                except KSSError:
                    W = None
                if W is not None and config.noise > 0:
                    rng = np.random.default_rng([config.seed, i])
                    W = to_preshape(W + config.noise / np.sqrt(W.shape[1])
                                    * rng.standard_normal(W.shape))
                for method in config.methods:
                    tasks.append((i, method, int(count), name, truth, W, basis, config))

    def run(task):
        if task[5] is None:
            i, method, count, name = task[:4]
            return InstanceResult(i, method, count, name, float("nan"),
                                  "failed: DegenerateProjection")
        return _run_instance(task)

    if config.jobs > 1:
        ready = [t for t in tasks if t[5] is not None]
        with ProcessPoolExecutor(config.jobs) as pool:
            done = iter(pool.map(_run_instance, ready, chunksize=4))
        results = [next(done) if t[5] is not None else run(t) for t in tasks]
    else:
        results = [run(t) for t in tasks]

    reports = []
    for count in config.basis_counts:
        for view in map(_view_name, config.views):
            for method in config.methods:
                rows = [r for r in results
                        if (r.method, r.basis_count, r.view) == (method, int(count), view)]
                ok = [r.error for r in rows if r.status == "ok"]
                failures = len(rows) - len(ok)
                if ok:
                    rep = summarize(ok)
                else:
                    nan = float("nan")
                    rep = ErrorReport([], nan, nan, nan, nan, nan, nan, nan)
                rep.method, rep.basis_count, rep.view, rep.failures = method, int(count), view, failures
                reports.append(rep)
                log.info("%s n=%d view=%s: mean %.4f (%d failures)",
                         method, count, view, rep.mean, failures)
    return reports, results


# -- synthetic data --------------------------------------------------------------

def synthetic_corpus(n_shapes, k=15, seed=0, n_modes=3, spread=0.25, jitter=0.02):
    """Random family of 3 x k configurations with a few deformation modes.

    Each member gets an arbitrary rotation, scale and translation, so the
    corpus exercises the alignment stage.
    """
    from scipy.spatial.transform import Rotation

    rng = np.random.default_rng(seed)
    base = rng.standard_normal((3, k))
    modes = rng.standard_normal((n_modes, 3, k))
    out = []
    for _ in range(n_shapes):
        z = rng.standard_normal(n_modes) * spread
        X = base + np.tensordot(z, modes, axes=1) + jitter * rng.standard_normal((3, k))
        R = Rotation.random(random_state=rng).as_matrix()
        out.append(rng.uniform(0.5, 2.0) * (R @ X) + rng.standard_normal((3, 1)))
    return out
