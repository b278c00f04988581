"""Inductive parameterization of the Fréchet barycentric subspace.

A weight vector ``w`` is mapped to a shape by walking geodesics:
``mu_1 = b_1`` and ``mu_j = geodesic(mu_{j-1}, b_j, w_j / (w_1 + ... + w_j))``.
The map is invariant to rescaling ``w`` by any nonzero factor and depends on
the order of the basis, which is never permuted.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidBasis, PrefixSumDegenerate, ZeroSum
from .kendall import geodesic, geodesic_jvp, is_regular, shape_distance, to_preshape

PREFIX_TOL = 1e-9


@dataclass(frozen=True)
class BasisSet:
    """Ordered basis of 3D pre-shapes, stacked as an ``(n, 3, k)`` array."""
    shapes: np.ndarray
    labels: tuple = field(default=None)

    def __post_init__(self):
        shapes = np.asarray(self.shapes, dtype=float)
        if shapes.ndim != 3 or shapes.shape[1] != 3 or shapes.shape[0] < 1:
            raise InvalidBasis(f"expected an (n, 3, k) stack, got {shapes.shape}")
        shapes.setflags(write=False)
        object.__setattr__(self, "shapes", shapes)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(shapes):
                raise InvalidBasis("one label per basis shape required")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def from_configurations(cls, configs, labels=None, validate=True):
        """Build a basis from raw 3 x k configurations (converted to pre-shapes)."""
        basis = cls(np.stack([to_preshape(c) for c in configs]), labels)
        if validate:
            basis.validate()
        return basis

    @property
    def n(self):
        return self.shapes.shape[0]

    @property
    def k(self):
        return self.shapes.shape[2]

    def validate(self, distinct_tol=1e-8):
        """Check regularity and pairwise distinctness of the basis shapes."""
        for i, b in enumerate(self.shapes):
            if not is_regular(b):
                raise InvalidBasis(f"basis shape {i} is singular (collinear landmarks)")
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if shape_distance(self.shapes[i], self.shapes[j]) <= distinct_tol:
                    raise InvalidBasis(f"basis shapes {i} and {j} coincide")
        return self

    def __len__(self):
        return self.n


def check_weights(w) -> np.ndarray:
    """Return ``w`` as an array after checking every prefix sum is nonzero."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or len(w) == 0:
        raise ValueError("weights must be a nonempty vector")
    prefix = np.cumsum(w)
    bad = np.flatnonzero(np.abs(prefix) <= PREFIX_TOL)
    if len(bad):
        raise PrefixSumDegenerate(int(bad[0]), float(prefix[bad[0]]))
    return w


def geodesic_parameters(w) -> np.ndarray:
    """Step parameters ``w_j / sum_{l<=j} w_l`` of the recursion."""
    w = check_weights(w)
    return w / np.cumsum(w)


def normalize_weights(w) -> np.ndarray:
    """Divide the weights by their sum."""
    w = np.asarray(w, dtype=float)
    total = w.sum()
    if abs(total) <= PREFIX_TOL:
        raise ZeroSum(f"weights sum to {total:.3g}")
    return w / total


def _shapes(basis):
    return basis.shapes if isinstance(basis, BasisSet) else np.asarray(basis, dtype=float)


def inductive_mean(basis, w) -> np.ndarray:
    """Shape reached by the inductive weighted-mean recursion.

    Args:
        basis: a :class:`BasisSet` or an ``(n, 3, k)`` array of pre-shapes.
        w: n weights with nonzero prefix sums.

    Returns:
        A pre-shape in the frame of ``b_1``.

    Raises:
        PrefixSumDegenerate: some prefix sum is (numerically) zero.
        AntipodalShapes: an intermediate mean is antipodal to the next basis shape.
    """
    B = _shapes(basis)
    t = geodesic_parameters(w)
    if len(t) != len(B):
        raise ValueError(f"{len(t)} weights for {len(B)} basis shapes")
    mu = B[0].copy()
    for j in range(1, len(B)):
        if t[j] != 0.0:
            mu = geodesic(mu, B[j], t[j])
    return mu


def inductive_mean_jvp(basis, w, dw):
    """Inductive mean and its derivatives along the rows of ``dw`` (shape (d, n))."""
    B = _shapes(basis)
    w = check_weights(w)
    dw = np.atleast_2d(np.asarray(dw, dtype=float))
    S = np.cumsum(w)
    dS = np.cumsum(dw, axis=1)
    mu = B[0].copy()
    dmu = np.zeros((dw.shape[0],) + mu.shape)
    zero = np.zeros_like(dmu)
    for j in range(1, len(B)):
        t = w[j] / S[j]
        dt = (dw[:, j] * S[j] - w[j] * dS[:, j]) / S[j] ** 2
        mu, dmu = geodesic_jvp(mu, B[j], t, dmu, zero, dt)
    return mu, dmu
