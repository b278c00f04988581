import numpy as np
import pytest

from conftest import nearby_basis, random_preshape, random_rotation
from kss3d.barycentric import (BasisSet, geodesic_parameters, inductive_mean,
                               inductive_mean_jvp, normalize_weights)
from kss3d.errors import InvalidBasis, PrefixSumDegenerate, ZeroSum
from kss3d.kendall import frechet_mean, geodesic, shape_distance, to_preshape


def test_single_shape(rng):
    B = nearby_basis(rng, 1)
    assert np.array_equal(inductive_mean(B, [3.7]), B[0])
    assert np.array_equal(inductive_mean(B, [-1.0]), B[0])


def test_indicator_of_first(rng):
    B = nearby_basis(rng, 5)
    assert np.array_equal(inductive_mean(B, [1, 0, 0, 0, 0]), B[0])


def test_two_point_midpoint(rng):
    B = nearby_basis(rng, 2)
    mu = inductive_mean(B, [0.5, 0.5])
    assert abs(shape_distance(mu, B[0]) - shape_distance(mu, B[1])) < 1e-9
    assert shape_distance(mu, geodesic(B[0], B[1], 0.5)) < 1e-12


def test_matches_karcher_flow_in_small_ball(rng):
    worst = 0.0
    for _ in range(10):
        c = random_preshape(rng, k=12)
        shapes = [to_preshape(c + 0.01 * rng.standard_normal(c.shape)) for _ in range(3)]
        assert max(shape_distance(c, s) for s in shapes) < 0.1
        mu = inductive_mean(np.stack(shapes), np.ones(3) / 3)
        worst = max(worst, shape_distance(mu, frechet_mean(shapes)))
    assert worst < 1e-3


def test_scale_invariance(rng):
    B = nearby_basis(rng, 4)
    w = rng.standard_normal(4) + 1.5
    a = inductive_mean(B, w)
    assert np.abs(a - inductive_mean(B, normalize_weights(w))).max() < 1e-12
    assert np.abs(a - inductive_mean(B, -2.5 * w)).max() < 1e-12


def test_depends_on_order(rng):
    B = nearby_basis(rng, 3)
    w = np.array([0.2, 0.3, 0.5])
    assert shape_distance(inductive_mean(B, w), inductive_mean(B[::-1], w[::-1])) > 1e-6


def test_negative_weights_extrapolate(rng):
    B = nearby_basis(rng, 2)
    mu = inductive_mean(B, [1.5, -0.5])
    d = shape_distance(B[0], B[1])
    assert abs(shape_distance(mu, B[0]) - 0.5 * d) < 1e-9
    assert abs(shape_distance(mu, B[1]) - 1.5 * d) < 1e-9


def test_prefix_sum_guard(rng):
    B = nearby_basis(rng, 3)
    with pytest.raises(PrefixSumDegenerate) as info:
        inductive_mean(B, [1.0, -1.0, 0.5])
    assert info.value.index == 1
    with pytest.raises(PrefixSumDegenerate):
        inductive_mean(B, [0.0, 1.0, 1.0])


def test_normalize():
    assert np.allclose(normalize_weights([2, 2]), [0.5, 0.5])
    assert np.array_equal(normalize_weights([1, 0, 0]), [1, 0, 0])
    with pytest.raises(ZeroSum):
        normalize_weights([1, -1])


def test_geodesic_parameters():
    assert np.allclose(geodesic_parameters([1, 1, 2]), [1, 0.5, 0.5])


def test_jvp_matches_finite_differences(rng):
    B = nearby_basis(rng, 5)
    w = rng.dirichlet(np.ones(5))
    mu, dmu = inductive_mean_jvp(B, w, np.eye(5))
    assert np.allclose(mu, inductive_mean(B, w), atol=1e-14)
    h = 1e-6
    for i in range(5):
        e = np.zeros(5)
        e[i] = h
        fd = (inductive_mean(B, w + e) - inductive_mean(B, w - e)) / (2 * h)
        assert np.abs(fd - dmu[i]).max() < 1e-7


class TestBasisSet:
    def test_from_configurations(self, rng):
        configs = [5 * rng.standard_normal((3, 9)) + 2 for _ in range(3)]
        b = BasisSet.from_configurations(configs, ["a", "b", "c"])
        assert (b.n, b.k, len(b)) == (3, 9, 3)
        assert np.allclose(np.linalg.norm(b.shapes, axis=(1, 2)), 1)
        assert not b.shapes.flags.writeable

    def test_rejects_duplicates(self, rng):
        X = random_preshape(rng)
        with pytest.raises(InvalidBasis):
            BasisSet.from_configurations([X, random_rotation(rng) @ X])

    def test_rejects_singular(self, rng):
        line = np.vstack([np.arange(6.0), np.zeros(6), np.zeros(6)])
        with pytest.raises(InvalidBasis):
            BasisSet.from_configurations([rng.standard_normal((3, 6)), line])

    def test_rejects_mixed_k(self, rng):
        with pytest.raises((InvalidBasis, ValueError)):
            BasisSet.from_configurations([rng.standard_normal((3, 6)),
                                          rng.standard_normal((3, 7))])
