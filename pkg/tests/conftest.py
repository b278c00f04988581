import numpy as np
import pytest

from kss3d.kendall import to_preshape


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng, m=3):
    Q, R = np.linalg.qr(rng.standard_normal((m, m)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_preshape(rng, m=3, k=10):
    return to_preshape(rng.standard_normal((m, k)))


def nearby_basis(rng, n, k=15, spread=0.3):
    base = rng.standard_normal((3, k))
    return np.stack([to_preshape(base + spread * rng.standard_normal((3, k))) for _ in range(n)])
