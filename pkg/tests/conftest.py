import numpy as np
import pytest

from mbesbench.core import PointCloud, RigidTransform


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng) -> np.ndarray:
    """Uniform-ish random proper rotation via QR."""
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_transform(rng, t_scale: float = 10.0) -> RigidTransform:
    return RigidTransform(random_rotation(rng), rng.uniform(-t_scale, t_scale, 3))


def random_cloud(rng, n: int = 100, scale: float = 50.0) -> PointCloud:
    return PointCloud(rng.uniform(-scale, scale, (n, 3)))
