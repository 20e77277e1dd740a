import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "lungprep",
    max_examples=50,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("lungprep")


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Push one call through every hot kernel before any test runs.

    On the jitted backend this front-loads compilation so timed blocks
    in the acceptance suite measure execution, not compiler startup.
    """
    from lungprep import _kernels

    rng = np.random.default_rng(0)
    img = rng.random((8, 8))
    padded = np.pad(img, 1, mode="edge")
    _kernels.conv2d_padded(padded, np.ones((3, 3)))
    _kernels.median2d_padded(padded, 3)
    mask = img > 0.5
    _kernels.dilate_once(mask)
    _kernels.fill_holes(mask)
    _kernels.largest_component(mask)
    vs = np.sort(rng.random(32))
    _kernels.scan_split(vs, np.asarray(rng.normal(size=32)), np.full(32, 0.25), 2)
    yield
