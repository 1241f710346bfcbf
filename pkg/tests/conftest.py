"""Shared test fixtures and hypothesis configuration."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sohb.rng import make_rng

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng():
    """Deterministic generator; tests that need several streams call make_rng."""
    return make_rng(20260816, 0)


@pytest.fixture
def random_rotations(rng):
    def _make(n):
        from sohb.micro import sample_uniform_rot

        return sample_uniform_rot(rng, size=n)

    return _make


def assert_rotation(a, tol=1e-10):
    """Assert orthogonality and unit determinant of a stack of matrices."""
    a = np.asarray(a)
    eye = np.broadcast_to(np.eye(3), a.shape)
    np.testing.assert_allclose(a @ np.swapaxes(a, -1, -2), eye, atol=tol)
    assert np.all(np.linalg.det(a) > 0)
