import numpy as np
import pytest

from romae import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # pay the jit compile cost once, outside any timed assertion
    kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class FakeRng:
    """Scripted stand-in for numpy Generator in oracle tests."""

    def __init__(self, normals=(), uniforms=(), integers=()):
        self._normals = list(normals)
        self._uniforms = list(uniforms)
        self._integers = list(integers)

    def standard_normal(self):
        return self._normals.pop(0) if self._normals else 0.0

    def random(self):
        return self._uniforms.pop(0) if self._uniforms else 0.0

    def integers(self, low, high):
        return self._integers.pop(0) if self._integers else low


@pytest.fixture
def fake_rng():
    return FakeRng
