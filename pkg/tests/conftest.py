import numpy as np
import pytest

from pwlpid import SimConfig, builtin, kuhn_partition


@pytest.fixture
def example1():
    return builtin("example1")


@pytest.fixture
def example2():
    return builtin("example2")


@pytest.fixture
def part6():
    """The h=6 partition of [-3, 3] used throughout the worked example."""
    return kuhn_partition(((-3.0,), (3.0,)), [6])


@pytest.fixture
def fast_cfg():
    """Shorter horizon for property tests that do not pin reference values."""
    return SimConfig(horizon=4.0)


def random_simplex(rng, n, scale=1.0):
    """Random non-degenerate n-simplex vertices (n+1, n)."""
    while True:
        verts = rng.uniform(-scale, scale, size=(n + 1, n))
        edges = verts[1:] - verts[0]
        if abs(np.linalg.det(edges)) > 1e-3 * scale ** n:
            return verts
