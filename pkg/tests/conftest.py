import numpy as np
import pytest

I2 = np.eye(2)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)
HADAMARD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def unit(i, j, n=2):
    e = np.zeros((n, n), dtype=complex)
    e[i, j] = 1
    return e


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
