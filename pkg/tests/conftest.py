import numpy as np
import pytest

from qvdp import DensityMatrix, FockSpace


def random_density(space: FockSpace, rng: np.random.Generator) -> DensityMatrix:
    """Full-rank random state (Ginibre ensemble)."""
    n = space.size
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    return DensityMatrix(space, rho / np.trace(rho).real)


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.conj().T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
