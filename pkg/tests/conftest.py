"""
Shared fixtures for the sketchipm test suite
"""

import numpy as np
import pytest
import scipy.sparse as sp

from sketchipm.shared.models.core import LpProblem, SyntheticRecipe, SyntheticSpec
from sketchipm.shared.persistence.datasets import gen_synthetic


def random_sparse(m: int, n: int, density: float, seed: int) -> sp.csr_matrix:
    """Random CSR matrix with a nonzero in every row"""
    rng = np.random.default_rng(seed)
    a = sp.random(m, n, density=density, format="csr", random_state=rng)
    a = a + sp.diags(1.0 + rng.random(min(m, n)), shape=(m, n))
    return sp.csr_matrix(a)


def orthonormal_rows(m: int, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, m)))
    return q.T


def feasible_lp(m: int, n: int, seed: int, density: float = 0.3) -> LpProblem:
    return gen_synthetic(SyntheticSpec(m=m, n=n, density=density, seed=seed, recipe=SyntheticRecipe.FEASIBLE))


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def trivial_lp() -> LpProblem:
    """min x s.t. x = 1, x >= 0"""
    return LpProblem(a=sp.csr_matrix(np.array([[1.0]])), b=np.array([1.0]), c=np.array([1.0]))


@pytest.fixture
def small_lp() -> LpProblem:
    return feasible_lp(m=5, n=40, seed=11, density=0.4)
