import numpy as np
import pytest
import scipy.sparse as sp

from sketchipm.shared.errors import AsymmetricMatrix, DimensionMismatch, NonFiniteInput
from sketchipm.shared.linalg.kernels import (
    as_sparse_mat,
    scaled_gram,
    spmv,
    spmv_t,
    sym_eig_extremes,
    thin_svd,
)

from conftest import random_sparse


class TestSpmv:
    def test_identity(self):
        np.testing.assert_array_equal(spmv(sp.identity(3, format="csr"), np.array([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])

    def test_zero_matrix(self):
        assert not np.any(spmv(sp.csr_matrix((4, 6)), np.arange(6.0)))

    def test_matches_dense_product(self, rng):
        a = random_sparse(5, 9, 0.4, seed=1)
        x = rng.standard_normal(9)
        np.testing.assert_allclose(spmv(a, x), a.toarray() @ x, rtol=0, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            spmv(sp.identity(3, format="csr"), np.ones(4))


class TestSpmvT:
    def test_identity(self):
        y = np.array([0.5, -1.0, 2.0])
        np.testing.assert_array_equal(spmv_t(sp.identity(3, format="csr"), y), y)

    def test_row_vector(self):
        a = sp.csr_matrix(np.array([[2.0, 3.0]]))
        np.testing.assert_array_equal(spmv_t(a, np.array([1.0])), [2.0, 3.0])

    def test_matches_dense_product(self, rng):
        a = random_sparse(5, 9, 0.4, seed=2)
        y = rng.standard_normal(5)
        np.testing.assert_allclose(spmv_t(a, y), a.toarray().T @ y, rtol=0, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            spmv_t(sp.identity(3, format="csr"), np.ones(2))


@pytest.mark.parametrize("seed", range(5))
def test_adjoint_identity(seed):
    rng = np.random.default_rng(seed)
    a = random_sparse(7, 30, 0.2, seed=seed)
    x = rng.standard_normal(30)
    y = rng.standard_normal(7)
    lhs = y @ spmv(a, x)
    rhs = spmv_t(a, y) @ x
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_as_sparse_mat_sorts_and_sums():
    a = sp.csr_matrix((np.array([1.0, 2.0, 3.0]), np.array([2, 0, 2]), np.array([0, 3])), shape=(1, 3))
    canonical = as_sparse_mat(a)
    assert canonical.has_sorted_indices
    np.testing.assert_array_equal(canonical.toarray(), [[2.0, 0.0, 4.0]])


def test_scaled_gram_matches_dense(rng):
    a = random_sparse(4, 12, 0.5, seed=3)
    d = rng.uniform(0.1, 3.0, 12)
    dense = a.toarray()
    np.testing.assert_allclose(scaled_gram(a, d), dense @ np.diag(d ** 2) @ dense.T, rtol=1e-12, atol=1e-12)


class TestThinSvd:
    def test_padded_identity(self):
        m = np.hstack([np.eye(3), np.zeros((3, 2))])
        np.testing.assert_allclose(thin_svd(m).sigma, [1.0, 1.0, 1.0], atol=1e-14)

    def test_padded_diagonal(self):
        m = np.hstack([np.diag([4.0, 3.0]), np.zeros((2, 2))])
        np.testing.assert_allclose(thin_svd(m).sigma, [4.0, 3.0], atol=1e-14)

    def test_random_reconstruction_and_orthonormality(self, rng):
        m = rng.standard_normal((4, 10))
        svd = thin_svd(m)
        assert np.linalg.norm(svd.reconstruct() - m) <= 1e-10 * np.linalg.norm(m)
        assert np.max(np.abs(svd.u.T @ svd.u - np.eye(4))) <= 1e-10
        assert np.max(np.abs(svd.vt @ svd.vt.T - np.eye(4))) <= 1e-10
        assert np.all(np.diff(svd.sigma) <= 0.0)

    def test_sign_convention(self, rng):
        svd = thin_svd(rng.standard_normal((5, 8)))
        for column in svd.u.T:
            first = column[np.flatnonzero(column)[0]]
            assert first >= 0.0

    def test_deterministic(self, rng):
        m = rng.standard_normal((3, 7))
        first, second = thin_svd(m), thin_svd(m.copy())
        np.testing.assert_array_equal(first.u, second.u)
        np.testing.assert_array_equal(first.vt, second.vt)

    def test_rejects_tall_and_non_finite(self):
        with pytest.raises(DimensionMismatch):
            thin_svd(np.ones((4, 2)))
        bad = np.ones((2, 3))
        bad[0, 1] = np.nan
        with pytest.raises(NonFiniteInput):
            thin_svd(bad)


class TestSymEigExtremes:
    def test_identity(self):
        assert sym_eig_extremes(np.eye(4)) == pytest.approx((1.0, 1.0))

    def test_diagonal(self):
        assert sym_eig_extremes(np.diag([1.0, 10.0])) == pytest.approx((1.0, 10.0))

    def test_random_spd_against_full_eigensolve(self, rng):
        g = rng.standard_normal((6, 6))
        b = g @ g.T + 0.5 * np.eye(6)
        eigenvalues = np.linalg.eigvalsh(b)
        lo, hi = sym_eig_extremes(b)
        assert lo == pytest.approx(eigenvalues[0], rel=1e-8)
        assert hi == pytest.approx(eigenvalues[-1], rel=1e-8)

    def test_brackets_rayleigh_quotients(self, rng):
        g = rng.standard_normal((6, 6))
        b = g + g.T
        lo, hi = sym_eig_extremes(b)
        for _ in range(100):
            v = rng.standard_normal(6)
            quotient = v @ b @ v / (v @ v)
            assert lo - 1e-10 <= quotient <= hi + 1e-10

    def test_rejects_asymmetric(self):
        with pytest.raises(AsymmetricMatrix):
            sym_eig_extremes(np.array([[1.0, 2.0], [0.0, 1.0]]))
