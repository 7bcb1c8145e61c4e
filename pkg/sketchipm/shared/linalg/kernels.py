"""
Matrix kernels

Sparse products with A and A^T, the small dense SVD of the sketched matrix,
and extreme eigenvalues of symmetric m x m matrices. Everything above this
layer works through these functions.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ..errors import AsymmetricMatrix, DimensionMismatch, NonFiniteInput

SYMMETRY_RTOL = 1e-8


def as_sparse_mat(a) -> sp.csr_matrix:
    """Canonical CSR storage: float64, duplicates summed, sorted column indices"""
    mat = sp.csr_matrix(a, dtype=np.float64)
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def spmv(a: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    """Ax"""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"spmv: A is {a.shape[0]}x{a.shape[1]}, x has shape {x.shape}")
    return np.asarray(a @ x).ravel()


def spmv_t(a: sp.spmatrix, y: np.ndarray) -> np.ndarray:
    """A^T y"""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"spmv_t: A is {a.shape[0]}x{a.shape[1]}, y has shape {y.shape}")
    return np.asarray(a.T @ y).ravel()


def scaled_gram(a: sp.spmatrix, d: np.ndarray) -> np.ndarray:
    """Dense A diag(d)^2 A^T, built through the sparse product"""
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (a.shape[1],):
        raise DimensionMismatch(f"scaling has shape {d.shape}, A has {a.shape[1]} columns")
    scaled = sp.csr_matrix(a) @ sp.diags(d)
    gram = (scaled @ scaled.T).toarray()
    return 0.5 * (gram + gram.T)


@dataclass(frozen=True, eq=False)
class ThinSvd:
    """M = U diag(sigma) Vt with U square orthonormal and Vt row-orthonormal"""
    u: np.ndarray      # rows x rows
    sigma: np.ndarray  # nonincreasing, nonnegative
    vt: np.ndarray     # rows x cols

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.vt


def thin_svd(m: np.ndarray) -> ThinSvd:
    """
    Thin SVD of a short-and-fat dense matrix

    Signs are fixed so the first nonzero entry of every left singular vector
    is nonnegative, which makes the factors reproducible for a given input.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatch(f"thin_svd expects a matrix, got shape {m.shape}")
    rows, cols = m.shape
    if rows > cols:
        raise DimensionMismatch(f"thin_svd expects rows <= cols, got {rows}x{cols}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteInput("thin_svd input contains NaN or inf")

    u, sigma, vt = np.linalg.svd(m, full_matrices=False)

    # Sign convention
    first_nonzero = np.argmax(np.abs(u) > 0.0, axis=0)
    signs = np.sign(u[first_nonzero, np.arange(rows)])
    signs[signs == 0] = 1.0
    u = u * signs
    vt = vt * signs[:, None]

    return ThinSvd(u=u, sigma=sigma, vt=vt)


def sym_eig_extremes(b: np.ndarray) -> Tuple[float, float]:
    """(lambda_min, lambda_max) of a symmetric matrix"""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionMismatch(f"sym_eig_extremes expects a square matrix, got {b.shape}")
    if not np.all(np.isfinite(b)):
        raise NonFiniteInput("sym_eig_extremes input contains NaN or inf")

    scale = max(1.0, float(np.max(np.abs(b)))) if b.size else 1.0
    asymmetry = float(np.max(np.abs(b - b.T))) if b.size else 0.0
    if asymmetry > SYMMETRY_RTOL * scale:
        raise AsymmetricMatrix(f"matrix asymmetric by {asymmetry:.3e} (tolerance {SYMMETRY_RTOL * scale:.3e})")

    eigenvalues = scipy.linalg.eigh(0.5 * (b + b.T), eigvals_only=True)
    return float(eigenvalues[0]), float(eigenvalues[-1])
