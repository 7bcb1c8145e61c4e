"""
Preconditioning Engine

Q = ADW W^T D A^T is kept in factored form through the thin SVD
ADW = U_Q diag(sigma_half) V_hat^T, so that

    Q^{-1/2} = U_Q diag(1 / sigma_half) U_Q^T
    (ADW)^+  = V_hat diag(1 / sigma_half) U_Q^T

The m x m inverse root is never materialized.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ...shared.errors import DimensionMismatch, InvalidParameter, RankDeficient
from ...shared.linalg.kernels import scaled_gram, spmv, spmv_t, sym_eig_extremes, thin_svd
from ..sketching.engine import SketchMatrix, apply_sketch_right

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Preconditioner:
    """Factored sketch preconditioner"""
    u_q: np.ndarray         # m x m
    sigma_half: np.ndarray  # singular values of ADW, nonincreasing
    v_hat: np.ndarray       # w x m, orthonormal columns
    sketch: SketchMatrix

    @property
    def m(self) -> int:
        return self.u_q.shape[0]

    def q_matrix(self) -> np.ndarray:
        """Dense Q, for diagnostics"""
        return (self.u_q * self.sigma_half ** 2) @ self.u_q.T

    def q_inv_half_matrix(self) -> np.ndarray:
        """Dense Q^{-1/2}, for diagnostics"""
        return (self.u_q / self.sigma_half) @ self.u_q.T


def build_preconditioner(a: sp.spmatrix, d: np.ndarray, sketch: SketchMatrix) -> Preconditioner:
    """Sketch AD, take its thin SVD and certify full row rank"""
    d = np.asarray(d, dtype=np.float64)
    m, n = a.shape
    if sketch.n != n:
        raise DimensionMismatch(f"sketch has {sketch.n} rows, A has {n} columns")
    if sketch.w < m:
        raise DimensionMismatch(f"sketch width {sketch.w} is below the row count {m}")
    if d.shape != (n,) or not np.all(d > 0.0):
        raise InvalidParameter("scaling d must be a strictly positive vector of length n")

    svd = thin_svd(apply_sketch_right(a, d, sketch))
    sigma_max = float(svd.sigma[0]) if m else 0.0
    sigma_min = float(svd.sigma[-1]) if m else 0.0
    if sigma_min <= RANK_RTOL * sigma_max or sigma_max == 0.0:
        raise RankDeficient(
            f"ADW is numerically rank deficient (sigma_min={sigma_min:.3e}, sigma_max={sigma_max:.3e})",
            sigma_min=sigma_min,
            sigma_max=sigma_max,
        )

    logger.debug("preconditioner built: m=%d w=%d sigma in [%.3e, %.3e]", m, sketch.w, sigma_min, sigma_max)
    return Preconditioner(u_q=svd.u, sigma_half=svd.sigma, v_hat=svd.vt.T, sketch=sketch)


def _check_length(precond: Preconditioner, r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (precond.m,):
        raise DimensionMismatch(f"expected vector of length {precond.m}, got {r.shape}")
    return r


def apply_Q_inv_half(precond: Preconditioner, r: np.ndarray) -> np.ndarray:
    r = _check_length(precond, r)
    return precond.u_q @ ((precond.u_q.T @ r) / precond.sigma_half)


def apply_precond_normal_op(precond: Preconditioner, a: sp.spmatrix, d: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Q^{-1/2} A D^2 A^T Q^{-1/2} z via one spmv_t and one spmv"""
    t = apply_Q_inv_half(precond, z)
    u = spmv_t(a, t)
    u *= d ** 2
    return apply_Q_inv_half(precond, spmv(a, u))


def apply_ADW_pinv(precond: Preconditioner, r: np.ndarray) -> np.ndarray:
    """Minimum-norm solution u of (ADW) u = r"""
    r = _check_length(precond, r)
    return precond.v_hat @ ((precond.u_q.T @ r) / precond.sigma_half)


def precond_condition_number(precond: Preconditioner, a: sp.spmatrix, d: np.ndarray) -> float:
    """
    kappa(Q^{-1/2} A D) = sqrt(lambda_max / lambda_min) of the preconditioned
    normal operator

    The spectrum is taken from diag(1/sigma) U^T (AD^2A^T) U diag(1/sigma),
    which is similar to Q^{-1/2} AD^2A^T Q^{-1/2}.
    """
    gram = scaled_gram(a, d)
    rotated = precond.u_q.T @ gram @ precond.u_q
    operator = rotated / np.outer(precond.sigma_half, precond.sigma_half)
    lam_min, lam_max = sym_eig_extremes(0.5 * (operator + operator.T))
    if lam_min <= 0.0:
        return math.inf
    return math.sqrt(lam_max / lam_min)
