"""
Inner Solvers

Iterative solvers for the (preconditioned) normal equations
op z = rhs, all started from z = 0. The residual reported at step j is the
true residual f_j = op z_j - rhs, recomputed from scratch every iteration, and
every solver stops once ||f_j|| <= tol * ||rhs|| or after t_max steps.
"""

import logging
import math
from typing import Callable, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from ...shared.errors import InnerSolverBreakdown, InnerSolverDiverged, InvalidParameter
from ...shared.models.core import InnerSolveReport, InnerSolverKind

logger = logging.getLogger(__name__)

LinearMap = Callable[[np.ndarray], np.ndarray]
Operator = Union[LinearMap, np.ndarray, sp.spmatrix]

MAX_CONSECUTIVE_GROWTH = 5


def as_linear_map(op: Operator) -> LinearMap:
    """Accept a matrix or a callable and return a callable"""
    if callable(op):
        return op
    if sp.issparse(op):
        return lambda z: np.asarray(op @ z).ravel()
    matrix = np.asarray(op, dtype=np.float64)
    return lambda z: matrix @ z


def _start(kind: InnerSolverKind, rhs: np.ndarray) -> Tuple[np.ndarray, InnerSolveReport, float]:
    rhs_norm = float(np.linalg.norm(rhs))
    report = InnerSolveReport(solver=kind, residual_history=[rhs_norm], final_residual=-rhs.copy())
    return np.zeros_like(rhs), report, rhs_norm


def pcg_solve(
    op: Operator,
    rhs: np.ndarray,
    t_max: int,
    tol: float,
    callback: Optional[Callable[[np.ndarray], None]] = None,
    kind: InnerSolverKind = InnerSolverKind.PCG,
) -> Tuple[np.ndarray, InnerSolveReport]:
    """
    Conjugate gradient on an SPD operator

    The recursive residual drives the search directions; the stopping test
    and the reported history use the recomputed one.
    """
    apply_op = as_linear_map(op)
    rhs = np.asarray(rhs, dtype=np.float64)
    z, report, rhs_norm = _start(kind, rhs)
    threshold = tol * rhs_norm

    if rhs_norm <= threshold:
        report.converged = True
        return z, report

    r = rhs.copy()
    direction = r.copy()
    rr = float(r @ r)

    for j in range(1, t_max + 1):
        q = apply_op(direction)
        curvature = float(direction @ q)
        if curvature <= 0.0:
            raise InnerSolverBreakdown(f"non-positive curvature {curvature:.3e} at CG step {j}")

        alpha = rr / curvature
        z = z + alpha * direction
        r = r - alpha * q

        f = apply_op(z) - rhs
        f_norm = float(np.linalg.norm(f))
        report.iterations = j
        report.residual_history.append(f_norm)
        report.final_residual = f
        report.step_sizes.append(alpha)
        if callback is not None:
            callback(z)

        if f_norm <= threshold:
            report.converged = True
            break

        rr_next = float(r @ r)
        if rr_next == 0.0:
            break
        direction = r + (rr_next / rr) * direction
        rr = rr_next

    logger.debug("%s: %d iterations, residual %.3e", kind.value, report.iterations, report.residual_history[-1])
    return z, report


def richardson_solve(
    op: Operator,
    q_inv_half: LinearMap,
    p: np.ndarray,
    t_max: int,
    tol: float,
    callback: Optional[Callable[[np.ndarray], None]] = None,
) -> Tuple[np.ndarray, InnerSolveReport]:
    """
    Preconditioned Richardson iteration z <- z + Q^{-1/2}(p - AD^2A^T Q^{-1/2} z)

    In terms of the preconditioned operator this is z <- z - f, so the
    residual obeys f_j = (I - op) f_{j-1}.
    """
    apply_op = as_linear_map(op)
    rhs = np.asarray(q_inv_half(np.asarray(p, dtype=np.float64)), dtype=np.float64)
    z, report, rhs_norm = _start(InnerSolverKind.RICHARDSON, rhs)
    threshold = tol * rhs_norm

    if rhs_norm <= threshold:
        report.converged = True
        return z, report

    f = -rhs
    growth = 0
    for j in range(1, t_max + 1):
        z = z - f
        f = apply_op(z) - rhs
        f_norm = float(np.linalg.norm(f))

        growth = growth + 1 if f_norm > report.residual_history[-1] else 0
        report.iterations = j
        report.residual_history.append(f_norm)
        report.final_residual = f
        if callback is not None:
            callback(z)

        if f_norm <= threshold:
            report.converged = True
            break
        if growth >= MAX_CONSECUTIVE_GROWTH:
            raise InnerSolverDiverged(
                f"Richardson residual grew on {growth} consecutive steps (now {f_norm:.3e})"
            )

    logger.debug("richardson: %d iterations, residual %.3e", report.iterations, report.residual_history[-1])
    return z, report


def sd_solve(
    op: Operator,
    rhs: np.ndarray,
    t_max: int,
    tol: float,
    callback: Optional[Callable[[np.ndarray], None]] = None,
) -> Tuple[np.ndarray, InnerSolveReport]:
    """Steepest descent with exact line search; step sizes land in report.step_sizes"""
    apply_op = as_linear_map(op)
    rhs = np.asarray(rhs, dtype=np.float64)
    z, report, rhs_norm = _start(InnerSolverKind.SD, rhs)
    threshold = tol * rhs_norm

    if rhs_norm <= threshold:
        report.converged = True
        return z, report

    f = -rhs
    for j in range(1, t_max + 1):
        q = apply_op(f)
        denominator = float(f @ q)
        if denominator == 0.0:
            report.converged = True
            break
        if denominator < 0.0:
            raise InnerSolverBreakdown(f"non-positive curvature {denominator:.3e} at SD step {j}")

        alpha = float(f @ f) / denominator
        z = z - alpha * f
        f = apply_op(z) - rhs
        f_norm = float(np.linalg.norm(f))

        report.iterations = j
        report.residual_history.append(f_norm)
        report.final_residual = f
        report.step_sizes.append(alpha)
        if callback is not None:
            callback(z)

        if f_norm <= threshold:
            report.converged = True
            break

    logger.debug("sd: %d iterations, residual %.3e", report.iterations, report.residual_history[-1])
    return z, report


def theoretical_inner_iters(n: int, gamma: float, sigma: float, zeta: float) -> int:
    """
    Inner iteration count that keeps the normal-equation residual small
    enough for the outer iteration bound:

        t = ceil( log(4 sqrt(6n) psi / (gamma sigma)) / log(1/zeta) )
        psi = 9n / sqrt(1-gamma) + sigma sqrt(n / (1-gamma)) + sqrt(n)
    """
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    if not 0.0 < gamma < 1.0:
        raise InvalidParameter(f"gamma must lie in (0, 1), got {gamma}")
    if not 0.0 < sigma < 0.8:
        raise InvalidParameter(f"sigma must lie in (0, 4/5), got {sigma}")
    if not 0.0 < zeta < 0.999:
        raise InvalidParameter(f"zeta must lie in (0, 0.999), got {zeta}")

    psi = psi_bound(n, gamma, sigma)
    return math.ceil(math.log(4.0 * math.sqrt(6.0 * n) * psi / (gamma * sigma)) / math.log(1.0 / zeta))


def psi_bound(n: int, gamma: float, sigma: float) -> float:
    """9n/sqrt(1-gamma) + sigma sqrt(n/(1-gamma)) + sqrt(n)"""
    return 9.0 * n / math.sqrt(1.0 - gamma) + sigma * math.sqrt(n / (1.0 - gamma)) + math.sqrt(n)
