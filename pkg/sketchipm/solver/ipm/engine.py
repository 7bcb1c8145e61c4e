"""
Sketched Infeasible IPM

Long-step infeasible primal-dual interior point method. Every outer iteration
draws a fresh sketch W, solves the normal equations AD^2A^T dy = p inexactly
with a sketch-preconditioned inner solver, and adds a perturbation vector v to
the primal step so that A dx = -r_p holds exactly despite the inexact solve.
That keeps the residuals collinear with the initial residual, which the
neighborhood below relies on.

    N(gamma) = { x_i s_i >= (1 - gamma) mu  and  ||r|| / ||r0|| <= mu / mu0 }
"""

import logging
import math
import time
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ...shared.config import IpmConfig
from ...shared.errors import (
    CorrectionIdentityViolated,
    MaxOuterExceeded,
    RankDeficient,
    SketchIpmError,
    Stalled,
)
from ...shared.linalg.kernels import scaled_gram, spmv, spmv_t, sym_eig_extremes
from ...shared.models.core import (
    Direction,
    InnerMaxPolicy,
    InnerSolveReport,
    InnerSolverKind,
    Iterate,
    LpProblem,
    MonitorCheck,
    OuterStep,
    OuterTrace,
    SolveStatus,
)
from ..inner.engine import pcg_solve, psi_bound, richardson_solve, sd_solve, theoretical_inner_iters
from ..preconditioning.engine import (
    Preconditioner,
    apply_ADW_pinv,
    apply_precond_normal_op,
    apply_Q_inv_half,
    build_preconditioner,
    precond_condition_number,
)
from ..sketching.engine import build_sketch, default_sketch_spec
from ..transparency.engine import InvariantMonitor, collinearity_gap

logger = logging.getLogger(__name__)

CORRECTION_RTOL = 1e-8
COLLINEARITY_RTOL = 1e-8
PERTURBATION_RTOL = 1e-8
MU_DECREASE_ATOL = 1e-12
BISECTION_WIDTH = 1e-12
DIRECT_REFINEMENT_STEPS = 2
SEED_BOUND = 2 ** 63 - 1


def initial_point(problem: LpProblem, y0: str = "zeros") -> Iterate:
    """x = 1, s = 1 and y = 0 (or 1)"""
    y = np.ones(problem.m) if y0 == "ones" else np.zeros(problem.m)
    return Iterate.from_vectors(problem, np.ones(problem.n), y, np.ones(problem.n))


def compute_rhs_p(problem: LpProblem, iterate: Iterate, sigma: float) -> np.ndarray:
    """p = -r_p - sigma mu A S^{-1} 1 + A x - A D^2 r_d"""
    x, s = iterate.x, iterate.s
    assert np.all(s > 0.0), "slack must be strictly positive"
    a = problem.a
    return (
        -iterate.r_p
        - sigma * iterate.mu * spmv(a, 1.0 / s)
        + spmv(a, x)
        - spmv(a, (x / s) * iterate.r_d)
    )


def inner_iteration_cap(config: IpmConfig, n: int) -> int:
    if config.solver == InnerSolverKind.CG:
        return config.max_inner_unpreconditioned
    if config.inner_max_policy == InnerMaxPolicy.FIXED:
        return config.inner_max_iters
    return theoretical_inner_iters(n, config.gamma, config.sigma, config.zeta)


def _normal_op(a: sp.spmatrix, d: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    d2 = d * d
    return lambda y: spmv(a, d2 * spmv_t(a, y))


def _solve_direct(problem: LpProblem, d: np.ndarray, p: np.ndarray) -> Tuple[np.ndarray, InnerSolveReport]:
    """Cholesky on the dense normal matrix with iterative refinement"""
    gram = scaled_gram(problem.a, d)
    try:
        factor = scipy.linalg.cho_factor(gram)
    except np.linalg.LinAlgError as error:
        raise RankDeficient(f"normal matrix is not numerically positive definite: {error}") from error

    dy = scipy.linalg.cho_solve(factor, p)
    report = InnerSolveReport(solver=InnerSolverKind.DIRECT, residual_history=[float(np.linalg.norm(p))])
    for _ in range(DIRECT_REFINEMENT_STEPS):
        residual = p - gram @ dy
        dy = dy + scipy.linalg.cho_solve(factor, residual)
    report.residual_history.append(float(np.linalg.norm(gram @ dy - p)))
    report.iterations = 1
    report.converged = True
    return dy, report


def build_direction(
    problem: LpProblem,
    iterate: Iterate,
    config: IpmConfig,
    rng: np.random.Generator,
) -> Direction:
    """
    Corrected Newton direction

        dy = Q^{-1/2} z, z from the inner solver
        v  = (XS)^{1/2} W (ADW)^+ (AD^2A^T dy - p)
        ds = -r_d - A^T dy
        dx = -x + sigma mu S^{-1} 1 - D^2 ds - S^{-1} v

    The direct solver skips the sketch and uses v = 0.
    """
    a = problem.a
    x, s = iterate.x, iterate.s
    d = np.sqrt(x / s)
    p = compute_rhs_p(problem, iterate, config.sigma)
    kind = config.solver
    precond: Optional[Preconditioner] = None

    if kind == InnerSolverKind.DIRECT:
        dy, report = _solve_direct(problem, d, p)
    else:
        spec = default_sketch_spec(
            problem.m,
            problem.n,
            zeta=config.zeta,
            delta=config.delta,
            seed=int(rng.integers(SEED_BOUND)),
            kind=config.sketch_kind,
            w=config.sketch_w,
            s=config.sketch_s,
        )
        sketch = build_sketch(problem.n, spec)
        precond = build_preconditioner(a, d, sketch)
        t_max = inner_iteration_cap(config, problem.n)

        def op(z):
            return apply_precond_normal_op(precond, a, d, z)

        def q_inv_half(r):
            return apply_Q_inv_half(precond, r)

        if kind == InnerSolverKind.PCG:
            z, report = pcg_solve(op, q_inv_half(p), t_max, config.tol_cg)
            dy = q_inv_half(z)
        elif kind == InnerSolverKind.RICHARDSON:
            z, report = richardson_solve(op, q_inv_half, p, t_max, config.tol_cg)
            dy = q_inv_half(z)
        elif kind == InnerSolverKind.SD:
            z, report = sd_solve(op, q_inv_half(p), t_max, config.tol_cg)
            dy = q_inv_half(z)
        else:
            dy, report = pcg_solve(_normal_op(a, d), p, t_max, config.tol_cg, kind=InnerSolverKind.CG)

    # Normal-equation residual of the step actually taken
    g = spmv(a, d * d * spmv_t(a, dy)) - p

    if precond is None:
        v = np.zeros(problem.n)
        f_tilde = g
    else:
        v = np.sqrt(x * s) * precond.sketch.apply(apply_ADW_pinv(precond, g))
        f_tilde = apply_Q_inv_half(precond, g)

    ds = -iterate.r_d - spmv_t(a, dy)
    dx = -x + config.sigma * iterate.mu / s - (x / s) * ds - v / s

    correction_residual = float(np.linalg.norm(spmv(a, v / s) - g))
    bound = CORRECTION_RTOL * max(1.0, float(np.linalg.norm(p)))
    if correction_residual > bound:
        raise CorrectionIdentityViolated(
            f"||A S^-1 v - (AD^2A^T dy - p)|| = {correction_residual:.3e} exceeds {bound:.3e}",
            residual=correction_residual,
            bound=bound,
        )

    return Direction(
        dx=dx,
        dy=dy,
        ds=ds,
        v=v,
        report=report,
        p=p,
        f_tilde=f_tilde,
        correction_residual=correction_residual,
        preconditioner=precond,
    )


def neighborhood_contains(
    candidate: Iterate,
    gamma: float,
    mu0: float,
    r0_norm: float,
    r_atol: float = 0.0,
) -> bool:
    """
    Membership in N(gamma), on the candidate's own recomputed residuals

    With r0 = 0 the ratio test reduces to ||r|| <= r_atol.
    """
    x, s = candidate.x, candidate.s
    if not (np.all(x > 0.0) and np.all(s > 0.0)):
        return False
    if not np.all(x * s >= (1.0 - gamma) * candidate.mu):
        return False
    return candidate.residual_norm <= (candidate.mu / mu0) * r0_norm + r_atol


def _first_exit(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Smallest alpha >= 0 at which a alpha^2 + b alpha + c turns negative (inf if never)"""
    a, b, c = (np.atleast_1d(np.asarray(t, dtype=np.float64)) for t in (a, b, c))
    exits = np.full(a.shape, np.inf)
    exits[c < 0.0] = 0.0
    inside = c >= 0.0

    linear = inside & (a == 0.0) & (b < 0.0)
    exits[linear] = -c[linear] / b[linear]

    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b - 4.0 * a * c
        root = np.sqrt(np.maximum(disc, 0.0))
        q = -0.5 * (b + np.copysign(root, b))
        first = q / a
        second = np.where(q != 0.0, c / q, 0.0)
    lo = np.minimum(first, second)
    hi = np.maximum(first, second)

    convex = inside & (a > 0.0) & (disc > 0.0) & (hi > 0.0)
    exits[convex] = np.maximum(lo[convex], 0.0)
    concave = inside & (a < 0.0)
    exits[concave] = np.maximum(hi[concave], 0.0)
    return exits


def _bisect_boundary(
    problem: LpProblem,
    iterate: Iterate,
    direction: Direction,
    hi: float,
    gamma: float,
    mu0: float,
    r0_norm: float,
    r_atol: float,
) -> float:
    """Largest alpha in [0, hi] found inside N(gamma), to BISECTION_WIDTH"""
    lo = 0.0
    while hi - lo > BISECTION_WIDTH:
        mid = 0.5 * (lo + hi)
        if neighborhood_contains(iterate.step(problem, direction, mid), gamma, mu0, r0_norm, r_atol):
            lo = mid
        else:
            hi = mid
    return lo


def max_step_in_neighborhood(
    problem: LpProblem,
    iterate: Iterate,
    direction: Direction,
    gamma: float,
    mu0: float,
    r0_norm: float,
    r_atol: float = 0.0,
) -> float:
    """
    Largest alpha in [0, 1] such that every step in [0, alpha] stays in N(gamma)

    Each proximity condition x_i(a) s_i(a) - (1 - gamma) mu(a) is quadratic in
    the step; so is the ratio condition, since ||r(a)|| = (1 - a) ||r|| along
    a corrected direction. The first exit over all of them is verified on the
    recomputed candidate and refined by bisection if rounding disagrees.
    Returns 0 when no positive step stays inside.
    """
    x, s = iterate.x, iterate.s
    dx, ds = direction.dx, direction.ds
    n = problem.n
    mu = iterate.mu
    lin = (x @ ds + s @ dx) / n
    quad = (dx @ ds) / n

    prox = _first_exit(
        dx * ds - (1.0 - gamma) * quad,
        x * ds + s * dx - (1.0 - gamma) * lin,
        x * s - (1.0 - gamma) * mu,
    )
    mu_exit = _first_exit(quad, lin, mu)

    r_norm = iterate.residual_norm
    ratio = r0_norm / mu0
    residual_exit = _first_exit(ratio * quad, ratio * lin + r_norm, (mu / mu0) * r0_norm + r_atol - r_norm)

    alpha = float(min(1.0, prox.min(initial=np.inf), mu_exit.min(), residual_exit.min()))
    if alpha <= 0.0:
        return 0.0
    if neighborhood_contains(iterate.step(problem, direction, alpha), gamma, mu0, r0_norm, r_atol):
        return alpha
    return _bisect_boundary(problem, iterate, direction, alpha, gamma, mu0, r0_norm, r_atol)


def min_complementarity_step(iterate: Iterate, direction: Direction, alpha_tilde: float) -> float:
    """argmin over [0, alpha_tilde] of (x + a dx)^T (s + a ds)"""
    lin = float(iterate.x @ direction.ds + iterate.s @ direction.dx)
    quad = float(direction.dx @ direction.ds)
    if quad > 0.0:
        return float(np.clip(-lin / (2.0 * quad), 0.0, alpha_tilde))
    # concave or linear: an endpoint
    change = alpha_tilde * lin + alpha_tilde ** 2 * quad
    return alpha_tilde if change < 0.0 else 0.0


def qinvp_norm_bound(precond: Preconditioner, p: np.ndarray, mu: float, n: int, gamma: float, sigma: float) -> Tuple[float, float]:
    """(||Q^{-1/2} p||, sqrt(2) psi sqrt(mu))"""
    lhs = float(np.linalg.norm(apply_Q_inv_half(precond, p)))
    rhs = math.sqrt(2.0) * psi_bound(n, gamma, sigma) * math.sqrt(max(mu, 0.0))
    return lhs, rhs


def qinvp_norm_monitor(precond: Preconditioner, p: np.ndarray, mu: float, n: int, gamma: float, sigma: float) -> bool:
    """Diagnostic bound on the preconditioned right-hand side; logged, never raised"""
    lhs, rhs = qinvp_norm_bound(precond, p, mu, n, gamma, sigma)
    holds = lhs <= rhs
    if not holds:
        logger.warning("||Q^-1/2 p|| = %.3e exceeds %.3e", lhs, rhs)
    return holds


class SketchedIpmSolver:
    """
    Outer loop of the sketched infeasible IPM

    Terminates once mu <= epsilon (or epsilon * mu0 in relative mode). Every
    accepted iterate is re-verified to lie in N(gamma); every outer iteration
    leaves an OuterStep with its monitor checks on the trace.
    """

    def __init__(self, config: Optional[IpmConfig] = None):
        self.config = config or IpmConfig()
        self.monitor = InvariantMonitor()

    def solve(
        self,
        problem: LpProblem,
        on_step: Optional[Callable[[OuterStep], None]] = None,
    ) -> Tuple[Iterate, OuterTrace]:
        """Run the outer loop; on_step sees every OuterStep as soon as it is recorded"""
        config = self.config
        rng = np.random.default_rng(config.seed)

        iterate = initial_point(problem, config.y0)
        mu0 = iterate.mu
        r0 = iterate.residual
        r0_norm = iterate.residual_norm
        r_atol = config.residual_floor * max(1.0, float(np.linalg.norm(problem.b)), float(np.linalg.norm(problem.c)))
        target = config.epsilon * (mu0 if config.relative_epsilon else 1.0)

        trace = OuterTrace(
            solver=config.solver,
            mu0=mu0,
            r0_norm=r0_norm,
            metadata={
                "m": problem.m,
                "n": problem.n,
                "gamma": config.gamma,
                "sigma": config.sigma,
                "epsilon": config.epsilon,
                "seed": config.seed,
            },
        )
        logger.info(
            "solving m=%d n=%d with %s inner solver (gamma=%g sigma=%g eps=%g)",
            problem.m, problem.n, config.solver.value, config.gamma, config.sigma, config.epsilon,
        )

        k = 0
        zero_steps = 0
        eta_prev = 1.0
        try:
            while iterate.mu > target:
                if k >= config.max_outer:
                    raise MaxOuterExceeded(
                        f"mu = {iterate.mu:.3e} after {config.max_outer} outer iterations (target {target:.3e})"
                    )
                k += 1
                started = time.perf_counter()

                direction = build_direction(problem, iterate, config, rng)
                alpha_tilde = max_step_in_neighborhood(
                    problem, iterate, direction, config.gamma, mu0, r0_norm, r_atol
                )
                alpha_bar = min_complementarity_step(iterate, direction, alpha_tilde)
                candidate = iterate.step(problem, direction, alpha_bar)
                if alpha_bar > 0.0 and not neighborhood_contains(candidate, config.gamma, mu0, r0_norm, r_atol):
                    alpha_bar = _bisect_boundary(
                        problem, iterate, direction, alpha_bar, config.gamma, mu0, r0_norm, r_atol
                    )
                    candidate = iterate.step(problem, direction, alpha_bar)
                wall_ms = (time.perf_counter() - started) * 1000.0

                accepted = alpha_bar > 0.0
                current = candidate if accepted else iterate
                eta = current.residual_norm / r0_norm if r0_norm > 0.0 else 0.0
                checks = self._run_monitors(
                    problem, iterate, direction, candidate, alpha_bar, mu0, r0, r0_norm, r_atol, eta, eta_prev, accepted
                )
                kappa_precond, kappa_unprecond = self._condition_numbers(problem, iterate, direction)

                step = OuterStep(
                    k=k,
                    mu=current.mu,
                    residual_norm=current.residual_norm,
                    eta=eta,
                    inner_iters=direction.report.iterations,
                    alpha_tilde=alpha_tilde,
                    alpha_bar=alpha_bar,
                    v_norm=direction.v_norm,
                    wall_ms=wall_ms,
                    kappa_precond=kappa_precond,
                    kappa_unprecond=kappa_unprecond,
                    accepted=accepted,
                    checks=checks,
                )
                trace.add_step(step)
                if on_step is not None:
                    on_step(step)
                logger.debug(
                    "k=%d mu=%.3e eta=%.3e inner=%d alpha=%.4f |v|=%.3e",
                    k, current.mu, eta, direction.report.iterations, alpha_bar, direction.v_norm,
                )

                if not accepted:
                    zero_steps += 1
                    if zero_steps >= 2:
                        raise Stalled(f"zero step size on two consecutive outer iterations (k={k})")
                    continue

                zero_steps = 0
                eta_prev = eta
                iterate = candidate

        except SketchIpmError as error:
            if isinstance(error, Stalled):
                trace.status = SolveStatus.STALLED
            elif isinstance(error, MaxOuterExceeded):
                trace.status = SolveStatus.MAX_OUTER
            else:
                trace.status = SolveStatus.FAILED
            error.trace = trace
            error.iterate = iterate
            logger.error("solve ended with %s: %s", type(error).__name__, error)
            raise

        trace.status = SolveStatus.CONVERGED
        logger.info(
            "converged in %d outer iterations: mu=%.3e objective=%.10g",
            trace.outer_iterations, iterate.mu, problem.objective(iterate.x),
        )
        return iterate, trace

    def _run_monitors(
        self,
        problem: LpProblem,
        iterate: Iterate,
        direction: Direction,
        candidate: Iterate,
        alpha_bar: float,
        mu0: float,
        r0: np.ndarray,
        r0_norm: float,
        r_atol: float,
        eta: float,
        eta_prev: float,
        accepted: bool,
    ) -> List[MonitorCheck]:
        config = self.config
        monitor = self.monitor
        n = problem.n
        mu = iterate.mu
        checks = [
            monitor.check(
                "correction_identity",
                direction.correction_residual,
                CORRECTION_RTOL * max(1.0, float(np.linalg.norm(direction.p))),
            ),
            monitor.check(
                "perturbation_bound",
                direction.v_norm,
                math.sqrt(3.0 * n * mu) * float(np.linalg.norm(direction.f_tilde)) * (1.0 + PERTURBATION_RTOL),
            ),
        ]
        if direction.preconditioner is not None:
            lhs, rhs = qinvp_norm_bound(direction.preconditioner, direction.p, mu, n, config.gamma, config.sigma)
            checks.append(monitor.check("qinvp_norm", lhs, rhs))

        if not accepted:
            return checks

        checks.append(monitor.check(
            "mu_decrease",
            candidate.mu,
            (1.0 - 0.5 * alpha_bar * (1.0 - 1.25 * config.sigma)) * mu + MU_DECREASE_ATOL,
        ))
        checks.append(monitor.check_flag("mu_strictly_decreasing", candidate.mu < mu))
        checks.append(monitor.check(
            "residual_collinearity",
            collinearity_gap(candidate.residual, r0, eta),
            COLLINEARITY_RTOL * r0_norm + r_atol,
        ))
        checks.append(monitor.check("eta_nonincreasing", eta, eta_prev + COLLINEARITY_RTOL))
        checks.append(monitor.check_flag(
            "neighborhood",
            neighborhood_contains(candidate, config.gamma, mu0, r0_norm, r_atol),
        ))
        return checks

    def _condition_numbers(self, problem: LpProblem, iterate: Iterate, direction: Direction):
        config = self.config
        if not config.track_condition_numbers or problem.m > config.kappa_max_rows:
            return None, None

        d = np.sqrt(iterate.x / iterate.s)
        kappa_precond = None
        if direction.preconditioner is not None:
            kappa_precond = precond_condition_number(direction.preconditioner, problem.a, d) ** 2
        lam_min, lam_max = sym_eig_extremes(scaled_gram(problem.a, d))
        kappa_unprecond = lam_max / lam_min if lam_min > 0.0 else math.inf
        return kappa_precond, kappa_unprecond


def ipm_solve(
    problem: LpProblem,
    config: Optional[IpmConfig] = None,
    on_step: Optional[Callable[[OuterStep], None]] = None,
) -> Tuple[Iterate, OuterTrace]:
    """Solve problem with the sketched IPM; errors carry .trace and .iterate"""
    return SketchedIpmSolver(config).solve(problem, on_step=on_step)
