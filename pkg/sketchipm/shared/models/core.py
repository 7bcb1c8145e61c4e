"""
Core data models for sketchipm

These models are shared across all layers (kernels, solvers, bench) and define
the fundamental data structures of the sketched infeasible interior point
method: the LP itself, primal-dual iterates, search directions, inner-solve
reports and the per-iteration trace.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionMismatch, InvalidParameter, NonFiniteInput


class SketchKind(Enum):
    """Random embedding families"""
    SPARSE = "sparse"        # s signed entries of magnitude 1/sqrt(s) per row
    GAUSSIAN = "gaussian"    # i.i.d. N(0, 1/w)


class InnerSolverKind(Enum):
    """Solvers for the normal equations"""
    PCG = "pcg"                  # sketch-preconditioned conjugate gradient
    CG = "cg"                    # unpreconditioned conjugate gradient
    RICHARDSON = "richardson"    # sketch-preconditioned Richardson iteration
    SD = "sd"                    # sketch-preconditioned steepest descent
    DIRECT = "direct"            # dense Cholesky


class InnerMaxPolicy(Enum):
    """How the inner iteration cap is chosen"""
    THEORETICAL = "theoretical"  # log-bound in n, gamma, sigma, zeta
    FIXED = "fixed"              # IpmConfig.inner_max_iters


class SolveStatus(Enum):
    RUNNING = "running"
    CONVERGED = "converged"
    STALLED = "stalled"
    MAX_OUTER = "max_outer"
    FAILED = "failed"


class SyntheticRecipe(Enum):
    """Synthetic LP generators"""
    NOISY = "noisy"          # masked U(0,1) entries, b = Ax + 0.1z, c ~ N(0,1)
    FEASIBLE = "feasible"    # same pattern, strictly primal-dual feasible by construction


@dataclass
class LpProblem:
    """Standard-form LP: min c^T x subject to Ax = b, x >= 0"""
    a: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        a = sp.csr_matrix(self.a, dtype=np.float64)
        a.sum_duplicates()
        a.sort_indices()
        self.a = a
        self.b = np.asarray(self.b, dtype=np.float64).ravel()
        self.c = np.asarray(self.c, dtype=np.float64).ravel()

        m, n = a.shape
        if self.b.shape != (m,):
            raise DimensionMismatch(f"b must have shape ({m},), got {self.b.shape}")
        if self.c.shape != (n,):
            raise DimensionMismatch(f"c must have shape ({n},), got {self.c.shape}")
        if m > n:
            raise InvalidParameter(f"expected m <= n, got m={m}, n={n}")
        if not (np.all(np.isfinite(a.data)) and np.all(np.isfinite(self.b))
                and np.all(np.isfinite(self.c))):
            raise NonFiniteInput("LP data must be finite")

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x)


@dataclass(frozen=True, eq=False)
class Iterate:
    """Primal/dual/slack triplet with its residuals and duality measure"""
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    mu: float
    r_p: np.ndarray  # Ax - b
    r_d: np.ndarray  # A^T y + s - c

    @classmethod
    def from_vectors(cls, problem: LpProblem, x: np.ndarray, y: np.ndarray, s: np.ndarray) -> "Iterate":
        """Build an iterate, recomputing residuals and mu from scratch"""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        return cls(
            x=x,
            y=y,
            s=s,
            mu=float(x @ s) / x.size,
            r_p=problem.a @ x - problem.b,
            r_d=problem.a.T @ y + s - problem.c,
        )

    @property
    def residual(self) -> np.ndarray:
        """Stacked residual (r_p, r_d)"""
        return np.concatenate([self.r_p, self.r_d])

    @property
    def residual_norm(self) -> float:
        return float(np.sqrt(self.r_p @ self.r_p + self.r_d @ self.r_d))

    def step(self, problem: LpProblem, direction: "Direction", alpha: float) -> "Iterate":
        """Candidate iterate at step length alpha along direction"""
        return Iterate.from_vectors(
            problem,
            self.x + alpha * direction.dx,
            self.y + alpha * direction.dy,
            self.s + alpha * direction.ds,
        )

    def to_dict(self, problem: Optional[LpProblem] = None) -> Dict[str, Any]:
        result = {
            "mu": self.mu,
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "s": self.s.tolist(),
        }
        if problem is not None:
            result["objective"] = problem.objective(self.x)
        return result


@dataclass
class InnerSolveReport:
    """Outcome of one inner solve"""
    solver: InnerSolverKind
    iterations: int = 0
    residual_history: List[float] = field(default_factory=list)  # ||f^(j)||, j = 0..iterations
    final_residual: Optional[np.ndarray] = None
    converged: bool = False
    step_sizes: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "solver": self.solver.value,
            "iterations": self.iterations,
            "residual_history": list(self.residual_history),
            "converged": self.converged,
        }


@dataclass(eq=False)
class Direction:
    """Corrected Newton direction and everything the monitors need about it"""
    dx: np.ndarray
    dy: np.ndarray
    ds: np.ndarray
    v: np.ndarray                     # perturbation vector restoring residual collinearity
    report: InnerSolveReport
    p: np.ndarray                     # right-hand side of the normal equations
    f_tilde: np.ndarray               # Q^{-1/2}(AD^2A^T dy - p); unpreconditioned residual when no Q
    correction_residual: float = 0.0  # ||AS^{-1}v - (AD^2A^T dy - p)||
    preconditioner: Optional[Any] = None

    @property
    def v_norm(self) -> float:
        return float(np.linalg.norm(self.v))


@dataclass
class MonitorCheck:
    """A single runtime invariant check"""
    name: str = ""
    passed: bool = True
    lhs: float = 0.0
    rhs: float = 0.0
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "detail": self.detail,
        }


@dataclass
class OuterStep:
    """Metrics of one outer iteration"""
    k: int
    mu: float                      # duality measure after the step
    residual_norm: float           # ||r^k|| after the step
    eta: float                     # ||r^k|| / ||r^0||
    inner_iters: int
    alpha_tilde: float
    alpha_bar: float
    v_norm: float
    wall_ms: float
    kappa_precond: Optional[float] = None
    kappa_unprecond: Optional[float] = None
    accepted: bool = True
    checks: List[MonitorCheck] = field(default_factory=list)

    @property
    def failed_checks(self) -> List[MonitorCheck]:
        return [check for check in self.checks if not check.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "mu": self.mu,
            "residual_norm": self.residual_norm,
            "eta": self.eta,
            "inner_iters": self.inner_iters,
            "alpha_tilde": self.alpha_tilde,
            "alpha_bar": self.alpha_bar,
            "v_norm": self.v_norm,
            "wall_ms": self.wall_ms,
            "kappa_precond": self.kappa_precond,
            "kappa_unprecond": self.kappa_unprecond,
            "accepted": self.accepted,
            "checks": [check.to_dict() for check in self.checks],
        }


@dataclass
class OuterTrace:
    """Complete per-iteration record of an IPM run"""
    solver: InnerSolverKind = InnerSolverKind.PCG
    mu0: float = 0.0
    r0_norm: float = 0.0
    steps: List[OuterStep] = field(default_factory=list)
    status: SolveStatus = SolveStatus.RUNNING
    metadata: Dict[str, Any] = field(default_factory=dict)

    def add_step(self, step: OuterStep):
        self.steps.append(step)

    @property
    def outer_iterations(self) -> int:
        return sum(1 for step in self.steps if step.accepted)

    @property
    def max_inner_iterations(self) -> int:
        return max((step.inner_iters for step in self.steps), default=0)

    @property
    def total_inner_iterations(self) -> int:
        return sum(step.inner_iters for step in self.steps)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "solver": self.solver.value,
            "mu0": self.mu0,
            "r0_norm": self.r0_norm,
            "status": self.status.value,
            "steps": [step.to_dict() for step in self.steps],
            "metadata": self.metadata,
        }

    def get_summary(self) -> str:
        """Human-readable summary of the run"""
        summary = f"Solver: {self.solver.value} | status: {self.status.value}\n"
        summary += f"Outer iterations: {self.outer_iterations}\n"
        summary += f"Inner iterations: total {self.total_inner_iterations}, max {self.max_inner_iterations}\n"
        if self.steps:
            last = self.steps[-1]
            summary += f"Final mu: {last.mu:.3e} | eta: {last.eta:.3e}\n"
        failed = sum(len(step.failed_checks) for step in self.steps)
        if failed:
            summary += f"Monitor failures: {failed}\n"
        return summary


@dataclass
class SvmDataset:
    """Binary classification data, labels in {+1, -1}, features 0-based"""
    labels: np.ndarray
    features: sp.csr_matrix

    @property
    def n_samples(self) -> int:
        return self.labels.size

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass
class SyntheticSpec:
    """Parameters of the random LP generator"""
    m: int
    n: int
    density: float = 0.1
    seed: int = 0
    recipe: SyntheticRecipe = SyntheticRecipe.NOISY

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise InvalidParameter("m and n must be positive")
        if self.m > self.n:
            raise InvalidParameter(f"m <= n required, got m={self.m}, n={self.n}")
        if not 0.0 < self.density <= 1.0:
            raise InvalidParameter(f"density must lie in (0, 1], got {self.density}")
