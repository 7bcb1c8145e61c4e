"""
Solver comparison

Runs every requested inner solver on one problem, several seeds each, and
summarizes iteration counts, condition numbers and the distance to the
direct-solver solution. One summary row per solver kind.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..shared.config import IpmConfig
from ..shared.errors import SketchIpmError
from ..shared.models.core import InnerSolverKind, Iterate, LpProblem, OuterTrace
from ..solver.ipm.engine import ipm_solve
from .metrics import format_float

logger = logging.getLogger(__name__)

COMPARE_HEADER = [
    "solver",
    "runs",
    "converged",
    "outer_iters_median",
    "inner_iters_max",
    "inner_iters_median",
    "kappa_precond_median",
    "kappa_unprecond_median",
    "relative_error_max",
    "status",
]

SOLVER_ORDER = [
    InnerSolverKind.PCG,
    InnerSolverKind.CG,
    InnerSolverKind.RICHARDSON,
    InnerSolverKind.SD,
    InnerSolverKind.DIRECT,
]


@dataclass
class SolverRun:
    """Outcome of one (solver kind, seed) run"""
    kind: InnerSolverKind
    seed: int
    solution: Optional[Iterate] = None
    trace: Optional[OuterTrace] = None
    error: Optional[str] = None

    @property
    def converged(self) -> bool:
        return self.error is None and self.solution is not None


@dataclass
class ComparisonRow:
    """Aggregate over the runs of one solver kind"""
    solver: str
    runs: int
    converged: int
    outer_iters_median: Optional[float] = None
    inner_iters_max: Optional[int] = None
    inner_iters_median: Optional[float] = None
    kappa_precond_median: Optional[float] = None
    kappa_unprecond_median: Optional[float] = None
    relative_error_max: Optional[float] = None
    status: str = "ok"
    errors: List[str] = field(default_factory=list)

    def to_row(self) -> List[str]:
        return [
            self.solver,
            str(self.runs),
            str(self.converged),
            format_float(self.outer_iters_median),
            "" if self.inner_iters_max is None else str(self.inner_iters_max),
            format_float(self.inner_iters_median),
            format_float(self.kappa_precond_median),
            format_float(self.kappa_unprecond_median),
            format_float(self.relative_error_max),
            self.status,
        ]


def run_seed(base_seed: int, kind: InnerSolverKind, run_index: int) -> int:
    """Independent RNG stream per (seed, solver kind, run)"""
    sequence = np.random.SeedSequence([base_seed, SOLVER_ORDER.index(kind), run_index])
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def relative_error(x: np.ndarray, reference: np.ndarray) -> float:
    """||x - x*|| / ||x*||"""
    scale = float(np.linalg.norm(reference))
    gap = float(np.linalg.norm(x - reference))
    return gap / scale if scale > 0.0 else gap


def _median(values: Sequence[float]) -> Optional[float]:
    finite = [value for value in values if value is not None]
    return float(np.median(finite)) if finite else None


class SolverComparison:
    """
    Paired comparison of inner solvers on one problem

    Runs are independent and go to a thread pool; results are merged in
    solver-kind order, so the report does not depend on scheduling.
    """

    def __init__(self, config: Optional[IpmConfig] = None, max_workers: Optional[int] = None):
        self.config = config or IpmConfig()
        self.max_workers = max_workers

    def _solve(self, problem: LpProblem, kind: InnerSolverKind, seed: int) -> SolverRun:
        config = self.config.with_overrides(solver=kind, seed=seed)
        try:
            solution, trace = ipm_solve(problem, config)
            return SolverRun(kind=kind, seed=seed, solution=solution, trace=trace)
        except SketchIpmError as error:
            logger.warning("%s run (seed %d) failed: %s", kind.value, seed, error)
            return SolverRun(kind=kind, seed=seed, trace=error.trace, error=type(error).__name__)

    def reference_solution(self, problem: LpProblem) -> Optional[np.ndarray]:
        """x* from the direct-solver IPM"""
        run = self._solve(problem, InnerSolverKind.DIRECT, self.config.seed)
        if not run.converged:
            logger.warning("direct reference run failed (%s); relative errors left empty", run.error)
            return None
        return run.solution.x

    def summarize(
        self,
        kind: InnerSolverKind,
        runs: List[SolverRun],
        reference: Optional[np.ndarray],
    ) -> ComparisonRow:
        row = ComparisonRow(solver=kind.value, runs=len(runs), converged=sum(run.converged for run in runs))

        traces = [run.trace for run in runs if run.trace is not None]
        inner = [step.inner_iters for trace in traces for step in trace.steps]
        row.outer_iters_median = _median([run.trace.outer_iterations for run in runs if run.converged])
        row.inner_iters_max = max(inner) if inner else None
        row.inner_iters_median = _median(inner)
        row.kappa_precond_median = _median([step.kappa_precond for trace in traces for step in trace.steps])
        row.kappa_unprecond_median = _median([step.kappa_unprecond for trace in traces for step in trace.steps])

        if reference is not None:
            errors = [relative_error(run.solution.x, reference) for run in runs if run.converged]
            row.relative_error_max = max(errors) if errors else None

        row.errors = sorted({run.error for run in runs if run.error})
        row.status = "ok" if not row.errors else ";".join(row.errors)
        return row

    def compare(
        self,
        problem: LpProblem,
        kinds: Optional[Sequence[InnerSolverKind]] = None,
        seeds: int = 1,
        out_path: Optional[Union[str, Path]] = None,
    ) -> List[ComparisonRow]:
        """
        Run every kind `seeds` times and summarize

        With out_path, each row is written and flushed as soon as its kind
        is complete.
        """
        kinds = [kind for kind in SOLVER_ORDER if kind in set(kinds or SOLVER_ORDER)]
        reference = self.reference_solution(problem)

        rows: List[ComparisonRow] = []
        handle = Path(out_path).open("w", encoding="utf-8", newline="") if out_path else None
        writer = csv.writer(handle, lineterminator="\n") if handle else None
        try:
            if writer:
                writer.writerow(COMPARE_HEADER)
                handle.flush()

            with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                futures: Dict[InnerSolverKind, list] = {
                    kind: [
                        pool.submit(self._solve, problem, kind, run_seed(self.config.seed, kind, index))
                        for index in range(seeds)
                    ]
                    for kind in kinds
                }
                for kind in kinds:
                    runs = [future.result() for future in futures[kind]]
                    row = self.summarize(kind, runs, reference)
                    rows.append(row)
                    logger.info(
                        "%s: %d/%d converged, inner max %s, status %s",
                        kind.value, row.converged, row.runs, row.inner_iters_max, row.status,
                    )
                    if writer:
                        writer.writerow(row.to_row())
                        handle.flush()
        finally:
            if handle:
                handle.close()

        return rows
