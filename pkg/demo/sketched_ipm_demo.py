"""
sketchipm Demo - Complete Working Example

Solves one synthetic LP with every inner solver and shows what the
sketch preconditioner buys:
1. Generate a random LP with strictly feasible primal and dual points
2. Solve it with the dense Cholesky baseline
3. Solve it again with sketch-preconditioned CG, and with plain CG
4. Compare outer/inner iteration counts and condition numbers
5. Print the full run report of the preconditioned solve
"""

import os
import sys

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np

from sketchipm.shared.config import IpmConfig
from sketchipm.shared.errors import SketchIpmError
from sketchipm.shared.models.core import InnerSolverKind, SyntheticRecipe, SyntheticSpec
from sketchipm.shared.persistence.datasets import gen_synthetic
from sketchipm.solver.ipm.engine import ipm_solve
from sketchipm.solver.transparency.engine import InvariantMonitor, TraceFormatter


def run(problem, kind: InnerSolverKind):
    config = IpmConfig(solver=kind, seed=7, max_outer=200)
    try:
        solution, trace = ipm_solve(problem, config)
    except SketchIpmError as error:
        print(f"   {kind.value}: {type(error).__name__}: {error}")
        return error.iterate, error.trace
    return solution, trace


def main():
    print("=" * 80)
    print("SKETCHIPM DEMO: sketch-preconditioned interior point method")
    print("=" * 80)
    print()

    spec = SyntheticSpec(m=40, n=800, density=0.1, seed=3, recipe=SyntheticRecipe.FEASIBLE)
    problem = gen_synthetic(spec)
    print(f"📦 Generated LP: m={problem.m}, n={problem.n}, nnz={problem.a.nnz}")
    print()

    results = {}
    for kind in (InnerSolverKind.DIRECT, InnerSolverKind.PCG, InnerSolverKind.CG):
        print(f"🔍 Solving with {kind.value}...")
        results[kind] = run(problem, kind)

    print()
    print(f"{'solver':<10} {'outer':>6} {'inner max':>10} {'kappa med':>12} {'objective':>16}")
    for kind, (solution, trace) in results.items():
        if trace is None:
            continue
        attr = "kappa_precond" if kind == InnerSolverKind.PCG else "kappa_unprecond"
        kappas = [getattr(step, attr) for step in trace.steps if getattr(step, attr) is not None]
        kappa = f"{np.median(kappas):.3e}" if kappas else "n/a"
        objective = problem.objective(solution.x) if solution is not None else float("nan")
        print(
            f"{kind.value:<10} {trace.outer_iterations:>6} {trace.max_inner_iterations:>10} "
            f"{kappa:>12} {objective:>16.8f}"
        )
    print()

    _, pcg_trace = results[InnerSolverKind.PCG]
    if pcg_trace is not None:
        print("=" * 80)
        print("RUN REPORT - preconditioned CG")
        print("=" * 80)
        print(TraceFormatter.to_markdown(InvariantMonitor().explain_trace(pcg_trace)))


if __name__ == "__main__":
    main()
