"""
sketchipm command line

    sketchipm gen     --m 50 --n 1000 --density 0.1 --seed 1 --out lp.json
    sketchipm svm2lp  --in data.libsvm --out lp.json
    sketchipm solve   --lp lp.json --solver pcg --metrics run.csv --solution sol.json
    sketchipm compare --lp lp.json --seeds 5 --out report.csv

Exit codes: 0 converged, 1 bad input or flags, 2 solver failure (stalled,
iteration budget exhausted, numerical breakdown).
"""

import argparse
import logging
import sys
from typing import Callable, List, Optional

from ..shared.config import IpmConfig, load_config_file
from ..shared.errors import (
    AsymmetricMatrix,
    DimensionMismatch,
    InvalidParameter,
    NonFiniteInput,
    NotOrthonormal,
    ProblemFormatError,
    SketchIpmError,
)
from ..shared.models.core import (
    InnerMaxPolicy,
    InnerSolverKind,
    OuterStep,
    SketchKind,
    SyntheticRecipe,
    SyntheticSpec,
)
from ..shared.persistence.datasets import gen_synthetic, read_libsvm, svm_to_lp
from ..shared.persistence.lp_files import read_lp, write_lp, write_solution
from ..solver.ipm.engine import ipm_solve
from ..solver.transparency.engine import InvariantMonitor, TraceFormatter
from .compare import SolverComparison
from .metrics import MetricsWriter

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2

INPUT_ERRORS = (
    ProblemFormatError,
    InvalidParameter,
    DimensionMismatch,
    NonFiniteInput,
    AsymmetricMatrix,
    NotOrthonormal,
)


class CliUsageError(Exception):
    """Bad command-line flags"""


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports flag errors as input errors instead of exiting 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliUsageError(message)


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, (CliUsageError, OSError) + INPUT_ERRORS):
        return EXIT_INPUT
    return EXIT_SOLVER


def _add_config_flags(parser: argparse.ArgumentParser):
    """Solver flags; None means 'not given' so config files can fill in"""
    parser.add_argument("--sigma", type=float, help="centering parameter in (0, 4/5)")
    parser.add_argument("--gamma", type=float, help="neighborhood parameter in (0, 1)")
    parser.add_argument("--eps", type=float, help="stop once mu <= eps")
    parser.add_argument("--relative-eps", action="store_true", default=None, help="stop once mu <= eps * mu0")
    parser.add_argument("--tol-cg", type=float, help="relative inner residual tolerance")
    parser.add_argument("--inner-max", type=int, help="fixed inner iteration cap (default: theoretical bound)")
    parser.add_argument("--w", type=int, help="sketch width")
    parser.add_argument("--s", type=int, help="sketch nonzeros per row")
    parser.add_argument("--sketch-kind", choices=[kind.value for kind in SketchKind])
    parser.add_argument("--zeta", type=float, help="target embedding distortion")
    parser.add_argument("--delta", type=float, help="sketch failure probability knob")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--max-outer", type=int)
    parser.add_argument("--y0", choices=["zeros", "ones"])
    parser.add_argument("--config", help="key=value file; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="sketchipm", description="Sketch-preconditioned infeasible IPM for linear programs")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="generate a random synthetic LP")
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--density", type=float, default=0.1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--recipe", choices=[recipe.value for recipe in SyntheticRecipe], default=SyntheticRecipe.NOISY.value)
    gen.add_argument("--out", required=True)

    svm = commands.add_parser("svm2lp", help="convert a libsvm dataset to the l1-SVM LP")
    svm.add_argument("--in", dest="input", required=True)
    svm.add_argument("--out", required=True)

    solve = commands.add_parser("solve", help="solve an LP file")
    solve.add_argument("--lp", required=True)
    solve.add_argument("--solver", choices=[kind.value for kind in InnerSolverKind])
    _add_config_flags(solve)
    solve.add_argument("--metrics", help="per-iteration CSV")
    solve.add_argument("--solution", help="final iterate JSON")
    solve.add_argument("--run-id", default="run")
    solve.add_argument("--omit-timing", action="store_true", help="leave wall_ms empty (bit-identical reruns)")
    solve.add_argument("--verbose", action="store_true", help="progress on stdout")

    compare = commands.add_parser("compare", help="compare inner solvers on one LP")
    compare.add_argument("--lp", required=True)
    compare.add_argument("--seeds", type=int, default=1)
    compare.add_argument("--out", required=True)
    compare.add_argument(
        "--solvers",
        default=",".join(kind.value for kind in InnerSolverKind),
        help="comma-separated subset of " + ",".join(kind.value for kind in InnerSolverKind),
    )
    compare.add_argument("--workers", type=int)
    _add_config_flags(compare)
    return parser


def build_config(args: argparse.Namespace) -> IpmConfig:
    """defaults < config file < flags"""
    config = IpmConfig()
    if getattr(args, "config", None):
        config = IpmConfig.from_mapping(load_config_file(args.config), base=config)

    overrides = {
        "sigma": args.sigma,
        "gamma": args.gamma,
        "epsilon": args.eps,
        "relative_epsilon": args.relative_eps,
        "tol_cg": args.tol_cg,
        "sketch_w": args.w,
        "sketch_s": args.s,
        "sketch_kind": args.sketch_kind,
        "zeta": args.zeta,
        "delta": args.delta,
        "seed": args.seed,
        "max_outer": args.max_outer,
        "y0": args.y0,
        "solver": getattr(args, "solver", None),
    }
    if args.inner_max is not None:
        overrides["inner_max_policy"] = InnerMaxPolicy.FIXED
        overrides["inner_max_iters"] = args.inner_max
    return config.with_overrides(**overrides)


def cmd_gen(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(m=args.m, n=args.n, density=args.density, seed=args.seed, recipe=SyntheticRecipe(args.recipe))
    problem = gen_synthetic(spec)
    write_lp(problem, args.out)
    logger.info("wrote %dx%d LP (nnz %d) to %s", problem.m, problem.n, problem.a.nnz, args.out)
    return EXIT_OK


def cmd_svm2lp(args: argparse.Namespace) -> int:
    problem = svm_to_lp(read_libsvm(args.input))
    write_lp(problem, args.out)
    logger.info("wrote %dx%d SVM LP to %s", problem.m, problem.n, args.out)
    return EXIT_OK


def _progress(step: OuterStep):
    print(
        f"k={step.k:4d}  mu={step.mu:.3e}  eta={step.eta:.3e}  inner={step.inner_iters:5d}  "
        f"alpha={step.alpha_bar:.4f}  |v|={step.v_norm:.3e}",
        flush=True,
    )


def cmd_solve(args: argparse.Namespace) -> int:
    problem = read_lp(args.lp)
    config = build_config(args)

    hooks: List[Callable[[OuterStep], None]] = []
    writer = MetricsWriter(args.metrics, run_id=args.run_id, omit_timing=args.omit_timing) if args.metrics else None
    if writer:
        writer.open()
        hooks.append(writer.write_step)
    if args.verbose:
        hooks.append(_progress)

    def on_step(step: OuterStep):
        for hook in hooks:
            hook(step)

    code = EXIT_OK
    try:
        solution, trace = ipm_solve(problem, config, on_step=on_step)
        converged = True
    except SketchIpmError as error:
        if error.trace is None:
            raise
        solution, trace = error.iterate, error.trace
        converged = False
        code = exit_code_for(error)
        print(f"sketchipm: {type(error).__name__}: {error}", file=sys.stderr)
    finally:
        if writer:
            writer.close()

    if args.solution and solution is not None:
        write_solution(args.solution, problem, solution, converged, trace.outer_iterations)
    if args.verbose:
        print(TraceFormatter.to_simple_text(InvariantMonitor().explain_trace(trace)))
    return code


def cmd_compare(args: argparse.Namespace) -> int:
    problem = read_lp(args.lp)
    config = build_config(args)
    if args.seeds < 1:
        raise InvalidParameter(f"--seeds must be >= 1, got {args.seeds}")
    try:
        kinds = [InnerSolverKind(name.strip()) for name in args.solvers.split(",") if name.strip()]
    except ValueError as error:
        raise InvalidParameter(f"--solvers: {error}") from None
    if not kinds:
        raise InvalidParameter("--solvers is empty")

    rows = SolverComparison(config, max_workers=args.workers).compare(problem, kinds, args.seeds, out_path=args.out)
    return EXIT_OK if all(row.status == "ok" for row in rows) else EXIT_SOLVER


COMMANDS = {
    "gen": cmd_gen,
    "svm2lp": cmd_svm2lp,
    "solve": cmd_solve,
    "compare": cmd_compare,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliUsageError as error:
        print(f"sketchipm: error: {error}", file=sys.stderr)
        return EXIT_INPUT

    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        return COMMANDS[args.command](args)
    except (SketchIpmError, OSError) as error:
        print(f"sketchipm: {type(error).__name__}: {error}", file=sys.stderr)
        return exit_code_for(error)
