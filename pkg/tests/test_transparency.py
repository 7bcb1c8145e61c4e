import csv
import json

import numpy as np
import pytest

from sketchipm.bench.compare import ComparisonRow, SolverComparison, SolverRun, relative_error, run_seed
from sketchipm.bench.metrics import METRICS_HEADER, MetricsWriter, RunRecord, format_float
from sketchipm.shared.config import IpmConfig
from sketchipm.shared.models.core import (
    InnerSolverKind,
    MonitorCheck,
    OuterStep,
    OuterTrace,
    SolveStatus,
)
from sketchipm.solver.ipm.engine import ipm_solve
from sketchipm.solver.transparency.engine import (
    InvariantMonitor,
    TraceFormatter,
    collinearity_gap,
)


def make_step(k, mu, inner=3, checks=None, kappa=1.2):
    return OuterStep(
        k=k,
        mu=mu,
        residual_norm=mu,
        eta=mu,
        inner_iters=inner,
        alpha_tilde=0.5,
        alpha_bar=0.5,
        v_norm=1e-12,
        wall_ms=1.5,
        kappa_precond=kappa,
        kappa_unprecond=40.0,
        checks=checks or [],
    )


@pytest.fixture
def trace():
    failing = MonitorCheck(name="qinvp_norm", passed=False, lhs=2.0, rhs=1.0)
    passing = MonitorCheck(name="perturbation_bound", passed=True, lhs=0.1, rhs=1.0)
    trace = OuterTrace(solver=InnerSolverKind.PCG, mu0=1.0, r0_norm=1.0, status=SolveStatus.CONVERGED)
    trace.add_step(make_step(1, 0.5, inner=2, checks=[passing]))
    trace.add_step(make_step(2, 0.25, inner=6, checks=[passing, failing]))
    trace.add_step(make_step(3, 0.125, inner=4, checks=[passing]))
    return trace


class TestInvariantMonitor:
    def test_check_passes_on_equality(self):
        monitor = InvariantMonitor()
        assert monitor.check("bound", 1.0, 1.0).passed
        assert monitor.failures == 0

    def test_failures_are_counted_not_raised(self, caplog):
        monitor = InvariantMonitor()
        check = monitor.check("bound", 2.0, 1.0, detail="k=3")
        assert not check.passed
        assert (check.lhs, check.rhs) == (2.0, 1.0)
        assert monitor.check_flag("flag", False).passed is False
        assert monitor.failures == 2
        assert "bound" in caplog.text

    def test_fresh_monitor_holds_only_a_failure_count(self):
        assert vars(InvariantMonitor()) == {"failures": 0}

    def test_explain_trace(self, trace):
        explanation = InvariantMonitor().explain_trace(trace)
        metrics = explanation["metrics"]
        assert metrics["outer_iterations"] == 3
        assert metrics["inner_iterations_max"] == 6
        assert metrics["inner_iterations_median"] == 4.0
        assert metrics["final_mu"] == 0.125
        assert explanation["monitors"] == {"checks": 4, "failed": {"qinvp_norm": 1}}
        assert [row["k"] for row in explanation["iterations"]] == [1, 2, 3]
        assert "converged" in explanation["summary"]

    def test_explain_empty_trace(self):
        explanation = InvariantMonitor().explain_trace(OuterTrace(mu0=2.0))
        assert explanation["metrics"]["final_mu"] == 2.0
        assert explanation["metrics"]["kappa_precond_median"] is None
        assert explanation["iterations"] == []


class TestTraceFormatter:
    def test_markdown_lists_failures(self, trace):
        md = TraceFormatter.to_markdown(InvariantMonitor().explain_trace(trace))
        assert md.startswith("# Solve report")
        assert "- qinvp_norm: 1 failure(s)" in md
        assert md.count("\n| ") == 4

    def test_markdown_all_passed(self):
        trace = OuterTrace()
        trace.add_step(make_step(1, 0.5))
        assert "all checks passed" in TraceFormatter.to_markdown(InvariantMonitor().explain_trace(trace))

    def test_json_parses(self, trace):
        explanation = InvariantMonitor().explain_trace(trace)
        assert json.loads(TraceFormatter.to_json(explanation)) == explanation

    def test_simple_text(self, trace):
        text = TraceFormatter.to_simple_text(InvariantMonitor().explain_trace(trace))
        assert "outer_iterations: 3" in text
        assert "kappa_precond_median: 1.2" in text


def test_collinearity_gap():
    r0 = np.array([3.0, 4.0])
    assert collinearity_gap(0.5 * r0, r0, 0.5) == 0.0
    assert collinearity_gap(r0, r0, 0.0) == pytest.approx(5.0)


class TestMetricsWriter:
    def test_format_float(self):
        assert format_float(None) == ""
        assert format_float(0.1) == "0.1"
        assert float(format_float(1 / 3)) == 1 / 3

    def test_rows_follow_header(self, tmp_path, trace):
        path = tmp_path / "run.csv"
        with MetricsWriter(path, run_id="seed0") as writer:
            writer.write_trace(trace)
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == METRICS_HEADER
        assert len(rows) == 4
        first = dict(zip(METRICS_HEADER, rows[1]))
        assert first["run_id"] == "seed0"
        assert first["outer_k"] == "1"
        assert first["inner_iters"] == "2"
        assert float(first["mu"]) == 0.5
        assert first["wall_ms"] == "1.5"

    def test_omit_timing(self, trace):
        record = RunRecord.from_step("r", trace.steps[0], omit_timing=True)
        assert record.to_row()[-1] == ""

    def test_missing_kappa_is_empty(self):
        record = RunRecord.from_step("r", make_step(1, 0.5, kappa=None))
        assert record.to_row()[METRICS_HEADER.index("kappa_precond")] == ""

    def test_header_written_before_any_step(self, tmp_path):
        path = tmp_path / "run.csv"
        writer = MetricsWriter(path).open()
        assert path.read_text(encoding="utf-8") == ",".join(METRICS_HEADER) + "\n"
        writer.close()

    def test_as_solver_hook(self, tmp_path, trivial_lp):
        path = tmp_path / "run.csv"
        with MetricsWriter(path) as writer:
            _, trace = ipm_solve(trivial_lp, IpmConfig(), on_step=writer.write_step)
        assert writer.rows_written == trace.outer_iterations


class TestComparison:
    def test_run_seeds_are_distinct_and_stable(self):
        seeds = {run_seed(0, kind, index) for kind in InnerSolverKind for index in range(3)}
        assert len(seeds) == 3 * len(InnerSolverKind)
        assert run_seed(5, InnerSolverKind.SD, 1) == run_seed(5, InnerSolverKind.SD, 1)

    def test_relative_error(self):
        assert relative_error(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == 1.0
        assert relative_error(np.array([0.5]), np.zeros(1)) == 0.5

    def test_summarize_reports_errors(self, trace):
        ok = SolverRun(kind=InnerSolverKind.CG, seed=1, solution=None, trace=trace, error=None)
        failed = SolverRun(kind=InnerSolverKind.CG, seed=2, trace=trace, error="OuterStalled")
        row = SolverComparison().summarize(InnerSolverKind.CG, [ok, failed], None)
        assert row.runs == 2
        assert row.converged == 0
        assert row.inner_iters_max == 6
        assert row.relative_error_max is None
        assert row.status == "OuterStalled"

    def test_row_text(self):
        row = ComparisonRow(solver="pcg", runs=2, converged=2, inner_iters_max=7, relative_error_max=0.25)
        text = row.to_row()
        assert text[0] == "pcg"
        assert text[4] == "7"
        assert text[3] == ""
        assert text[-2:] == ["0.25", "ok"]

    def test_compare_on_trivial_lp(self, trivial_lp):
        rows = SolverComparison(IpmConfig(), max_workers=2).compare(
            trivial_lp, [InnerSolverKind.DIRECT, InnerSolverKind.PCG], seeds=2
        )
        assert [row.solver for row in rows] == ["pcg", "direct"]
        for row in rows:
            assert row.converged == 2
            assert row.relative_error_max < 1e-6
