"""
Transparency Engine

Runtime invariants of the sketched IPM are checked every outer iteration and
recorded on the trace, so every run can be audited after the fact:

- correction identity  ||A S^{-1} v - (A D^2 A^T dy - p)||
- perturbation bound   ||v|| <= sqrt(3 n mu) ||f||
- preconditioned rhs   ||Q^{-1/2} p|| <= sqrt(2) psi sqrt(mu)
- mu decrease          mu+ <= [1 - (alpha/2)(1 - 5 sigma / 4)] mu
- residual collinearity and neighborhood membership of accepted iterates

A failed check is logged, not raised. The solver itself raises on a broken
correction identity.
"""

import json
import logging
from typing import Any, Dict, Optional

import numpy as np

from ...shared.models.core import MonitorCheck, OuterTrace

logger = logging.getLogger(__name__)


class InvariantMonitor:
    """Builds MonitorCheck records of the form lhs <= rhs"""

    def __init__(self):
        self.failures = 0

    def check(self, name: str, lhs: float, rhs: float, detail: str = "") -> MonitorCheck:
        passed = bool(lhs <= rhs)
        check = MonitorCheck(name=name, passed=passed, lhs=float(lhs), rhs=float(rhs), detail=detail)
        if not passed:
            self.failures += 1
            logger.warning("monitor %s failed: %.6e > %.6e %s", name, lhs, rhs, detail)
        return check

    def check_flag(self, name: str, passed: bool, detail: str = "") -> MonitorCheck:
        check = MonitorCheck(name=name, passed=bool(passed), lhs=0.0 if passed else 1.0, rhs=0.0, detail=detail)
        if not passed:
            self.failures += 1
            logger.warning("monitor %s failed %s", name, detail)
        return check

    def explain_trace(self, trace: OuterTrace) -> Dict[str, Any]:
        """Structured account of a run, for the formatters below"""
        steps = trace.steps
        inner = [step.inner_iters for step in steps]
        kappas = [step.kappa_precond for step in steps if step.kappa_precond is not None]
        failed: Dict[str, int] = {}
        for step in steps:
            for check in step.failed_checks:
                failed[check.name] = failed.get(check.name, 0) + 1

        return {
            "summary": trace.get_summary().strip(),
            "metrics": {
                "outer_iterations": trace.outer_iterations,
                "inner_iterations_max": max(inner, default=0),
                "inner_iterations_median": float(np.median(inner)) if inner else 0.0,
                "kappa_precond_median": float(np.median(kappas)) if kappas else None,
                "final_mu": steps[-1].mu if steps else trace.mu0,
                "final_eta": steps[-1].eta if steps else 1.0,
            },
            "monitors": {
                "checks": sum(len(step.checks) for step in steps),
                "failed": failed,
            },
            "iterations": [
                {
                    "k": step.k,
                    "mu": step.mu,
                    "eta": step.eta,
                    "inner_iters": step.inner_iters,
                    "alpha_bar": step.alpha_bar,
                    "accepted": step.accepted,
                }
                for step in steps
            ],
        }


class TraceFormatter:
    """
    Formats trace explanations for different audiences and mediums
    """

    @staticmethod
    def to_markdown(explanation: Dict[str, Any]) -> str:
        md = "# Solve report\n\n"

        if "summary" in explanation:
            md += f"## Summary\n{explanation['summary']}\n\n"

        if "metrics" in explanation:
            md += "## Metrics\n"
            for metric, value in explanation["metrics"].items():
                md += f"- **{metric}**: {_format_value(value)}\n"
            md += "\n"

        monitors = explanation.get("monitors")
        if monitors:
            md += "## Monitors\n"
            md += f"- checks run: {monitors['checks']}\n"
            if monitors["failed"]:
                for name, count in sorted(monitors["failed"].items()):
                    md += f"- {name}: {count} failure(s)\n"
            else:
                md += "- all checks passed\n"
            md += "\n"

        if explanation.get("iterations"):
            md += "## Iterations\n"
            md += "| k | mu | eta | inner | alpha |\n|---|---|---|---|---|\n"
            for row in explanation["iterations"]:
                md += (
                    f"| {row['k']} | {row['mu']:.3e} | {row['eta']:.3e} | "
                    f"{row['inner_iters']} | {row['alpha_bar']:.4f} |\n"
                )
        return md

    @staticmethod
    def to_json(explanation: Dict[str, Any]) -> str:
        return json.dumps(explanation, indent=2)

    @staticmethod
    def to_simple_text(explanation: Dict[str, Any]) -> str:
        text = explanation.get("summary", "")
        if "metrics" in explanation:
            text += "\n\nMetrics:\n"
            for metric, value in explanation["metrics"].items():
                text += f"  {metric}: {_format_value(value)}\n"
        return text


def _format_value(value: Optional[Any]) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def collinearity_gap(residual: np.ndarray, r0: np.ndarray, eta: float) -> float:
    """||r - eta r0||"""
    return float(np.linalg.norm(residual - eta * r0))
