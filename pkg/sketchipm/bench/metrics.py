"""
Per-iteration metrics

One CSV row per outer iteration, flushed as soon as it is written so the
file stays parseable if a run dies part way.
"""

import csv
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO, List, Optional, Union

from ..shared.models.core import OuterStep, OuterTrace

logger = logging.getLogger(__name__)

METRICS_HEADER = [
    "run_id",
    "outer_k",
    "mu",
    "eta",
    "inner_iters",
    "kappa_precond",
    "kappa_unprecond",
    "alpha_bar",
    "v_norm",
    "wall_ms",
]


def format_float(value: Optional[float]) -> str:
    """Shortest round-trip text; empty for missing values"""
    return "" if value is None else repr(float(value))


@dataclass
class RunRecord:
    """One metrics row"""
    run_id: str
    outer_k: int
    mu: float
    eta: float
    inner_iters: int
    kappa_precond: Optional[float]
    kappa_unprecond: Optional[float]
    alpha_bar: float
    v_norm: float
    wall_ms: Optional[float]

    @classmethod
    def from_step(cls, run_id: str, step: OuterStep, omit_timing: bool = False) -> "RunRecord":
        return cls(
            run_id=run_id,
            outer_k=step.k,
            mu=step.mu,
            eta=step.eta,
            inner_iters=step.inner_iters,
            kappa_precond=step.kappa_precond,
            kappa_unprecond=step.kappa_unprecond,
            alpha_bar=step.alpha_bar,
            v_norm=step.v_norm,
            wall_ms=None if omit_timing else step.wall_ms,
        )

    def to_row(self) -> List[str]:
        values = asdict(self)
        row = []
        for column in METRICS_HEADER:
            value = values[column]
            if column in ("run_id", "outer_k", "inner_iters"):
                row.append(str(value))
            else:
                row.append(format_float(value))
        return row


class MetricsWriter:
    """
    Streams RunRecords to a CSV file

    Usable as the on_step hook of the solver:

        with MetricsWriter(path, run_id="seed0") as writer:
            ipm_solve(problem, config, on_step=writer.write_step)
    """

    def __init__(self, path: Union[str, Path], run_id: str = "run", omit_timing: bool = False):
        self.path = Path(path)
        self.run_id = run_id
        self.omit_timing = omit_timing
        self.rows_written = 0
        self._handle: Optional[IO[str]] = None
        self._writer = None

    def open(self) -> "MetricsWriter":
        self._handle = self.path.open("w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._handle, lineterminator="\n")
        self._writer.writerow(METRICS_HEADER)
        self._handle.flush()
        return self

    def write_record(self, record: RunRecord):
        if self._writer is None:
            self.open()
        self._writer.writerow(record.to_row())
        self._handle.flush()
        self.rows_written += 1

    def write_step(self, step: OuterStep):
        self.write_record(RunRecord.from_step(self.run_id, step, self.omit_timing))

    def write_trace(self, trace: OuterTrace):
        for step in trace.steps:
            self.write_step(step)

    def close(self):
        if self._handle is not None:
            self._handle.close()
            self._handle = None
            self._writer = None
            logger.debug("wrote %d metric rows to %s", self.rows_written, self.path)

    def __enter__(self) -> "MetricsWriter":
        return self.open()

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False
