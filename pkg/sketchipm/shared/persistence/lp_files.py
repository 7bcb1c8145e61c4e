"""
LP and solution files

Problems are stored as a versioned JSON document with A in row-compressed
form:

    {"version": 1, "m": .., "n": .., "a": {"rowptr": [..], "colidx": [..], "values": [..]},
     "b": [..], "c": [..], "meta": {..}}

Floats are written with their shortest round-trip representation, so
write_lp(read_lp(f)) reproduces a canonical file byte for byte.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..errors import ProblemFormatError
from ..models.core import Iterate, LpProblem

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class CsrBlock(BaseModel):
    """Row-compressed constraint matrix"""
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    rowptr: List[int]
    colidx: List[int]
    values: List[float]

    @field_validator("rowptr")
    @classmethod
    def rowptr_monotone(cls, rowptr: List[int]) -> List[int]:
        if not rowptr or rowptr[0] != 0:
            raise ValueError("rowptr must start at 0")
        if any(later < earlier for earlier, later in zip(rowptr, rowptr[1:])):
            raise ValueError("rowptr must be nondecreasing")
        return rowptr

    @field_validator("colidx")
    @classmethod
    def colidx_nonnegative(cls, colidx: List[int]) -> List[int]:
        if any(index < 0 for index in colidx):
            raise ValueError("column indices must be nonnegative")
        return colidx


class LpFileV1(BaseModel):
    """Schema of an LP file"""
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    version: Literal[1]
    m: int = Field(ge=1)
    n: int = Field(ge=1)
    a: CsrBlock
    b: List[float]
    c: List[float]
    meta: Optional[Dict[str, Any]] = None


class SolutionV1(BaseModel):
    """Schema of a solution file"""
    objective: float
    mu: float
    x: List[float]
    y: List[float]
    s: List[float]
    converged: bool
    outer_iters: int


def _check_structure(doc: LpFileV1):
    """Cross-field rules pydantic field validators cannot see"""
    a = doc.a
    if len(a.rowptr) != doc.m + 1:
        raise ProblemFormatError(f"expected {doc.m + 1} entries, got {len(a.rowptr)}", field="rowptr")
    nnz = a.rowptr[-1]
    if len(a.colidx) != nnz:
        raise ProblemFormatError(f"expected rowptr[m] = {nnz} entries, got {len(a.colidx)}", field="colidx")
    if len(a.values) != nnz:
        raise ProblemFormatError(f"expected rowptr[m] = {nnz} entries, got {len(a.values)}", field="values")
    if any(index >= doc.n for index in a.colidx):
        raise ProblemFormatError(f"column index out of range for n = {doc.n}", field="colidx")
    for row in range(doc.m):
        columns = a.colidx[a.rowptr[row]:a.rowptr[row + 1]]
        if any(later <= earlier for earlier, later in zip(columns, columns[1:])):
            raise ProblemFormatError(
                f"column indices of row {row} must be strictly increasing", field="colidx"
            )
    if len(doc.b) != doc.m:
        raise ProblemFormatError(f"expected {doc.m} entries, got {len(doc.b)}", field="b")
    if len(doc.c) != doc.n:
        raise ProblemFormatError(f"expected {doc.n} entries, got {len(doc.c)}", field="c")
    if doc.m > doc.n:
        raise ProblemFormatError(f"expected m <= n, got m={doc.m}, n={doc.n}", field="m")


def parse_lp(text: str, source: str = "<string>") -> LpProblem:
    """Validate an LP document and build the problem"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as error:
        raise ProblemFormatError(f"{source}: invalid JSON: {error.msg}", line=error.lineno) from error

    try:
        doc = LpFileV1.model_validate(data)
    except ValidationError as error:
        first = error.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or None
        raise ProblemFormatError(f"{source}: {first['msg']}", field=field) from error

    _check_structure(doc)
    a = sp.csr_matrix(
        (np.asarray(doc.a.values, dtype=np.float64),
         np.asarray(doc.a.colidx, dtype=np.int64),
         np.asarray(doc.a.rowptr, dtype=np.int64)),
        shape=(doc.m, doc.n),
    )
    return LpProblem(a=a, b=np.asarray(doc.b), c=np.asarray(doc.c), meta=doc.meta or {})


def read_lp(path: PathLike) -> LpProblem:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as error:
        raise ProblemFormatError(f"cannot read {path}: {error}") from error
    except UnicodeDecodeError as error:
        raise ProblemFormatError(f"{path} is not UTF-8 text: {error.reason} at byte {error.start}") from error
    problem = parse_lp(text, source=str(path))
    logger.debug("read LP %s: m=%d n=%d nnz=%d", path, problem.m, problem.n, problem.a.nnz)
    return problem


def dump_lp(problem: LpProblem) -> str:
    """Canonical JSON text of a problem"""
    a = problem.a
    document: Dict[str, Any] = {
        "version": 1,
        "m": problem.m,
        "n": problem.n,
        "a": {
            "rowptr": [int(value) for value in a.indptr],
            "colidx": [int(value) for value in a.indices],
            "values": [float(value) for value in a.data],
        },
        "b": [float(value) for value in problem.b],
        "c": [float(value) for value in problem.c],
    }
    if problem.meta:
        document["meta"] = problem.meta
    return json.dumps(document, allow_nan=False) + "\n"


def write_lp(problem: LpProblem, path: PathLike):
    path = Path(path)
    path.write_text(dump_lp(problem), encoding="utf-8")
    logger.debug("wrote LP %s", path)


def write_solution(
    path: PathLike,
    problem: LpProblem,
    iterate: Iterate,
    converged: bool,
    outer_iters: int,
):
    """Final (x, y, s) with objective and mu; written on failure too, with converged = false"""
    solution = SolutionV1(
        objective=problem.objective(iterate.x),
        mu=iterate.mu,
        x=iterate.x.tolist(),
        y=iterate.y.tolist(),
        s=iterate.s.tolist(),
        converged=converged,
        outer_iters=outer_iters,
    )
    Path(path).write_text(json.dumps(solution.model_dump()) + "\n", encoding="utf-8")


def read_solution(path: PathLike) -> SolutionV1:
    try:
        return SolutionV1.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except ValidationError as error:
        raise ProblemFormatError(f"{path}: {error.errors()[0]['msg']}") from error
