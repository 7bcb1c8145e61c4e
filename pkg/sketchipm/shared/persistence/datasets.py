"""
Problem sources

- libsvm text datasets ("label idx:val idx:val ...", 1-based indices, '#' comments)
- the l1-regularized SVM written as a standard-form LP
- random synthetic LPs
"""

import logging
import math
from pathlib import Path
from typing import Iterable, List, Union

import numpy as np
import scipy.sparse as sp

from ..errors import InvalidParameter, ProblemFormatError
from ..models.core import LpProblem, SvmDataset, SyntheticRecipe, SyntheticSpec

logger = logging.getLogger(__name__)


def parse_libsvm(lines: Iterable[str]) -> SvmDataset:
    """Parse libsvm lines; malformed input is rejected, never repaired"""
    labels: List[float] = []
    indptr = [0]
    indices: List[int] = []
    values: List[float] = []
    n_features = 0

    for line_number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue

        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ProblemFormatError(f"label {tokens[0]!r} is not a number", line=line_number) from None
        if label not in (1.0, -1.0):
            raise ProblemFormatError(f"label {tokens[0]!r} must be +1 or -1", line=line_number)

        seen = set()
        for token in tokens[1:]:
            index_text, sep, value_text = token.partition(":")
            try:
                index = int(index_text)
                value = float(value_text)
            except ValueError:
                raise ProblemFormatError(f"malformed pair {token!r}", line=line_number) from None
            if not sep or index < 1:
                raise ProblemFormatError(f"malformed pair {token!r}, indices start at 1", line=line_number)
            if not math.isfinite(value):
                raise ProblemFormatError(f"non-finite value in {token!r}", line=line_number)
            if index in seen:
                raise ProblemFormatError(f"feature {index} repeated", line=line_number)
            seen.add(index)
            indices.append(index - 1)
            values.append(value)
            n_features = max(n_features, index)

        labels.append(label)
        indptr.append(len(indices))

    features = sp.csr_matrix(
        (np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(labels), n_features),
    )
    features.sort_indices()
    return SvmDataset(labels=np.asarray(labels, dtype=np.float64), features=features)


def read_libsvm(path: Union[str, Path]) -> SvmDataset:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as handle:
            dataset = parse_libsvm(handle)
    except UnicodeDecodeError as error:
        raise ProblemFormatError(f"{path} is not UTF-8 text: {error.reason} at byte {error.start}") from error
    positives = int(np.sum(dataset.labels > 0))
    logger.info(
        "read %d samples (%d positive, %d negative), %d features from %s",
        dataset.n_samples, positives, dataset.n_samples - positives, dataset.n_features, path,
    )
    return dataset


def svm_to_lp(data: SvmDataset) -> LpProblem:
    """
    l1-SVM as a standard-form LP

        min  sum_j (w+_j + w-_j)
        s.t. y_i (x_i^T (w+ - w-) + b+ - b-) - xi_i = 1
             w+, w-, b+, b-, xi >= 0

    Columns are ordered (w+, w-, b+, b-, xi), so A is N x (2n + 2 + N).
    """
    n_samples, n_features = data.n_samples, data.n_features
    if n_samples == 0:
        raise InvalidParameter("cannot build an SVM LP from an empty dataset")

    y = data.labels
    signed = sp.diags(y) @ data.features
    label_col = sp.csr_matrix(y.reshape(-1, 1))
    a = sp.hstack(
        [signed, -signed, label_col, -label_col, -sp.identity(n_samples, format="csr")],
        format="csr",
    )
    b = np.ones(n_samples)
    c = np.concatenate([np.ones(2 * n_features), np.zeros(2 + n_samples)])
    meta = {"source": "l1-svm", "samples": n_samples, "features": n_features}
    return LpProblem(a=a, b=b, c=c, meta=meta)


def gen_synthetic(spec: SyntheticSpec) -> LpProblem:
    """
    Random sparse LP

    Entries are U(0, 1) kept with probability `density`; min(m, n) U(0, 1)
    draws are added to the diagonal so every row has a nonzero. The noisy
    recipe then takes b = A x + 0.1 z and c ~ N(0, 1) with x, z ~ N(0, 1).
    The feasible recipe takes b = A x with x ~ U(0.5, 1.5) and
    c = A^T y + s with y ~ N(0, 1), s ~ U(0.5, 1.5), so the LP has strictly
    feasible primal and dual points and a finite optimum.
    """
    m, n = spec.m, spec.n
    rng = np.random.default_rng(spec.seed)

    indptr = [0]
    indices: List[np.ndarray] = []
    values: List[np.ndarray] = []
    for _ in range(m):
        columns = np.flatnonzero(rng.random(n) < spec.density)
        indices.append(columns)
        values.append(rng.random(columns.size))
        indptr.append(indptr[-1] + columns.size)

    a = sp.csr_matrix(
        (np.concatenate(values) if values else np.zeros(0),
         np.concatenate(indices) if indices else np.zeros(0, dtype=np.int64),
         np.asarray(indptr)),
        shape=(m, n),
    )
    a = (a + sp.diags(rng.random(min(m, n)), shape=(m, n))).tocsr()
    a.sort_indices()

    if spec.recipe == SyntheticRecipe.NOISY:
        x_bar = rng.standard_normal(n)
        z = rng.standard_normal(m)
        b = a @ x_bar + 0.1 * z
        c = rng.standard_normal(n)
    else:
        x_bar = rng.uniform(0.5, 1.5, n)
        b = a @ x_bar
        y_bar = rng.standard_normal(m)
        s_bar = rng.uniform(0.5, 1.5, n)
        c = a.T @ y_bar + s_bar

    meta = {
        "generator": "synthetic",
        "recipe": spec.recipe.value,
        "density": spec.density,
        "seed": spec.seed,
    }
    logger.debug("generated %s LP m=%d n=%d nnz=%d", spec.recipe.value, m, n, a.nnz)
    return LpProblem(a=a, b=b, c=c, meta=meta)
