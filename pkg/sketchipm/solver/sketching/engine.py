"""
Sketching Engine

Builds the random embedding W (n x w) that compresses AD to the short dense
matrix ADW. The same W serves the preconditioner and the correction vector of
one outer iteration, and a fresh one is drawn every outer iteration.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from ...shared.errors import DimensionMismatch, InvalidParameter, NotOrthonormal
from ...shared.linalg.kernels import sym_eig_extremes
from ...shared.models.core import SketchKind

logger = logging.getLogger(__name__)

ORTHONORMAL_TOL = 1e-8
DEFAULT_NNZ_PER_ROW = 8
# (zeta/2)^-2 from the target distortion, times 2 so that the
# 95th-percentile draw at desk scale still meets it
SKETCH_OVERSAMPLING = 8


@dataclass
class SketchSpec:
    """Configuration for one sketch draw"""
    kind: SketchKind = SketchKind.SPARSE
    w: int = 1
    s: int = 1  # nonzeros per row, sparse kind only
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.kind, str):
            self.kind = SketchKind(self.kind)
        if self.w < 1:
            raise InvalidParameter(f"sketch width w must be >= 1, got {self.w}")
        if self.s < 1:
            raise InvalidParameter(f"nonzeros per row s must be >= 1, got {self.s}")


def default_sketch_spec(
    m: int,
    n: int,
    zeta: float = 0.5,
    delta: Optional[float] = None,
    seed: int = 0,
    kind: SketchKind = SketchKind.SPARSE,
    w: Optional[int] = None,
    s: Optional[int] = None,
) -> SketchSpec:
    """
    Sketch sizing used when the caller does not fix w or s

    The embedding must reach distortion zeta/2, so
    w = max(2m, ceil(SKETCH_OVERSAMPLING * m * L / zeta^2)) capped at n, with
    L = log2(max(m, 2)), or log2(max(m, 2) / delta) when a failure probability
    is given. At zeta = 1/2 this is ceil(32 m log2 m).
    """
    if not 0.0 < zeta < 1.0:
        raise InvalidParameter(f"zeta must lie in (0, 1), got {zeta}")
    if delta is not None and not 0.0 < delta < 1.0:
        raise InvalidParameter(f"delta must lie in (0, 1), got {delta}")

    if w is None:
        log_factor = math.log2(max(m, 2) / delta) if delta is not None else math.log2(max(m, 2))
        w = max(2 * m, math.ceil(SKETCH_OVERSAMPLING * m * log_factor / zeta ** 2))
        w = min(w, n)
    if s is None:
        s = min(DEFAULT_NNZ_PER_ROW, w)

    return SketchSpec(kind=kind, w=int(w), s=int(s), seed=seed)


@dataclass(frozen=True, eq=False)
class SketchMatrix:
    """
    Realized embedding W

    Sparse kind is stored as an n x w CSR matrix with exactly s entries of
    magnitude 1/sqrt(s) per row; Gaussian kind as a dense n x w array.
    """
    kind: SketchKind
    matrix: Union[sp.csr_matrix, np.ndarray]
    s: Optional[int] = None
    seed: Optional[int] = None

    @classmethod
    def from_matrix(cls, matrix, kind: Optional[SketchKind] = None) -> "SketchMatrix":
        """Wrap an explicit W (identity, selectors, fixtures)"""
        if sp.issparse(matrix):
            mat = sp.csr_matrix(matrix, dtype=np.float64)
            mat.sort_indices()
            return cls(kind=kind or SketchKind.SPARSE, matrix=mat)
        return cls(kind=kind or SketchKind.GAUSSIAN, matrix=np.asarray(matrix, dtype=np.float64))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def w(self) -> int:
        return self.matrix.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """W u for u of length w"""
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.w,):
            raise DimensionMismatch(f"sketch apply: expected vector of length {self.w}, got {u.shape}")
        return np.asarray(self.matrix @ u).ravel()

    def apply_t(self, x: np.ndarray) -> np.ndarray:
        """W^T x for x of length n"""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise DimensionMismatch(f"sketch apply_t: expected vector of length {self.n}, got {x.shape}")
        return np.asarray(self.matrix.T @ x).ravel()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.array(self.matrix)


def build_sketch(n: int, spec: SketchSpec) -> SketchMatrix:
    """Draw W deterministically from spec.seed"""
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")

    rng = np.random.default_rng(spec.seed)

    if spec.kind == SketchKind.GAUSSIAN:
        values = rng.standard_normal((n, spec.w)) / np.sqrt(spec.w)
        return SketchMatrix(kind=spec.kind, matrix=values, seed=spec.seed)

    if spec.s > spec.w:
        raise InvalidParameter(f"nonzeros per row s={spec.s} exceeds sketch width w={spec.w}")

    columns = _distinct_columns(rng, n, spec.w, spec.s)
    signs = rng.choice([-1.0, 1.0], size=(n, spec.s))

    indptr = np.arange(0, n * spec.s + 1, spec.s)
    matrix = sp.csr_matrix(
        (signs.ravel() / np.sqrt(spec.s), columns.ravel(), indptr),
        shape=(n, spec.w),
    )
    return SketchMatrix(kind=spec.kind, matrix=matrix, s=spec.s, seed=spec.seed)


def _distinct_columns(rng: np.random.Generator, n: int, w: int, s: int) -> np.ndarray:
    """
    n x s sorted column indices, each row a uniform s-subset of range(w)

    Memory stays O(n s): rows are drawn with replacement and only the rows
    holding a repeated column are redrawn. Narrow sketches (w <= 4 s) take the
    s smallest of w uniform keys instead, which is O(n s) there as well.
    """
    if s == w:
        return np.tile(np.arange(w), (n, 1))
    if w <= 4 * s:
        keys = rng.random((n, w))
        return np.sort(np.argpartition(keys, s - 1, axis=1)[:, :s], axis=1)

    columns = np.sort(rng.integers(w, size=(n, s)), axis=1)
    clashing = np.flatnonzero(np.any(np.diff(columns, axis=1) == 0, axis=1))
    while clashing.size:
        redrawn = np.sort(rng.integers(w, size=(clashing.size, s)), axis=1)
        columns[clashing] = redrawn
        clashing = clashing[np.any(np.diff(redrawn, axis=1) == 0, axis=1)]
    return columns


def apply_sketch_right(a: sp.spmatrix, d: np.ndarray, sketch: SketchMatrix) -> np.ndarray:
    """
    A diag(d) W as a dense m x w array

    AD stays sparse; with a sparse W the product costs O(nnz(A) s).
    """
    d = np.asarray(d, dtype=np.float64)
    m, n = a.shape
    if d.shape != (n,):
        raise DimensionMismatch(f"scaling has shape {d.shape}, A has {n} columns")
    if sketch.n != n:
        raise DimensionMismatch(f"sketch has {sketch.n} rows, A has {n} columns")

    scaled = sp.csr_matrix(a) @ sp.diags(d)
    product = scaled @ sketch.matrix
    if sp.issparse(product):
        return product.toarray()
    return np.asarray(product)


def embedding_quality(z: np.ndarray, sketch: SketchMatrix) -> float:
    """||Z W W^T Z^T - I||_2 for Z with orthonormal rows"""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != sketch.n:
        raise DimensionMismatch(f"Z has shape {z.shape}, sketch has {sketch.n} rows")

    identity = np.eye(z.shape[0])
    deviation = float(np.max(np.abs(z @ z.T - identity)))
    if deviation > ORTHONORMAL_TOL:
        raise NotOrthonormal(f"rows of Z deviate from orthonormal by {deviation:.3e}")

    zw = np.asarray((sketch.matrix.T @ z.T).T)
    lo, hi = sym_eig_extremes(zw @ zw.T - identity)
    return max(abs(lo), abs(hi))
