"""The entrywise sampling operator and its adjoint, on factored matrices.

An ObservationSet stores the sparse index set in compressed-row order with
a companion column-sorted view, so both adjoint sides stream contiguously.
All reductions run in a fixed order; identical inputs give identical bits.

The inner loops dispatch to the compiled extension when available, falling
back to a NumPy implementation (set RANKMIN_PURE_PYTHON=1 to force it).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

if os.environ.get("RANKMIN_PURE_PYTHON"):
    from . import _kernels_py as _k

    KERNEL_BACKEND = "python"
else:
    try:
        from . import _kernels as _k  # type: ignore[attr-defined]

        KERNEL_BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _k

        KERNEL_BACKEND = "python"


class ShapeMismatchError(ValueError):
    pass


@dataclass
class ObservationSet:
    """Sparse set of observed entries of an m x n matrix, row-major sorted."""

    m: int
    n: int
    rows: np.ndarray  # int64, row-major sorted
    cols: np.ndarray  # int64
    vals: np.ndarray  # float64
    _col_perm: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_entries(cls, m: int, n: int, rows, cols, vals) -> "ObservationSet":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise ShapeMismatchError("rows, cols, vals must have equal length")
        if len(rows):
            if rows.min() < 0 or rows.max() >= m:
                raise ValueError("row index out of range")
            if cols.min() < 0 or cols.max() >= n:
                raise ValueError("column index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        flat = rows * n + cols
        if len(flat) > 1 and np.any(np.diff(flat) == 0):
            k = int(np.nonzero(np.diff(flat) == 0)[0][0])
            raise ValueError(f"duplicate entry at ({rows[k]}, {cols[k]})")
        return cls(m=m, n=n, rows=rows, cols=cols, vals=vals)

    @classmethod
    def from_dense(cls, dense: np.ndarray, rows, cols) -> "ObservationSet":
        dense = np.asarray(dense)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        return cls.from_entries(dense.shape[0], dense.shape[1], rows, cols, dense[rows, cols])

    def __len__(self) -> int:
        return len(self.vals)

    @property
    def col_perm(self) -> np.ndarray:
        """Permutation putting entries in column-major order (built once)."""
        if self._col_perm is None:
            self._col_perm = np.lexsort((self.rows, self.cols))
        return self._col_perm

    def with_values(self, vals: np.ndarray) -> "ObservationSet":
        """Same index structure, different values (no re-sorting)."""
        vals = np.asarray(vals, dtype=np.float64)
        if vals.shape != self.vals.shape:
            raise ShapeMismatchError("value count differs from index count")
        return ObservationSet(self.m, self.n, self.rows, self.cols, vals, self._col_perm)


@dataclass
class SparseResidual:
    """Values of A(P_m P_n^T) - b on the observation index set."""

    obs: ObservationSet
    vals: np.ndarray
    sumsq: float


def _check_factor_shapes(p_m, p_n, obs: ObservationSet) -> None:
    if p_m.shape[0] != obs.m or p_n.shape[0] != obs.n:
        raise ShapeMismatchError(
            f"factor rows ({p_m.shape[0]}, {p_n.shape[0]}) do not match "
            f"observation shape ({obs.m}, {obs.n})"
        )
    if p_m.shape[1] != p_n.shape[1]:
        raise ShapeMismatchError("factor column counts differ")


def observed_product(p_m: np.ndarray, p_n: np.ndarray, obs: ObservationSet) -> np.ndarray:
    """A(P_m P_n^T): entrywise products on the observed set, O(r|omega|)."""
    _check_factor_shapes(p_m, p_n, obs)
    p_m = np.ascontiguousarray(p_m, dtype=np.float64)
    p_n = np.ascontiguousarray(p_n, dtype=np.float64)
    return _k.masked_rowdot(obs.rows, obs.cols, p_m, p_n)


def residual(p_m: np.ndarray, p_n: np.ndarray, obs: ObservationSet) -> SparseResidual:
    """A(P_m P_n^T) - b with a cached sum of squares."""
    vals = observed_product(p_m, p_n, obs) - obs.vals
    return SparseResidual(obs=obs, vals=vals, sumsq=_k.sum_sq(vals))


def adjoint_apply(s: SparseResidual, factor: np.ndarray, side: str) -> np.ndarray:
    """A*(S) @ P_n for side="left" (m x r) or A*(S)^T @ P_m for "right"."""
    obs = s.obs
    factor = np.ascontiguousarray(factor, dtype=np.float64)
    if side == "left":
        if factor.shape[0] != obs.n:
            raise ShapeMismatchError("left adjoint expects the n x r factor")
        return _k.scatter_add_rows(obs.rows, obs.cols, s.vals, factor, obs.m)
    if side == "right":
        if factor.shape[0] != obs.m:
            raise ShapeMismatchError("right adjoint expects the m x r factor")
        perm = obs.col_perm
        return _k.scatter_add_rows(
            obs.cols[perm], obs.rows[perm], np.ascontiguousarray(s.vals[perm]), factor, obs.n
        )
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def frobenius_norm_observed(obs: ObservationSet) -> float:
    """sqrt of the sum of squared observed values."""
    return float(np.sqrt(_k.sum_sq(obs.vals)))
