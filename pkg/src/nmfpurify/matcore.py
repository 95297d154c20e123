"""Dense matrix helpers: induced norms, sign splits, the offset ReLU, CSV I/O.

Matrices are plain ``float64`` numpy arrays.  Norm sums go through
``math.fsum`` so that the value of a norm does not depend on the order in
which a column or row is traversed.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadDims, ZeroColumn

ZERO_COLUMN_TOL = 1e-12


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array (copying only when needed)."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.size == 0:
        raise BadDims(f"{name} must be a nonempty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def _abs_sums(M: np.ndarray, axis: int) -> np.ndarray:
    A = np.abs(M)
    lines = A.T if axis == 0 else A
    return np.array([math.fsum(line) for line in lines])


def col_abs_sums(M) -> np.ndarray:
    """Per-column l1 norms."""
    return _abs_sums(as_matrix(M), axis=0)


def row_abs_sums(M) -> np.ndarray:
    """Per-row l1 norms."""
    return _abs_sums(as_matrix(M), axis=1)


def norm_col_induced(M) -> float:
    """Induced l1 norm: largest column absolute sum."""
    return float(col_abs_sums(M).max())


def norm_row_induced(M) -> float:
    """Induced l-infinity norm: largest row absolute sum."""
    return float(row_abs_sums(M).max())


def norm_sym(M) -> float:
    """Symmetrized norm, the larger of the two induced norms."""
    return max(norm_col_induced(M), norm_row_induced(M))


def norm_max(M) -> float:
    return float(np.max(np.abs(as_matrix(M))))


@dataclass(frozen=True)
class NormReport:
    col_norm: float
    row_norm: float
    sym_norm: float
    max_norm: float


def norm_report(M) -> NormReport:
    c = norm_col_induced(M)
    r = norm_row_induced(M)
    return NormReport(col_norm=c, row_norm=r, sym_norm=max(c, r), max_norm=norm_max(M))


def split_pos_neg(M) -> tuple[np.ndarray, np.ndarray]:
    """Return (M_plus, M_minus), both nonnegative, with M_plus - M_minus == M."""
    M = np.asarray(M, dtype=np.float64)
    pos = np.where(M > 0, M, 0.0)
    neg = np.where(M < 0, -M, 0.0)
    return pos, neg


def relu_offset(v, alpha: float) -> np.ndarray:
    """Elementwise max(v - alpha, 0)."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return np.maximum(np.asarray(v, dtype=np.float64) - alpha, 0.0)


def col_normalize(M, tol: float = ZERO_COLUMN_TOL) -> np.ndarray:
    """Scale every column to unit l1 norm."""
    M = as_matrix(M)
    norms = col_abs_sums(M)
    bad = np.flatnonzero(norms <= tol)
    if bad.size:
        raise ZeroColumn(int(bad[0]))
    return M / norms


# -- CSV interchange ---------------------------------------------------------

def format_matrix_csv(M) -> str:
    buf = io.StringIO()
    np.savetxt(buf, as_matrix(M), delimiter=",", fmt="%.17g")
    return buf.getvalue()


def save_matrix_csv(path, M) -> None:
    Path(path).write_text(format_matrix_csv(M))


def load_matrix_csv(path) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return as_matrix(arr, name=str(path))
