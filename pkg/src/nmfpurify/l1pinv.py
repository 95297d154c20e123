"""Left inverses of tall matrices.

``min_inf_pinv`` finds the left inverse with the smallest induced
l-infinity norm.  The objective is a max over rows and the constraint
``P @ A = I`` couples only entries inside a row, so the problem splits into
one l1-minimization per row::

    minimize ||z||_1  subject to  A.T @ z = e_i

Each of those is solved as a linear program by a revised simplex with
Bland's rule, started from a basis of n independent rows picked by pivoted
QR.  The pivot rule keeps the result deterministic and independent of any
external LP solver.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NoConvergence, RankDeficient
from .matcore import as_matrix, row_abs_sums

RANK_TOL = 1e-10
PIVOT_TOL = 1e-9
COST_TOL = 1e-10


def numerical_rank(A: np.ndarray, rel_tol: float = RANK_TOL) -> int:
    """Rank from column-pivoted QR, cut at rel_tol * (largest column norm)."""
    A = as_matrix(A)
    _, R, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = np.linalg.norm(A, axis=0).max()
    if scale == 0.0:
        return 0
    return int(np.count_nonzero(diag > rel_tol * scale))


def check_full_column_rank(A: np.ndarray) -> None:
    rank = numerical_rank(A)
    if rank < A.shape[1]:
        raise RankDeficient(rank, A.shape[1])


def _revised_simplex(c, M, b, basis, budget, used, allowed):
    """Bland-rule revised simplex from a feasible ``basis``.

    Basic values, duals and directions are re-solved from the current basis
    matrix at every pivot, so no round-off accumulates across pivots.
    ``allowed`` masks the columns that may enter the basis.
    """
    k = M.shape[0]
    while True:
        B = M[:, basis]
        lu = scipy.linalg.lu_factor(B, check_finite=False)
        duals = scipy.linalg.lu_solve(lu, c[basis], trans=1, check_finite=False)
        reduced = c - duals @ M
        entering = np.flatnonzero((reduced < -COST_TOL) & allowed)
        if entering.size == 0:
            return basis, used
        col = int(entering[0])
        xb = np.maximum(scipy.linalg.lu_solve(lu, b, check_finite=False), 0.0)
        w = scipy.linalg.lu_solve(lu, M[:, col], check_finite=False)
        rows = np.flatnonzero(w > PIVOT_TOL * max(1.0, np.abs(w).max()))
        if rows.size == 0:
            # unbounded direction; impossible for a nonnegative objective
            raise NoConvergence(used)
        ratios = xb[rows] / w[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, best)]
        leave = min(ties, key=lambda r: basis[r])
        if used >= budget:
            raise NoConvergence(used)
        basis = list(basis)
        basis[leave] = col
        used += 1


def simplex_standard_form(c, A_eq, b_eq, max_pivots: int,
                          basis: list[int] | None = None) -> tuple[np.ndarray, list[int]]:
    """Solve min c.x s.t. A_eq x = b_eq, x >= 0 by two-phase Bland simplex.

    Pass a feasible starting ``basis`` to skip phase one.  Returns the optimal
    vertex and its basis (column indices of ``A_eq``).
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.array(A_eq, dtype=np.float64)
    b = np.array(b_eq, dtype=np.float64)
    k, nvar = A.shape
    used = 0
    if basis is None:
        flip = b < 0
        A[flip] *= -1.0
        b[flip] *= -1.0
        M = np.hstack([A, np.eye(k)])
        c1 = np.concatenate([np.zeros(nvar), np.ones(k)])
        basis, used = _revised_simplex(c1, M, b, list(range(nvar, nvar + k)),
                                       max_pivots, used, np.ones(nvar + k, dtype=bool))
        xb = scipy.linalg.solve(M[:, basis], b)
        if xb[np.array(basis) >= nvar].sum() > 1e-8 * max(1.0, np.abs(b).max()):
            raise RankDeficient(k - 1, k)
        # swap zero-level artificials for structural columns where possible
        for r, j in enumerate(list(basis)):
            if j < nvar:
                continue
            row = scipy.linalg.solve(M[:, basis].T, np.eye(k)[r])
            coef = row @ A
            for cand in np.flatnonzero(np.abs(coef) > PIVOT_TOL):
                if cand not in basis:
                    basis[r] = int(cand)
                    break
        allowed = np.concatenate([np.ones(nvar, dtype=bool), np.zeros(k, dtype=bool)])
        c2 = np.concatenate([c, np.zeros(k)])
        basis, used = _revised_simplex(c2, M, b, basis, max_pivots, used, allowed)
        x = np.zeros(nvar + k)
        x[basis] = np.maximum(scipy.linalg.solve(M[:, basis], b), 0.0)
        return x[:nvar], [j for j in basis if j < nvar]

    basis, used = _revised_simplex(c, A, b, list(basis), max_pivots, used,
                                   np.ones(nvar, dtype=bool))
    x = np.zeros(nvar)
    x[basis] = np.maximum(scipy.linalg.solve(A[:, basis], b), 0.0)
    return x, basis


def pivot_budget(m: int, n: int) -> int:
    return 50 * (m + n)


def _min_l1_row_unchecked(A: np.ndarray, i: int) -> np.ndarray:
    m, n = A.shape
    At = A.T
    rhs = np.zeros(n)
    rhs[i] = 1.0
    # crash basis: n linearly independent rows of A, each entered with the
    # sign copy (z+ or z-) that makes the basic solution nonnegative
    _, _, perm = scipy.linalg.qr(At, mode="economic", pivoting=True)
    rows = np.sort(perm[:n])
    z0 = scipy.linalg.solve(At[:, rows], rhs)
    basis = [int(r) if v >= 0 else int(r) + m for r, v in zip(rows, z0)]
    x, _ = simplex_standard_form(np.ones(2 * m), np.hstack([At, -At]), rhs,
                                 pivot_budget(m, n), basis=basis)
    return x[:m] - x[m:]


def min_l1_row(A, i: int) -> np.ndarray:
    """Minimum-l1 vector z with z.T @ A == e_i (row i of the min-inf-norm left inverse)."""
    A = as_matrix(A)
    if not 0 <= i < A.shape[1]:
        raise IndexError(f"row index {i} out of range for {A.shape[1]} columns")
    check_full_column_rank(A)
    return _min_l1_row_unchecked(A, i)


@dataclass(frozen=True)
class PinvResult:
    pinv: np.ndarray
    inf_norm: float
    per_row_l1: np.ndarray


def min_inf_pinv(A, threads: int = 1) -> PinvResult:
    """Left inverse of ``A`` with minimum induced l-infinity norm.

    Rows are independent LPs; with ``threads > 1`` they are solved
    concurrently and reassembled in row order, so the output does not depend
    on the thread count.
    """
    A = as_matrix(A)
    check_full_column_rank(A)
    n = A.shape[1]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda i: _min_l1_row_unchecked(A, i), range(n)))
    else:
        rows = [_min_l1_row_unchecked(A, i) for i in range(n)]
    P = np.vstack(rows)
    per_row = row_abs_sums(P)
    return PinvResult(pinv=P, inf_norm=float(per_row.max()), per_row_l1=per_row)


def ls_pinv(A) -> np.ndarray:
    """Least-squares left inverse (A^T A)^{-1} A^T, computed through QR."""
    A = as_matrix(A)
    check_full_column_rank(A)
    Q, R = np.linalg.qr(A)
    return scipy.linalg.solve_triangular(R, Q.T)
