import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nmfpurify.errors import BadDims, ZeroColumn
from nmfpurify.matcore import (
    as_matrix,
    col_normalize,
    load_matrix_csv,
    norm_col_induced,
    norm_max,
    norm_report,
    norm_row_induced,
    norm_sym,
    relu_offset,
    save_matrix_csv,
    split_pos_neg,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
shapes = st.tuples(st.integers(1, 6), st.integers(1, 6))
matrices = shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite))


@pytest.mark.parametrize("M, col, row, sym", [
    ([[0, 2], [-3, 0]], 3, 3, 3),
    (np.eye(3), 1, 1, 1),
    (np.zeros((2, 4)), 0, 0, 0),
    ([[1, 1, 1]], 1, 3, 3),
    ([[0, 5], [0, 0]], 5, 5, 5),
    (np.diag([2.0, 3.0]), 3, 3, 3),
])
def test_norm_examples(M, col, row, sym):
    assert norm_col_induced(M) == col
    assert norm_row_induced(M) == row
    assert norm_sym(M) == sym


def test_norm_report_fields():
    rep = norm_report([[1.0, -4.0], [2.0, 0.5]])
    assert (rep.col_norm, rep.row_norm, rep.sym_norm, rep.max_norm) == (4.5, 5.0, 5.0, 4.0)


def test_as_matrix_rejects_nonfinite_and_empty():
    with pytest.raises(ValueError):
        as_matrix([[1.0, np.nan]])
    with pytest.raises(BadDims):
        as_matrix(np.zeros((0, 3)))


def test_split_examples():
    p, n = split_pos_neg([[1, -2]])
    assert np.array_equal(p, [[1, 0]]) and np.array_equal(n, [[0, 2]])
    p, n = split_pos_neg(np.zeros((2, 2)))
    assert not p.any() and not n.any()
    p, n = split_pos_neg([[-0.5]])
    assert np.array_equal(p, [[0]]) and np.array_equal(n, [[0.5]])


def test_relu_examples():
    assert np.allclose(relu_offset([0.5], 0.1), [0.4])
    assert np.array_equal(relu_offset([0.05, -2.0], 0.1), [0, 0])
    assert np.array_equal(relu_offset([1.0], 0.0), [1.0])
    with pytest.raises(ValueError):
        relu_offset([1.0], -0.1)


def test_col_normalize_examples():
    assert np.array_equal(col_normalize([[2], [2]]), [[0.5], [0.5]])
    assert np.array_equal(col_normalize(np.eye(3)), np.eye(3))
    with pytest.raises(ZeroColumn) as exc:
        col_normalize([[0], [0]])
    assert exc.value.index == 0


def test_csv_round_trip(tmp_path, rng):
    M = rng.normal(size=(4, 3))
    save_matrix_csv(tmp_path / "m.csv", M)
    assert np.array_equal(load_matrix_csv(tmp_path / "m.csv"), M)


@given(matrices)
def test_sym_is_max_and_duality(M):
    assert norm_sym(M) == max(norm_col_induced(M), norm_row_induced(M))
    assert norm_col_induced(M) == norm_row_induced(M.T)
    rep = norm_report(M)
    assert min(rep.col_norm, rep.row_norm, rep.sym_norm, rep.max_norm) >= 0


@given(matrices)
def test_norm_independent_of_traversal_order(M):
    perm_rows = M[::-1]
    assert norm_col_induced(perm_rows) == norm_col_induced(M)
    assert norm_row_induced(M[:, ::-1]) == norm_row_induced(M)


@settings(max_examples=50)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_submultiplicative(a, b, c, seed):
    rng = np.random.default_rng(seed)
    A, B = rng.normal(size=(a, b)), rng.normal(size=(b, c))
    assert norm_col_induced(A @ B) <= norm_col_induced(A) * norm_col_induced(B) * (1 + 1e-12)
    assert norm_row_induced(A @ B) <= norm_row_induced(A) * norm_row_induced(B) * (1 + 1e-12)


def test_induced_norms_match_vertex_maximum(rng):
    import itertools
    for _ in range(30):
        M = rng.normal(size=(3, 4))
        row = max(np.abs(M @ np.array(s)).max() for s in itertools.product((-1, 1), repeat=4))
        col = max(np.abs(M @ e).sum() for e in np.eye(4))
        assert norm_row_induced(M) == pytest.approx(row, rel=1e-13)
        assert norm_col_induced(M) == pytest.approx(col, rel=1e-13)


@given(matrices)
def test_split_reconstruction(M):
    p, n = split_pos_neg(M)
    assert np.array_equal(p - n, M)
    assert not np.any((p > 0) & (n > 0))
    assert (p >= 0).all() and (n >= 0).all()


@given(finite, finite, st.floats(0, 10))
def test_relu_properties(a, b, alpha):
    fa, fb = relu_offset([a], alpha)[0], relu_offset([b], alpha)[0]
    assert abs(fa - fb) <= abs(a - b) + 1e-12
    assert fa >= a - alpha - 1e-12
    if alpha > 0:
        assert fa <= abs(a)
