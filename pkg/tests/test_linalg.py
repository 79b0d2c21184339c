from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import pytest

from dimerlab.lattice import build_g1
from dimerlab.linalg import (
    ExactMatrix,
    SingularMatrixError,
    det_exact,
    dirichlet_matrix,
    inverse_entry,
    solve_exact,
    subtract,
    transition_matrix,
)
from dimerlab.models import GridSpec


def test_dirichlet_matrix_of_square(square2):
    k = dirichlet_matrix(build_g1(square2))
    assert k.rows == ((1, 1), (2, 1), (1, 2), (2, 2))
    assert k[(1, 1), (1, 1)] == 4
    assert k[(1, 1), (2, 1)] == -1
    assert k[(1, 1), (2, 2)] == 0
    assert k.is_symmetric()
    assert det_exact(k) == 192


def test_inverse_entries_of_square(square2):
    k = dirichlet_matrix(build_g1(square2))
    assert inverse_entry(k, (1, 1), (1, 1)) == Fraction(7, 24)
    column = k.column_of_inverse((1, 1))
    assert [column[p] * 192 for p in k.rows] == [56, 16, 16, 8]


def test_chain_of_two():
    k = dirichlet_matrix(build_g1(GridSpec("chain", 2, 1)))
    assert det_exact(k) == 15
    assert inverse_entry(k, (2, 1), (1, 1)) == Fraction(1, 15)


def test_det_with_fractions_and_swaps():
    m = ExactMatrix([0, 1], [0, 1], [[Fraction(1, 2), Fraction(1, 3)], [Fraction(1, 4), 1]])
    assert det_exact(m) == Fraction(5, 12)
    assert det_exact(ExactMatrix("ab", "ab", [[0, 1], [1, 0]])) == -1
    assert det_exact(ExactMatrix([], [], [])) == 1


def test_singular_matrix():
    m = ExactMatrix([0, 1], [0, 1], [[1, 2], [2, 4]])
    assert det_exact(m) == 0
    with pytest.raises(SingularMatrixError):
        solve_exact(m, [1, 0])


def test_solve_exact_round_trip():
    m = ExactMatrix("xyz", "xyz", [[2, 1, 0], [1, 3, 1], [0, 1, 4]])
    rhs = [Fraction(1), Fraction(-2), Fraction(3, 5)]
    assert m.apply(solve_exact(m, rhs)) == rhs
    with pytest.raises(ValueError):
        solve_exact(m, [1, 2])


def test_transition_matrix_scales_to_k(rect23_pair):
    g1 = build_g1(rect23_pair)
    k = dirichlet_matrix(g1)
    walk = subtract(ExactMatrix.identity(k.rows), transition_matrix(g1))
    assert all(
        4 * walk[r, c] == k[r, c] for r in k.rows for c in k.cols
    )


def test_matrix_validation():
    with pytest.raises(ValueError, match="unique"):
        ExactMatrix([0, 0], [0, 1], [[1, 2], [3, 4]])
    with pytest.raises(ValueError):
        ExactMatrix([0], [0, 1], [[1]])
    with pytest.raises(ValueError):
        det_exact(ExactMatrix([0], [0, 1], [[1, 2]]))
    with pytest.raises(ValueError):
        subtract(ExactMatrix.zeros([0]), ExactMatrix.zeros([1]))


def test_submatrix_and_with_entry():
    m = ExactMatrix("ab", "ab", [[1, 2], [3, 4]])
    assert m.submatrix(["b"], ["a"]).to_lists() == [[3]]
    changed = m.with_entry("a", "a", 9)
    assert changed["a", "a"] == 9 and m["a", "a"] == 1
    assert m != changed


def test_concurrent_columns_agree(square2):
    k = dirichlet_matrix(build_g1(square2))
    with ThreadPoolExecutor(max_workers=4) as pool:
        columns = list(pool.map(k.column_of_inverse, k.cols * 3))
    assert columns[:4] == columns[4:8] == columns[8:]
