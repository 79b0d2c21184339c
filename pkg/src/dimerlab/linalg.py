"""Exact rational linear algebra.

Dense matrices of ``fractions.Fraction`` indexed by arbitrary hashable
keys (grid positions, vertex ids), the Dirichlet matrix ``K = 4I - A(G1)``,
fraction-free determinants and cached exact solves.
"""

import logging
import threading
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Hashable, Optional, Sequence

from .lattice import PlaneGraph
from .models import DimerlabError, Point

logger = logging.getLogger(__name__)

Key = Hashable


class SingularMatrixError(DimerlabError):
    """Raised when a solve or inverse entry is requested of a singular matrix."""

    pass


@dataclass
class _Factors:
    """Recorded elimination steps and the resulting upper triangle."""

    steps: list[tuple[int, int, list[tuple[int, Fraction]]]]
    upper: list[dict[int, Fraction]]

    def solve(self, rhs: Sequence[Fraction]) -> list[Fraction]:
        b = list(rhs)
        for c, p, mults in self.steps:
            if p != c:
                b[c], b[p] = b[p], b[c]
            bc = b[c]
            if bc:
                for r, f in mults:
                    b[r] -= f * bc
        n = len(b)
        x = [Fraction(0)] * n
        for c in range(n - 1, -1, -1):
            row = self.upper[c]
            s = b[c]
            for j, v in row.items():
                if j > c:
                    s -= v * x[j]
            x[c] = s / row[c]
        return x


class ExactMatrix:
    """A dense matrix of exact rationals indexed by keys.

    Instances are treated as immutable; derived matrices are new objects.
    Factorizations and solved columns are cached behind a lock so that
    concurrent readers trigger at most one elimination.

    Parameters
    ----------
    rows, cols : sequence of hashable
        Row and column keys; their positions give the storage order.
    entries : sequence of sequence
        Values convertible to ``Fraction``.
    """

    def __init__(
        self,
        rows: Sequence[Key],
        cols: Sequence[Key],
        entries: Sequence[Sequence],
    ):
        self.rows = tuple(rows)
        self.cols = tuple(cols)
        self.row_index = {k: i for i, k in enumerate(self.rows)}
        self.col_index = {k: i for i, k in enumerate(self.cols)}
        if len(self.row_index) != len(self.rows) or len(self.col_index) != len(self.cols):
            raise ValueError("Matrix keys must be unique")
        self._entries = [[Fraction(v) for v in row] for row in entries]
        if len(self._entries) != len(self.rows) or any(
            len(r) != len(self.cols) for r in self._entries
        ):
            raise ValueError("Entry array does not match the key lists")
        self._lock = threading.Lock()
        self._factors: Optional[_Factors] = None
        self._columns: dict[Key, dict[Key, Fraction]] = {}

    @classmethod
    def zeros(cls, rows: Sequence[Key], cols: Optional[Sequence[Key]] = None) -> "ExactMatrix":
        cols = rows if cols is None else cols
        return cls(rows, cols, [[0] * len(cols) for _ in rows])

    @classmethod
    def identity(cls, keys: Sequence[Key]) -> "ExactMatrix":
        n = len(keys)
        return cls(keys, keys, [[int(i == j) for j in range(n)] for i in range(n)])

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.cols)

    @property
    def is_square(self) -> bool:
        return len(self.rows) == len(self.cols)

    def __getitem__(self, key: tuple[Key, Key]) -> Fraction:
        r, c = key
        return self._entries[self.row_index[r]][self.col_index[c]]

    def row(self, r: Key) -> list[Fraction]:
        return list(self._entries[self.row_index[r]])

    def to_lists(self) -> list[list[Fraction]]:
        return [list(r) for r in self._entries]

    def submatrix(self, rows: Sequence[Key], cols: Sequence[Key]) -> "ExactMatrix":
        ri = [self.row_index[r] for r in rows]
        ci = [self.col_index[c] for c in cols]
        return ExactMatrix(
            rows, cols, [[self._entries[i][j] for j in ci] for i in ri]
        )

    def with_entry(self, r: Key, c: Key, value) -> "ExactMatrix":
        """Return a copy with entry ``(r, c)`` replaced."""
        entries = self.to_lists()
        entries[self.row_index[r]][self.col_index[c]] = Fraction(value)
        return ExactMatrix(self.rows, self.cols, entries)

    def apply(self, vector: Sequence[Fraction]) -> list[Fraction]:
        """Return ``self @ vector`` for a vector aligned with ``cols``."""
        return [sum((a * b for a, b in zip(row, vector) if a), Fraction(0)) for row in self._entries]

    def is_symmetric(self) -> bool:
        if self.rows != self.cols:
            return False
        n = len(self.rows)
        return all(
            self._entries[i][j] == self._entries[j][i]
            for i in range(n)
            for j in range(i + 1, n)
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self._entries == other._entries
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"ExactMatrix({len(self.rows)}x{len(self.cols)})"

    def factors(self) -> _Factors:
        """Return the cached elimination of this matrix, computing it once.

        Raises
        ------
        SingularMatrixError
            If a pivot column is entirely zero.
        """
        with self._lock:
            if self._factors is None:
                self._factors = _eliminate(self)
            return self._factors

    def column_of_inverse(self, col: Key) -> dict[Key, Fraction]:
        """Return column ``col`` of the inverse as a key -> value map."""
        with self._lock:
            cached = self._columns.get(col)
        if cached is not None:
            return cached
        if col not in self.row_index:
            raise KeyError(col)
        rhs = [Fraction(int(k == col)) for k in self.rows]
        x = self.factors().solve(rhs)
        column = dict(zip(self.cols, x))
        with self._lock:
            self._columns.setdefault(col, column)
        return column


def _eliminate(m: ExactMatrix) -> _Factors:
    if not m.is_square:
        raise ValueError("Only square matrices can be factorized")
    n = len(m.rows)
    rows = [{j: v for j, v in enumerate(r) if v} for r in m.to_lists()]
    steps = []
    for c in range(n):
        p = next((r for r in range(c, n) if rows[r].get(c)), None)
        if p is None:
            raise SingularMatrixError(f"Matrix is singular (column {m.cols[c]!r})")
        rows[c], rows[p] = rows[p], rows[c]
        pivot_row = rows[c]
        pivot = pivot_row[c]
        mults = []
        for r in range(c + 1, n):
            a = rows[r].get(c)
            if not a:
                continue
            f = a / pivot
            target = rows[r]
            for j, v in pivot_row.items():
                nv = target.get(j, 0) - f * v
                if nv:
                    target[j] = nv
                else:
                    target.pop(j, None)
            mults.append((r, f))
        steps.append((c, p, mults))
    logger.debug("Factorized %dx%d exact matrix", n, n)
    return _Factors(steps, rows)


def det_exact(m: ExactMatrix) -> Fraction:
    """Return the exact determinant by fraction-free (Bareiss) elimination.

    Rows are first scaled to integers by the least common multiple of their
    denominators; the Bareiss recurrence then divides exactly at every step.

    Parameters
    ----------
    m : ExactMatrix
        Square matrix.

    Returns
    -------
    Fraction
        The determinant; integral whenever ``m`` is.
    """
    if not m.is_square:
        raise ValueError("Determinant of a non-square matrix")
    n = len(m.rows)
    if n == 0:
        return Fraction(1)
    scale = 1
    a: list[list[int]] = []
    for row in m.to_lists():
        den = lcm(*(v.denominator for v in row))
        scale *= den
        a.append([v.numerator * (den // v.denominator) for v in row])
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return Fraction(0)
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        akk = a[k][k]
        for i in range(k + 1, n):
            aik = a[i][k]
            row_i, row_k = a[i], a[k]
            for j in range(k + 1, n):
                row_i[j] = (row_i[j] * akk - aik * row_k[j]) // prev
            row_i[k] = 0
        prev = akk
    return Fraction(sign * a[n - 1][n - 1], scale)


def solve_exact(m: ExactMatrix, rhs: Sequence) -> list[Fraction]:
    """Solve ``m x = rhs`` exactly.

    Parameters
    ----------
    m : ExactMatrix
        Square, invertible matrix.
    rhs : sequence
        Right-hand side aligned with ``m.rows``.

    Returns
    -------
    list of Fraction
        Solution aligned with ``m.cols``; ``m.apply(x) == rhs`` exactly.

    Raises
    ------
    SingularMatrixError
        If ``m`` is singular.
    """
    if len(rhs) != len(m.rows):
        raise ValueError("Right-hand side length does not match the matrix")
    return m.factors().solve([Fraction(v) for v in rhs])


def inverse_entry(m: ExactMatrix, row: Key, col: Key) -> Fraction:
    """Return ``(m^-1)(row, col)`` from one cached column solve.

    Raises
    ------
    SingularMatrixError
        If ``m`` is singular.
    """
    return m.column_of_inverse(col)[row]


def _primal_keys(g1: PlaneGraph) -> dict[int, Point]:
    return {v.id: (v.pos[0] // 2, v.pos[1] // 2) for v in g1.vertices if v.role == "primal"}


def dirichlet_matrix(g1: PlaneGraph) -> ExactMatrix:
    """Return ``K = 4 I - A(G1)`` indexed by primal positions ``(x, y)``.

    Every primal vertex gets 4 on the diagonal, including boundary vertices
    whose missing neighbours are slots to the root.
    """
    keys = _primal_keys(g1)
    order = sorted(keys.values(), key=lambda p: (p[1], p[0]))
    index = {p: i for i, p in enumerate(order)}
    n = len(order)
    entries = [[0] * n for _ in range(n)]
    for i in range(n):
        entries[i][i] = 4
    for e in g1.edges:
        if e.kind != "primal-edge" or e.u not in keys or e.v not in keys:
            continue
        i, j = index[keys[e.u]], index[keys[e.v]]
        entries[i][j] -= e.weight
        entries[j][i] -= e.weight
    logger.debug("Built %dx%d Dirichlet matrix", n, n)
    return ExactMatrix(order, order, entries)


def transition_matrix(g1: PlaneGraph) -> ExactMatrix:
    """Return ``Q``: one step of the walk on G_{1,R} restricted to G1.

    Each primal vertex moves to each of its four edge slots with
    probability 1/4, so ``4 (I - Q) = K``.
    """
    k = dirichlet_matrix(g1)
    entries = [
        [(Fraction(0) if r == c else -v / 4) for c, v in zip(k.cols, row)]
        for r, row in zip(k.rows, k.to_lists())
    ]
    return ExactMatrix(k.rows, k.cols, entries)


def subtract(a: ExactMatrix, b: ExactMatrix) -> ExactMatrix:
    """Entrywise ``a - b`` for matrices with identical keys."""
    if a.rows != b.rows or a.cols != b.cols:
        raise ValueError("Matrix keys differ")
    return ExactMatrix(
        a.rows,
        a.cols,
        [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a.to_lists(), b.to_lists())],
    )
