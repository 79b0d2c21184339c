"""Large-grid behaviour of the single-impurity distribution.

Eigen-expansions of ``K^-1`` on rectangles, the continuum limit of its
entries next to the corner, the growth of ``E[l_T]``, the geometric decay
on chains and tail masses of the impurity position.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .counts import Normalization, grid_context, impurity_distribution
from .models import DimerlabError, GridSpec, Point, Terminal

logger = logging.getLogger(__name__)

LAMBDA_PLUS = 2 + math.sqrt(3)


class SpectralRangeError(DimerlabError):
    """Raised when a spectral evaluation is asked outside the grid."""

    pass


@dataclass(frozen=True)
class SpectralGrid:
    """Dirichlet eigenvalues and sine factors of an ``n x m`` grid.

    ``e[k, l] = 4 - 2 cos(k pi / (n+1)) - 2 cos(l pi / (m+1))`` for
    ``1 <= k <= n``, ``1 <= l <= m``; all are positive. Double precision.
    """

    n: int
    m: int

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise SpectralRangeError(f"Grid sides must be >= 1, got {self.n}x{self.m}")

    @cached_property
    def theta(self) -> np.ndarray:
        return np.arange(1, self.n + 1) * np.pi / (self.n + 1)

    @cached_property
    def phi(self) -> np.ndarray:
        return np.arange(1, self.m + 1) * np.pi / (self.m + 1)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return 4 - 2 * np.cos(self.theta)[:, None] - 2 * np.cos(self.phi)[None, :]

    @cached_property
    def sx(self) -> np.ndarray:
        """``sx[x - 1, k - 1] = sin(k pi x / (n+1))``."""
        x = np.arange(1, self.n + 1)
        return np.sin(np.outer(x, self.theta))

    @cached_property
    def sy(self) -> np.ndarray:
        y = np.arange(1, self.m + 1)
        return np.sin(np.outer(y, self.phi))

    def check(self, p: Point) -> None:
        if not (1 <= p[0] <= self.n and 1 <= p[1] <= self.m):
            raise SpectralRangeError(f"{p} is outside the {self.n}x{self.m} grid")

    def column(self, source: Point = (1, 1)) -> np.ndarray:
        """``K^-1(., source)`` as an ``n x m`` array indexed ``[x-1, y-1]``."""
        self.check(source)
        w = np.outer(self.sx[source[0] - 1], self.sy[source[1] - 1]) / self.eigenvalues
        scale = 4.0 / ((self.n + 1) * (self.m + 1))
        return scale * self.sx @ w @ self.sy.T


def spectral_entry(
    n: int, m: int, x: int, y: int, source: Point = (1, 1)
) -> float:
    """``K^-1((x, y), source)`` on the ``n x m`` grid from its eigen-expansion.

    Raises
    ------
    SpectralRangeError
        If ``(x, y)`` or ``source`` is outside the grid.
    """
    grid = SpectralGrid(n, m)
    grid.check((x, y))
    grid.check(source)
    terms = (
        np.outer(grid.sx[x - 1] * grid.sx[source[0] - 1], grid.sy[y - 1] * grid.sy[source[1] - 1])
        / grid.eigenvalues
    )
    return float(4.0 / ((n + 1) * (m + 1)) * math.fsum(terms.ravel()))


@dataclass
class ContinuumEstimate:
    """A quadrature value with the last doubling difference as its error."""

    value: float
    error: float
    resolution: int


def _midpoint(x: int, y: int, cells: int) -> float:
    h = np.pi / cells
    t = (np.arange(cells) + 0.5) * h
    th, ph = t[:, None], t[None, :]
    integrand = (
        np.sin(th * x) * np.sin(ph * y) * np.sin(th) * np.sin(ph)
        / (2 - np.cos(th) - np.cos(ph))
    )
    return float(2 / np.pi**2 * integrand.sum() * h * h)


def continuum_entry(
    x: int,
    y: int,
    tol: float = 1e-6,
    start: int = 64,
    max_resolution: int = 2048,
) -> ContinuumEstimate:
    """Limit of ``K^-1((x, y), (1, 1))`` on growing square grids.

    ``A(x, y) = (2 / pi^2) int int_{(0, pi)^2} sin(x t) sin(y s) sin t sin s
    / (2 - cos t - cos s)``. The integrand is bounded near the origin, and
    the midpoint rule never evaluates there. The resolution doubles until
    two successive values differ by less than ``tol``.
    """
    if x < 1 or y < 1:
        raise SpectralRangeError(f"Continuum entries need x, y >= 1, got ({x}, {y})")
    cells = start
    value = _midpoint(x, y, cells)
    error = math.inf
    while cells < max_resolution:
        cells *= 2
        refined = _midpoint(x, y, cells)
        error = abs(refined - value)
        value = refined
        logger.info("A(%d,%d) at %d cells: %.10f (diff %.2e)", x, y, cells, value, error)
        if error < tol:
            break
    return ContinuumEstimate(value, error, cells)


def expected_ti_length(n: int, m: Optional[int] = None) -> float:
    """``E[l_T] = sum_{x,y} K^-1((x, y), (1, 1))`` from the odd-mode sum.

    Only odd ``k``, ``l`` survive the summation over ``x`` and ``y``.
    """
    m = n if m is None else m
    if n < 1 or m < 1:
        raise SpectralRangeError(f"Grid sides must be >= 1, got {n}x{m}")
    grid = SpectralGrid(n, m)
    th, ph = grid.theta[::2], grid.phi[::2]
    fx = np.sin(th) ** 2 / (1 - np.cos(th))
    fy = np.sin(ph) ** 2 / (1 - np.cos(ph))
    terms = np.outer(fx, fy) / grid.eigenvalues[::2, ::2]
    return float(4.0 / ((n + 1) * (m + 1)) * math.fsum(terms.ravel()))


def exact_ti_length(n: int, m: Optional[int] = None) -> Fraction:
    """``sum_x K^-1(x, (1, 1))`` in exact arithmetic."""
    m = n if m is None else m
    spec = GridSpec("rect", n, m)
    column = grid_context(spec).K.column_of_inverse((1, 1))
    return sum(column.values(), Fraction(0))


def ti_length_slope(n: int) -> float:
    """``(E[l_T](2n) - E[l_T](n)) / log 2``; tends to ``2 / pi``."""
    return (expected_ti_length(2 * n) - expected_ti_length(n)) / math.log(2)


# --- Chains ---


def recurrence_weights(n: int) -> list[int]:
    """``M(j)`` for a chain of ``n`` with the terminal at vertex 1.

    The cofactor of the tridiagonal ``[-1, 4, -1]`` matrix is the
    determinant ``D_{n-j}`` of the trailing block, with ``D_0 = 1``,
    ``D_1 = 4`` and ``D_k = 4 D_{k-1} - D_{k-2}``.
    """
    if n < 1:
        raise SpectralRangeError("A chain needs at least one vertex")
    d = [1, 4]
    while len(d) < n:
        d.append(4 * d[-1] - d[-2])
    return [d[n - j] for j in range(1, n + 1)]


def chain_spec(n: int) -> GridSpec:
    """A chain of ``n`` with its terminal on the west end of vertex 1."""
    return GridSpec.chain(n, [Terminal((1, 1), "W")])


@dataclass
class ChainAsymptotics:
    """Exact chain weights and their decay.

    Attributes
    ----------
    weights : list of int
        ``M(j)`` for ``j = 1 .. n``.
    probabilities : list of Fraction
        ``P(I1 = j)`` under the per-dual normalization.
    ratios : list of float
        ``M(j+1) / M(j)``.
    rate : float
        Geometric rate fitted to ``log M(j)`` over the middle of the chain.
    prefactors : list of float
        ``P(I1 = j) * lambda_+^j``; compare with ``1/4``.
    """

    n: int
    weights: list[int]
    probabilities: list[Fraction]
    ratios: list[float] = field(default_factory=list)
    rate: float = 0.0
    prefactors: list[float] = field(default_factory=list)
    lambda_plus: float = LAMBDA_PLUS


def chain_asymptotics(n: int, window: Optional[tuple[int, int]] = None) -> ChainAsymptotics:
    """Tabulate a chain's single-impurity weights and fit their decay rate.

    Parameters
    ----------
    n : int
        Chain length.
    window : (int, int), optional
        Inclusive ``j`` range of the log-linear fit; defaults to the middle
        half of the chain.
    """
    spec = chain_spec(n)
    dist = impurity_distribution(spec, Normalization.PER_DUAL)
    weights = [dist.weights[(j, 1)] for j in range(1, n + 1)]
    probabilities = [dist.probabilities[(j, 1)] for j in range(1, n + 1)]
    ratios = [b / a for a, b in zip(weights, weights[1:])]
    lo, hi = window or (max(1, n // 4), max(2, 3 * n // 4))
    js = np.arange(lo, hi + 1)
    slope = np.polyfit(js, [math.log(weights[j - 1]) for j in js], 1)[0] if len(js) > 1 else 0.0
    prefactors = [float(p) * LAMBDA_PLUS**j for j, p in enumerate(probabilities, start=1)]
    logger.info("Chain %d: fitted rate %.6f", n, math.exp(slope))
    return ChainAsymptotics(
        n=n,
        weights=weights,
        probabilities=probabilities,
        ratios=ratios,
        rate=float(math.exp(slope)),
        prefactors=prefactors,
    )


# --- Concentration ---


@dataclass
class ConcentrationRow:
    """Tail mass ``P(|r| >= c n)`` and its Chebyshev bound ``E[l_T] / (c n)``."""

    n: int
    c: float
    tail: float
    bound: float
    method: str


def _tail_exact(n: int, dim: int, c: float) -> tuple[float, float]:
    if dim == 1:
        spec = chain_spec(n)
    else:
        spec = GridSpec.rectangle(n, n, [Terminal((1, 1), "W")])
    dist = impurity_distribution(spec, Normalization.PER_DUAL)
    tail = sum(
        (p for (x, y), p in dist.probabilities.items() if max(x - 1, y - 1) >= c * n),
        Fraction(0),
    )
    mean = Fraction(sum(dist.weights.values()), dist.det_k)
    return float(tail), float(mean)


def _tail_spectral(n: int, c: float) -> tuple[float, float]:
    a = SpectralGrid(n, n).column((1, 1))
    total = 4 * a.sum() + 2
    x, y = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    outside = np.maximum(x, y) >= c * n
    return float(4 * a[outside].sum() / total), float(a.sum())


def concentration_profile(
    ns: Sequence[int], c: float, dim: int = 2, exact_limit: int = 12
) -> list[ConcentrationRow]:
    """Tail masses of the impurity position outside the box of side ``c n``.

    ``|r|`` is the max-norm distance from the terminal vertex ``(1, 1)``.
    Sizes up to ``exact_limit`` (and every chain) use exact weights; larger
    squares use the spectral column.

    Raises
    ------
    ValueError
        If ``c`` is not in ``(0, 1]`` or ``dim`` is not 1 or 2.
    """
    if not 0 < c <= 1:
        raise ValueError(f"c must lie in (0, 1], got {c}")
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    rows = []
    for n in ns:
        if dim == 1 or n <= exact_limit:
            tail, mean = _tail_exact(n, dim, c)
            method = "exact"
        else:
            tail, mean = _tail_spectral(n, c)
            method = "spectral"
            logger.info("Tail for n=%d comes from the spectral column (float)", n)
        rows.append(ConcentrationRow(n, c, tail, mean / (c * n), method))
    return rows
