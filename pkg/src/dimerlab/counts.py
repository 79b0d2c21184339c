"""Exact matching counts for impurity configurations.

Most counts are integers ``|det(...)| * det K`` built from entries of
``K^-1`` (the ``cofactor`` route), from exact hitting probabilities of the
walk on G_{1,R} (the ``hitting`` route), or from response-matrix minors of
a circular graph (the ``grove`` route). Chains also have a column sweep
over interval forests (the ``transfer`` route). The routes are independent
code paths over the same quantities and must agree exactly.
"""

import logging
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from itertools import permutations, product
from typing import Optional, Sequence

from .groves import (
    CircularGraph,
    CrossingPartitionError,
    NonBipartitePartitionError,
    PartitionSpec,
    assemble_circular,
    check_noncrossing,
    grove_count_bipartite,
    perturbed_matrix,
    response_matrix,
)
from .lattice import PlaneGraph, boundary_arc, build_g1, build_slotted
from .linalg import (
    ExactMatrix,
    det_exact,
    dirichlet_matrix,
    solve_exact,
    subtract,
    transition_matrix,
)
from .models import (
    CountResult,
    DimerlabError,
    DualClass,
    GridSpec,
    GridSpecError,
    ImpurityConfig,
    Point,
    Slot,
    format_half,
    half,
)

logger = logging.getLogger(__name__)

ROUTES = ("cofactor", "hitting", "grove")
CHAIN_ROUTES = ("grove", "transfer")


class ConfigurationError(DimerlabError):
    """Raised when an impurity configuration is outside a formula's scope."""

    pass


class Normalization(str, Enum):
    """How single-impurity weights turn into probabilities.

    ``PER_DUAL`` reads ``M(x)`` as the count for one fixed dual endpoint, so
    vertex ``x`` carries ``4 M(x)`` matchings and the terminal diagonals add
    ``2 det K``. ``SUMMED`` reads ``M(x)`` as already summed over the dual
    endpoints.
    """

    PER_DUAL = "per-dual"
    SUMMED = "summed"


@dataclass(frozen=True)
class _GridContext:
    g1: PlaneGraph
    K: ExactMatrix
    det_k: int
    walk: ExactMatrix


@lru_cache(maxsize=32)
def _grid_context(n: int, m: int) -> _GridContext:
    g1 = build_g1(GridSpec("rect", n, m))
    k = dirichlet_matrix(g1)
    det_k = int(det_exact(k))
    q = transition_matrix(g1)
    walk = subtract(ExactMatrix.identity(q.rows), q)
    logger.info("Prepared %dx%d grid: det K = %d", n, m, det_k)
    return _GridContext(g1, k, det_k, walk)


def grid_context(spec: GridSpec) -> _GridContext:
    """Return the cached primal grid, ``K``, ``det K`` and ``I - Q``."""
    return _grid_context(spec.n, spec.m)


@lru_cache(maxsize=256)
def _hitting_column(n: int, m: int, t: Point) -> dict[Point, Fraction]:
    ctx = _grid_context(n, m)
    rhs = [Fraction(int(p == t), 4) for p in ctx.walk.rows]
    return dict(zip(ctx.walk.cols, solve_exact(ctx.walk, rhs)))


def hitting_column(spec: GridSpec, t: Point) -> dict[Point, Fraction]:
    """Exact ``H_{x,t}`` for every ``x``: the walk from ``x`` on G_{1,R}
    is absorbed at the root through the slot at ``t``.

    Solves ``(I - Q) h = e_t / 4``.
    """
    if not spec.contains(t):
        raise GridSpecError(f"Vertex {t} is outside the grid")
    return _hitting_column(spec.n, spec.m, t)


def _column(spec: GridSpec, t: Point, route: str) -> dict[Point, Fraction]:
    if route == "hitting":
        return hitting_column(spec, t)
    return grid_context(spec).K.column_of_inverse(t)


def _check_route(route: str) -> None:
    if route not in ROUTES:
        raise ConfigurationError(f"Unknown route {route!r}; expected one of {ROUTES}")


def _as_count(value: Fraction) -> int:
    if value.denominator != 1:
        raise ArithmeticError(f"Count {value} is not an integer")
    return abs(value.numerator)


def _determinant_count(
    spec: GridSpec, rows: Sequence[Sequence[Point]], route: str
) -> int:
    """``|det [sum_{y in row} G(y, t_i)]| * det K`` over row multisets."""
    ctx = grid_context(spec)
    columns = [_column(spec, t.vertex, route) for t in spec.terminals]
    entries = [
        [sum((col[y] for y in row), Fraction(0)) for col in columns] for row in rows
    ]
    keys = list(range(len(rows)))
    m = ExactMatrix(keys, list(range(len(columns))), entries)
    return _as_count(det_exact(m) * ctx.det_k)


# --- One impurity ---


def count_one_impurity(spec: GridSpec, x: Point, route: str = "cofactor") -> CountResult:
    """Count matchings of G^(1) whose impurity has primal endpoint ``x``.

    The count is per fixed dual endpoint: ``M(x) = |K^-1(x, t) det K|``.

    Parameters
    ----------
    spec : GridSpec
        Grid with ``k = 1`` and one terminal.
    x : tuple of int
        Primal vertex.
    route : str
        ``cofactor``, ``hitting`` or ``grove``.

    Returns
    -------
    CountResult

    Raises
    ------
    ConfigurationError
        If ``spec.k != 1`` or the route is unknown.
    GridSpecError
        If ``x`` is outside the grid.
    """
    _check_route(route)
    spec.validate()
    if spec.k != 1:
        raise ConfigurationError(f"One-impurity count needs k=1, got k={spec.k}")
    if not spec.contains(x):
        raise GridSpecError(f"Impurity vertex {x} is outside the grid")
    if route == "grove":
        value = _one_impurity_grove(spec, x)
    else:
        value = _determinant_count(spec, [[x]], route)
    logger.debug("M(%s) = %d via %s", x, value, route)
    return CountResult(value, route)


def _one_impurity_grove(spec: GridSpec, x: Point) -> int:
    """Hang a pendant on ``x`` and merge every plain slot node into one.

    The pendant raises the degree of ``x`` to five, so the interior block
    is ``K_x``; the grove with ``{pendant, T}`` and the merged node alone
    has the same count as the single-impurity matchings.
    """
    t_slot = spec.terminals[0].slot
    slots = spec.slots()
    gap = (slots.index(t_slot) - 1) % len(slots)
    g = build_slotted(spec, pendants=[(x, gap)])
    plain = [g.tagged(s.label()) for s in slots if s != t_slot]
    nodes = [v for v in g.boundary_cycle if v not in plain[1:]]
    c = assemble_circular(g, identify=[plain], nodes=nodes, names={plain[0]: "Y"})
    ctx = grid_context(spec)
    if det_exact(c.K) != det_exact(perturbed_matrix(ctx.K, x)):
        raise ArithmeticError("Pendant graph interior block differs from K_x")
    pendant = f"V({x[0]},{x[1]})"
    p = PartitionSpec.from_pairs(c.nodes, [(pendant, "T1")])
    return _as_count(grove_count_bipartite(c, p))


# --- Impurities on the boundary ---


def _slot_key(spec: GridSpec, s: Slot) -> str:
    for i, t in enumerate(spec.terminals, start=1):
        if t.slot == s:
            return f"T{i}"
    return s.label()


def _adjacent_slot(slots: list[Slot], anchor: Slot, owner: Point) -> Slot:
    """The slot of ``owner`` cyclically next to ``anchor``."""
    i = slots.index(anchor)
    for j in (i - 1, i + 1):
        s = slots[j % len(slots)]
        if s.vertex == owner:
            return s
    raise ConfigurationError(f"Vertex {owner} has no slot next to {anchor.label()}")


def _reject_terminal_impurities(spec: GridSpec, points: Sequence[Point]) -> None:
    """The boundary determinants do not read the dual endpoints, so they
    only cover impurities away from the terminal vertices."""
    terminal_vertices = {t.vertex for t in spec.terminals}
    for p in points:
        if p in terminal_vertices:
            raise ConfigurationError(
                f"Impurity at {p} sits on a terminal vertex; its count depends on the dual"
            )


def count_k_boundary(
    spec: GridSpec,
    points: Sequence[Point],
    route: str = "cofactor",
    sides: Optional[Sequence[Optional[str]]] = None,
) -> CountResult:
    """Count matchings with ``k`` impurities on the boundary.

    The ``2k - 1`` rows are ``a_1 .. a_k`` and the arc sums
    ``dC_j = sum_{y in dC_j} G(y, .)`` over the terminal-free arcs between
    consecutive impurities, slots counted with multiplicity.

    Parameters
    ----------
    spec : GridSpec
        Grid with ``2k - 1`` terminals.
    points : sequence of tuple of int
        Primal endpoints ``a_1 .. a_k`` in boundary order.
    route : str
        ``cofactor``, ``hitting`` or ``grove``.
    sides : sequence, optional
        Arc side (``ccw``/``cw``) per consecutive pair; ``None`` picks the
        terminal-free side.

    Returns
    -------
    CountResult
        Zero when two impurities coincide or an arc is empty.

    Raises
    ------
    ConfigurationError
        On a wrong impurity count or an unknown route. Also when an impurity
        sits on a terminal vertex.
    GridSpecError, ArcError
        If an impurity is off the boundary or no terminal-free arc exists.
    """
    _check_route(route)
    spec.validate()
    points = list(points)
    if len(points) != spec.k or spec.k < 2:
        raise ConfigurationError(
            f"Boundary count needs k={spec.k} >= 2 impurities, got {len(points)}"
        )
    for p in points:
        if not spec.on_boundary(p):
            raise GridSpecError(f"Vertex {p} is not on the boundary")
    _reject_terminal_impurities(spec, points)
    if len(set(points)) != len(points):
        return CountResult(0, route)

    ctx = grid_context(spec)
    sides = list(sides) if sides is not None else [None] * (len(points) - 1)
    arcs = [
        boundary_arc(ctx.g1, spec, a, b, side)
        for a, b, side in zip(points, points[1:], sides)
    ]
    if any(not arc.slots for arc in arcs):
        return CountResult(0, route)

    if route == "grove":
        c, pairs = boundary_circular(spec, points, sides)
        value = _as_count(grove_count_bipartite(c, PartitionSpec.from_pairs(c.nodes, pairs)))
    else:
        rows: list[list[Point]] = [[points[0]]]
        for arc, p in zip(arcs, points[1:]):
            rows.append([s.vertex for s in arc.slots])
            rows.append([p])
        value = _determinant_count(spec, rows, route)
    logger.debug("M(%s) = %d via %s", points, value, route)
    return CountResult(value, route)


def _nested_pairs(order: Sequence, reds: set, blues: set) -> list[tuple]:
    """The planar pairing of two contiguous colour classes."""
    seq = [x for x in order if x in reds or x in blues]
    n = len(seq)
    start = next(
        (i for i in range(n) if seq[i] in reds and seq[i - 1] in blues), None
    )
    if start is None:
        raise NonBipartitePartitionError("No red/blue boundary among the nodes")
    seq = seq[start:] + seq[:start]
    r = [x for x in seq if x in reds]
    b = [x for x in seq if x in blues]
    if seq != r + b or len(r) != len(b):
        raise NonBipartitePartitionError("Red nodes are not contiguous")
    return list(zip(r, reversed(b)))


def _boundary_instance(
    spec: GridSpec, points: list[Point], arcs
) -> tuple[CircularGraph, list[tuple]]:
    slots = spec.slots()
    g = build_slotted(spec)
    classes = [[g.tagged(s.label()) for s in arc.slots] for arc in arcs]
    names = {}
    skip = set()
    for j, cls in enumerate(classes, start=1):
        first = min(cls, key=g.boundary_cycle.index)
        names[first] = f"C{j}"
        skip |= set(cls) - {first}
    nodes = [v for v in g.boundary_cycle if v not in skip]
    c = assemble_circular(g, identify=classes, nodes=nodes, names=names)

    reds = {f"C{j}" for j in range(1, len(arcs) + 1)}
    for j, p in enumerate(points):
        arc = arcs[j - 1] if j else arcs[0]
        near = arc.slots[-1] if j else arc.slots[0]
        key = _slot_key(spec, _adjacent_slot(slots, near, p))
        if key.startswith("T"):
            raise ConfigurationError(f"Impurity {p} sits on a terminal slot next to its arc")
        reds.add(key)
    blues = {f"T{i}" for i in range(1, len(spec.terminals) + 1)}
    return c, _nested_pairs(c.nodes, reds, blues)


def boundary_circular(
    spec: GridSpec,
    points: Sequence[Point],
    sides: Optional[Sequence[Optional[str]]] = None,
) -> tuple[CircularGraph, list[tuple]]:
    """The circular graph and node pairing behind the boundary grove count.

    Arc slots are merged into nodes ``C1 .. C(k-1)``; each pair joins a
    red node (an impurity slot or an arc) to a terminal.
    """
    spec.validate()
    g1 = grid_context(spec).g1
    points = list(points)
    sides = list(sides) if sides is not None else [None] * (len(points) - 1)
    arcs = [
        boundary_arc(g1, spec, a, b, side)
        for a, b, side in zip(points, points[1:], sides)
    ]
    if any(not arc.slots for arc in arcs):
        raise ConfigurationError("An arc between consecutive impurities is empty")
    return _boundary_instance(spec, points, arcs)


def count_two_boundary(
    spec: GridSpec,
    a: Point,
    b: Point,
    route: str = "cofactor",
    side: Optional[str] = None,
) -> CountResult:
    """Count matchings of G^(2) with both impurities on the boundary.

    Rows ``a``, ``dC`` and ``b`` of ``K^-1`` against the three terminals.
    An empty arc (``a`` and ``b`` adjacent) gives a zero row and the count
    0.
    """
    if spec.k != 2:
        raise ConfigurationError(f"Two-impurity count needs k=2, got k={spec.k}")
    return count_k_boundary(spec, [a, b], route, [side])


def hitting_matrix_count(spec: GridSpec, a: Point, b: Point) -> CountResult:
    """``count_two_boundary`` phrased through exact hitting probabilities."""
    return count_two_boundary(spec, a, b, route="hitting")


# --- Near-boundary impurity ---


def near_boundary_partner(spec: GridSpec, a: Point, dual: Point) -> Point:
    """Return ``c``: the boundary neighbour of ``a`` across the dual edge
    joining ``dual`` to the boundary.

    Raises
    ------
    ConfigurationError
        If ``dual`` is not a corner of ``a``, is itself a boundary dual, or
        does not have exactly one boundary dual neighbour.
    """
    if dual not in spec.corner_duals(a):
        raise ConfigurationError(f"{format_half(dual)} is not a corner of {a}")
    if spec.is_boundary_dual(dual):
        raise ConfigurationError(f"{format_half(dual)} is a boundary dual vertex")
    gx, gy = dual
    outer = [
        (gx + dx, gy + dy)
        for dx, dy in ((2, 0), (-2, 0), (0, 2), (0, -2))
        if 1 <= gx + dx <= 2 * spec.n + 1
        and 1 <= gy + dy <= 2 * spec.m + 1
        and spec.is_boundary_dual((gx + dx, gy + dy))
    ]
    if len(outer) != 1:
        raise ConfigurationError(
            f"c-undefined: {format_half(dual)} has {len(outer)} boundary dual neighbours"
        )
    wx, wy = outer[0]
    mx, my = (gx + wx) // 2, (gy + wy) // 2
    px, py = -(wy - gy) // 2, (wx - gx) // 2
    ends = [(mx + px, my + py), (mx - px, my - py)]
    if half(a) not in ends:
        raise ConfigurationError(
            f"c-undefined: the edge crossing {format_half(dual)} does not touch {a}"
        )
    other = ends[1] if ends[0] == half(a) else ends[0]
    return (other[0] // 2, other[1] // 2)


def count_two_near_boundary(
    spec: GridSpec,
    a: Point,
    b: Point,
    dual_a: Point,
    route: str = "cofactor",
) -> CountResult:
    """Count matchings where impurity ``a`` has a near-boundary dual.

    ``M = A + B``: ``A`` is the boundary determinant with rows ``a``,
    ``dC``, ``b`` and ``B`` the one with rows ``a``, ``c``, ``b``.

    Parameters
    ----------
    spec : GridSpec
        Grid with ``k = 2``.
    a, b : tuple of int
        Boundary impurity vertices; ``b``'s dual is a boundary dual.
    dual_a : tuple of int
        Interior dual endpoint of ``a`` in half-units.
    route : str
        ``cofactor`` or ``hitting``.

    Raises
    ------
    ConfigurationError
        ``c-undefined`` when ``c`` does not exist, equals ``b`` or lies
        outside the arc. Also when ``a`` or ``b`` sits on a terminal
        vertex.
    """
    if route == "grove":
        raise ConfigurationError("The near-boundary count has no grove route")
    if spec.k != 2:
        raise ConfigurationError(f"Two-impurity count needs k=2, got k={spec.k}")
    _reject_terminal_impurities(spec, [a, b])
    c = near_boundary_partner(spec, a, dual_a)
    if c == b:
        raise ConfigurationError(f"c-undefined: c coincides with b at {b}")
    ctx = grid_context(spec)
    arc = boundary_arc(ctx.g1, spec, a, b)
    if c not in arc.members:
        raise ConfigurationError(f"c-undefined: {c} is not inside the arc from {a} to {b}")
    part_a = count_two_boundary(spec, a, b, route, arc.side).value
    part_b = _determinant_count(spec, [[a], [c], [b]], route)
    logger.debug("Near-boundary parts A=%d B=%d (c=%s)", part_a, part_b, c)
    return CountResult(part_a + part_b, route, {"A": part_a, "B": part_b})


# --- Chains ---


def _pendant_tag(p: Point) -> str:
    return f"V({p[0]},{p[1]})"


class _ChainSum:
    """Structure sum for two impurities on a chain.

    Pointer configurations of the two impurities close exactly one cycle
    through two slots; the cycle must separate the two dual endpoints. Each
    tree inventory is one grove partition of a slotted graph with pendants
    on the impurity vertices.
    """

    def __init__(self, spec: GridSpec, a: Point, b: Point, duals: Sequence[Point]):
        self.spec = spec
        self.a, self.b = a, b
        self.slots = spec.slots()
        self.gaps = [spec.gap_index(d) for d in duals]
        self._circular: dict[tuple, tuple] = {}

    def separates(self, p: int, q: int) -> bool:
        """Whether cutting slots ``p`` and ``q`` puts the two gaps apart."""
        count = len(self.slots)
        span = (q - p) % count
        first, second = ((g - p) % count < span for g in self.gaps)
        return first != second

    def _gaps_around(self, p: Point) -> list[int]:
        return sorted(
            self.spec.gap_index(d)
            for d in self.spec.corner_duals(p)
            if self.spec.is_boundary_dual(d)
        )

    def _graph(self, owners: tuple[Point, ...], omit: Optional[Slot]):
        key = (owners, omit)
        if key not in self._circular:
            pendants = [(p, self._gaps_around(p)[0]) for p in owners]
            g = build_slotted(self.spec, pendants=pendants, omit=(omit,) if omit else ())
            c = assemble_circular(g, nodes=list(g.boundary_cycle))
            self._circular[key] = (c, response_matrix(c))
        return self._circular[key]

    def _orders(self, owners: tuple[Point, ...], omit: Optional[Slot]):
        options = [[(_pendant_tag(p), g) for g in self._gaps_around(p)] for p in owners]
        for combo in product(*options):
            for arrangement in permutations(combo):
                order = []
                for i, s in enumerate(self.slots):
                    if s != omit:
                        order.append(_slot_key(self.spec, s))
                    order += [tag for tag, g in arrangement if g == i]
                yield order

    def term(
        self,
        pairs: list[tuple[str, str]],
        owners: tuple[Point, ...],
        omit: Optional[Slot] = None,
    ) -> int:
        """Grove count of ``pairs``; pendants may sit in any gap around
        their vertex, and a crossing placement means no grove exists."""
        c, response = self._graph(owners, omit)
        orders = list(self._orders(owners, omit))
        for order in orders:
            try:
                check_noncrossing(order, pairs)
            except CrossingPartitionError:
                return 0
        for order in orders:
            try:
                part = PartitionSpec.from_pairs(order, pairs)
            except NonBipartitePartitionError:
                continue
            z = grove_count_bipartite(replace(c, nodes=order), part, response)
            return _as_count(z)
        raise NonBipartitePartitionError(f"No bipartite pendant placement for {pairs}")

    def total(self) -> tuple[int, int]:
        """Return the terms with a third tree to the root and the joined terms."""
        spec = self.spec
        term_slots = [self.slots.index(t.slot) for t in spec.terminals]
        taken = spec.terminal_slots()
        free = [
            i
            for i, s in enumerate(self.slots)
            if s not in taken and s.vertex not in (self.a, self.b)
        ]
        va, vb = _pendant_tag(self.a), _pendant_tag(self.b)
        rooted = 0
        for i, j, l in permutations(range(3)):
            for z in free:
                if self.separates(term_slots[l], z):
                    pairs = [
                        (va, f"T{i + 1}"),
                        (vb, f"T{j + 1}"),
                        (f"T{l + 1}", self.slots[z].label()),
                    ]
                    rooted += self.term(pairs, (self.a, self.b))
        joined = 0
        for owner, other in ((self.a, self.b), (self.b, self.a)):
            for j in range(3):
                i, l = (x for x in range(3) if x != j)
                if self.separates(term_slots[i], term_slots[l]):
                    joined += self._joined(owner, other, i, l, j)
        return rooted, joined

    def _joined(self, owner: Point, other: Point, i: int, l: int, j: int) -> int:
        """Terms where ``owner``'s tree holds terminals ``i`` and ``l``."""
        terminals = self.spec.terminals
        xi, xl, xo = terminals[i].vertex[0], terminals[l].vertex[0], owner[0]
        tail = (_pendant_tag(other), f"T{j + 1}")
        if min(xi, xl) <= xo <= max(xi, xl):
            return self.term([(f"T{i + 1}", f"T{l + 1}"), tail], (other,))
        # the nearer terminal hangs off the path from owner to the farther one
        near, far = (l, i) if abs(xl - xo) < abs(xi - xo) else (i, l)
        pairs = [(_pendant_tag(owner), f"T{far + 1}"), tail]
        return self.term(pairs, (self.a, self.b), terminals[near].slot)


class _ChainTransfer:
    """Column-by-column count of chain matchings with any number of
    impurities.

    A matching corresponds to a spanning tree of the slotted chain whose
    primal parts are intervals. An interval without impurities leaves
    through one plain slot; an interval with one impurity leaves through
    one of its terminals; two impurities in an interval give nothing. The
    dual edges left uncrossed must form trees that each hold exactly one
    impurity dual endpoint. The sweep keeps the two dual vertices of the
    current column (``b`` below, ``t`` above) with the number of impurity
    duals their components have collected.
    """

    def __init__(self, spec: GridSpec, config: ImpurityConfig):
        self.spec = spec
        self.impurities = Counter(p[0] for p in config.primals)
        self.marks = Counter(("b" if d[1] == 1 else "t", (d[0] - 1) // 2) for d in config.duals)
        self.terminal = spec.terminal_slots()

    def _edge(self, s: Slot) -> tuple[str, str]:
        """Frontier ends of the dual edge crossed by slot ``s``."""
        return {"S": ("b", "b'"), "N": ("t", "t'"), "W": ("b", "t"), "E": ("b'", "t'")}[
            s.direction
        ]

    @staticmethod
    def _link(label: dict, weight: dict, edges) -> Optional[tuple[dict, dict]]:
        label, weight = dict(label), dict(weight)
        for u, v in edges:
            lu, lv = label[u], label[v]
            if lu == lv:
                return None
            weight[lu] += weight.pop(lv)
            if weight[lu] > 1:
                return None
            label = {node: lu if l == lv else l for node, l in label.items()}
        return label, weight

    def _slot_choices(self, slots: list[Slot], imp: int, att: Optional[str]):
        """Yield the present dual edges and the interval exit per slot choice."""
        options = []
        for s in slots:
            if s in self.terminal:
                picks = [((), att)]
                if att is None:
                    picks.append(((), "term"))
            else:
                picks = [((self._edge(s),), att)]
                if att is None and imp == 0:
                    picks.append(((), "free"))
            options.append(picks)
        for combo in product(*options):
            exits = [a for _, a in combo if a != att]
            if len(exits) > 1:
                continue
            edges = [e for es, _ in combo for e in es]
            yield edges, exits[0] if exits else att

    @staticmethod
    def _closes(imp: int, att: Optional[str]) -> bool:
        return (imp, att) in ((0, "free"), (1, "term"))

    def total(self) -> int:
        if any(c > 1 for c in self.marks.values()):
            return 0
        n = self.spec.n
        # (b and t joined, b weight, t weight, interval impurities, interval exit)
        states = {(False, self.marks[("b", 0)], self.marks[("t", 0)], 0, None): 1}
        for x in range(1, n + 1):
            slots = self.spec.slots_of((x, 1))
            nxt: dict[tuple, int] = {}
            for (joined, wb, wt, imp, att), count in states.items():
                imp += self.impurities[x]
                if imp > 1 or (imp and att == "free"):
                    continue
                label = {"b": 0, "t": 0 if joined else 1, "b'": 2, "t'": 3}
                weight = {0: wb, 2: self.marks[("b", x)], 3: self.marks[("t", x)]}
                if not joined:
                    weight[1] = wt
                for edges, exit_ in self._slot_choices(slots, imp, att):
                    linked = self._link(label, weight, edges)
                    if linked is None:
                        continue
                    lab, wgt = linked
                    front = {lab["b'"], lab["t'"]}
                    if any(wgt[c] != 1 for c in {lab["b"], lab["t"]} - front):
                        continue
                    lab = {"b": lab["b'"], "t": lab["t'"]}
                    wgt = {c: wgt[c] for c in front}
                    for key in self._advance(lab, wgt, imp, exit_, x == n):
                        nxt[key] = nxt.get(key, 0) + count
            states = nxt
            logger.debug("Chain column %d: %d states", x, len(states))
        return sum(states.values())

    def _advance(self, label: dict, weight: dict, imp: int, att: Optional[str], last: bool):
        """Keep the interval open or cut it after the current column."""
        if last:
            if self._closes(imp, att) and all(w == 1 for w in weight.values()):
                yield (True, 1, 1, 0, None)
            return
        joined = label["b"] == label["t"]
        yield (joined, weight[label["b"]], weight[label["t"]], imp, att)
        if not self._closes(imp, att):
            return
        linked = self._link(label, weight, [("b", "t")])
        if linked is not None:
            lab, wgt = linked
            w = wgt[lab["b"]]
            yield (True, w, w, 0, None)


def count_chain(
    spec: GridSpec, config: ImpurityConfig, route: Optional[str] = None
) -> CountResult:
    """Count matchings of a chain's G^(k) for a full impurity configuration.

    ``k = 1`` is the single-impurity count. For ``k >= 2`` two routes
    exist:

    * ``grove`` (``k = 2`` only) sums grove determinants over tree
      inventories: part ``A`` has a third tree joining a terminal to a
      plain slot, part ``C`` has one impurity's tree holding two
      terminals.
    * ``transfer`` sweeps the chain column by column over interval
      forests and works for any ``k``.

    Parameters
    ----------
    spec : GridSpec
        Chain grid with ``2k - 1`` terminals.
    config : ImpurityConfig
        Impurity vertices; for ``k >= 2`` every dual endpoint is needed.
    route : str, optional
        ``grove`` or ``transfer``; ``None`` takes ``grove`` for ``k = 2``
        and ``transfer`` above. For ``k = 1`` any single-impurity route.

    Returns
    -------
    CountResult
        ``route`` names the route that produced the value.

    Raises
    ------
    ConfigurationError
        If the grid is not a chain, a dual endpoint is missing for
        ``k >= 2`` or the route does not apply.
    GridSpecError
        If impurities coincide or a dual is not a corner of its vertex.
    """
    spec.validate()
    if spec.kind != "chain":
        raise ConfigurationError("count_chain needs a chain grid")
    if config.k != spec.k:
        raise ConfigurationError(f"Grid has k={spec.k} but {config.k} impurities were given")
    config.validate(spec)
    if spec.k == 1:
        return count_one_impurity(spec, config.primals[0], route or "cofactor")
    if route is None:
        route = "grove" if spec.k == 2 else "transfer"
    if route not in CHAIN_ROUTES:
        raise ConfigurationError(f"Unknown chain route {route!r}; expected one of {CHAIN_ROUTES}")
    if route == "grove" and spec.k != 2:
        raise ConfigurationError("The grove chain sum covers k=2 only; use the transfer route")
    if any(d is None for d in config.duals):
        raise ConfigurationError("Chain counts need the dual endpoint of every impurity")
    if len(set(config.primals)) != config.k:
        raise GridSpecError("Impurity vertices must be distinct")
    if route == "transfer":
        value = _ChainTransfer(spec, config).total()
        logger.debug("Chain transfer count %d", value)
        return CountResult(value, route)
    a, b = config.primals
    rooted, joined = _ChainSum(spec, a, b, config.duals).total()
    logger.debug("Chain parts A=%d C=%d", rooted, joined)
    return CountResult(rooted + joined, route, {"A": rooted, "C": joined})


def count_configuration(
    spec: GridSpec, config: ImpurityConfig, route: str = "cofactor"
) -> CountResult:
    """Dispatch a configuration to the formula that covers it.

    Chains with ``k >= 2`` go to ``count_chain``; a ``route`` it does not
    know is replaced by the chain default, and the result names the route
    actually used.

    Raises
    ------
    ConfigurationError
        For interior impurities, two near-boundary duals, or a
        near-boundary dual with ``k > 2``.
    """
    if config.k != spec.k:
        raise ConfigurationError(f"Grid has k={spec.k} but {config.k} impurities were given")
    config.validate(spec)
    if spec.kind == "chain" and spec.k >= 2:
        chain_route = route if route in CHAIN_ROUTES else None
        if chain_route is None:
            logger.info("Route %s does not apply to chains; using the chain default", route)
        return count_chain(spec, config, chain_route)
    if spec.k == 1:
        return count_one_impurity(spec, config.primals[0], route)
    classes = [config.dual_class(spec, j) for j in range(config.k)]
    for p, cls in zip(config.primals, classes):
        if cls is DualClass.INTERIOR or not spec.on_boundary(p):
            raise ConfigurationError(f"Impurity at {p} is interior; no formula applies")
    near = [j for j, cls in enumerate(classes) if cls is DualClass.NEAR_BOUNDARY]
    if not near:
        return count_k_boundary(spec, config.primals, route)
    if spec.k != 2 or len(near) != 1:
        raise ConfigurationError("Only one near-boundary impurity with k=2 is supported")
    a, b = config.primals if near[0] == 0 else config.primals[::-1]
    return count_two_near_boundary(spec, a, b, config.duals[near[0]], route)


# --- Distributions ---


@dataclass
class Distribution:
    """Exact single-impurity weights and their normalization.

    Attributes
    ----------
    weights : dict
        ``M(x)`` per primal vertex, row-major order.
    det_k : int
        ``det K``; the terminal diagonals carry ``2 det K`` matchings.
    total : int
        Normalizing total under ``normalization``.
    probabilities : dict
        ``P(I1 = x)`` as exact fractions.
    terminal_mass : Fraction
        Probability that the impurity sits on the terminal ``T``.
    """

    spec: GridSpec
    normalization: Normalization
    weights: dict[Point, int]
    det_k: int
    total: int
    probabilities: dict[Point, Fraction]
    terminal_mass: Fraction

    def argmax(self) -> Point:
        return max(self.probabilities, key=lambda p: (self.probabilities[p], -p[1], -p[0]))

    def edge_probability(self, x: Point) -> Fraction:
        """Probability of one particular impurity edge at ``x``:
        ``K^-1(x, t) / (4 sum K^-1(., t) + 2)``."""
        return Fraction(self.weights[x], 4 * sum(self.weights.values()) + 2 * self.det_k)


def impurity_distribution(
    spec: GridSpec,
    normalization: Normalization = Normalization.PER_DUAL,
    route: str = "cofactor",
) -> Distribution:
    """Tabulate ``M(x)`` for every vertex and normalize.

    Parameters
    ----------
    spec : GridSpec
        Grid with ``k = 1``.
    normalization : Normalization
        ``PER_DUAL`` (the default) gives vertex ``x`` mass ``4 M(x)`` out of
        ``4 sum M + 2 det K``; ``SUMMED`` gives ``M(x)`` out of
        ``sum M + 2 det K``.
    route : str
        Route for the weights.

    Returns
    -------
    Distribution
    """
    normalization = Normalization(normalization)
    ctx = grid_context(spec)
    weights = {x: count_one_impurity(spec, x, route).value for x in spec.vertices()}
    per_vertex = 4 if normalization is Normalization.PER_DUAL else 1
    total = per_vertex * sum(weights.values()) + 2 * ctx.det_k
    probabilities = {x: Fraction(per_vertex * w, total) for x, w in weights.items()}
    logger.info(
        "Distribution on %s: total %d (%s)", spec.shape_label(), total, normalization.value
    )
    return Distribution(
        spec=spec,
        normalization=normalization,
        weights=weights,
        det_k=ctx.det_k,
        total=total,
        probabilities=probabilities,
        terminal_mass=Fraction(2 * ctx.det_k, total),
    )
