"""Brute-force ground truth.

Nothing here touches a determinant: matchings are found by backtracking,
spanning trees by deletion-contraction, groves by a frontier dynamic
programme or by exhaustive edge subsets. Every enumerator has a size guard
and raises ``OracleLimitError`` instead of running for hours.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Hashable, Iterator, Optional, Sequence

import networkx as nx

from .counts import Normalization, grid_context, impurity_distribution
from .groves import CircularGraph, PartitionSpec
from .lattice import PlaneGraph, build_rooted, build_superposition
from .models import DimerlabError, GridSpec, ImpurityConfig, Point
from .settings import Settings

logger = logging.getLogger(__name__)

Key = Hashable

_DEFAULTS = Settings()


class OracleLimitError(DimerlabError):
    """Raised when an instance exceeds an enumerator's size guard."""

    pass


class DisconnectedGraphError(DimerlabError):
    """Raised when a spanning-tree count is asked of a disconnected graph."""

    pass


# --- Matchings ---


def _impurity_key(g: PlaneGraph, vid: int) -> Key:
    v = g.vertices[vid]
    if v.role == "primal":
        return (v.pos[0] // 2, v.pos[1] // 2)
    return v.tag


def _sort_key(k: Key):
    return (0, k) if isinstance(k, tuple) else (1, str(k))


@dataclass(frozen=True)
class Matching:
    """A perfect matching as a set of edge ids.

    Attributes
    ----------
    edges : frozenset of int
    impurities : tuple of (I1, I2)
        Diagonal edges in the matching: ``I1`` is a primal position or a
        terminal tag, ``I2`` the dual vertex in half-units.
    """

    edges: frozenset[int]
    impurities: tuple[tuple[Key, Point], ...] = ()

    @classmethod
    def of(cls, g: PlaneGraph, edges: Sequence[int]) -> "Matching":
        imps = []
        for eid in edges:
            e = g.edges[eid]
            if e.kind != "diagonal-impurity":
                continue
            u, v = g.vertices[e.u], g.vertices[e.v]
            x, d = (u, v) if v.role == "dual" else (v, u)
            imps.append((_impurity_key(g, x.id), d.pos))
        imps.sort(key=lambda i: (_sort_key(i[0]), i[1]))
        return cls(frozenset(edges), tuple(imps))


def enumerate_matchings(
    g: PlaneGraph, limit: Optional[int] = None
) -> Iterator[Matching]:
    """Yield every perfect matching of ``g``.

    Branches on the lowest-id uncovered vertex, trying its edges in id
    order, so the output order is deterministic.

    Raises
    ------
    OracleLimitError
        If ``g`` has more than ``limit`` vertices.
    """
    limit = _DEFAULTS.matching_vertex_limit if limit is None else limit
    n = len(g.vertices)
    if n > limit:
        raise OracleLimitError(f"{g.name} has {n} vertices; the enumeration limit is {limit}")
    if n % 2:
        return
    adjacency = g.adjacency
    covered = [False] * n
    chosen: list[int] = []

    def search(start: int) -> Iterator[Matching]:
        x = next((v for v in range(start, n) if not covered[v]), None)
        if x is None:
            yield Matching.of(g, chosen)
            return
        covered[x] = True
        for e in adjacency[x]:
            y = e.other(x)
            if covered[y]:
                continue
            covered[y] = True
            chosen.append(e.id)
            yield from search(x + 1)
            chosen.pop()
            covered[y] = False
        covered[x] = False

    yield from search(0)


def _count_perfect(order: list[int], neighbours: dict[int, list[int]]) -> int:
    """Memoised perfect-matching count over ``order`` (parallel edges
    counted separately)."""
    n = len(order)
    if n % 2:
        return 0
    index = {v: i for i, v in enumerate(order)}
    nbrs = [
        sorted(index[u] for u in neighbours[v] if u in index and index[u] > i)
        for i, v in enumerate(order)
    ]
    memo: dict[tuple[int, int], int] = {}

    def go(cursor: int, covered: int) -> int:
        while covered & 1:
            covered >>= 1
            cursor += 1
        if cursor >= n:
            return 1
        key = (cursor, covered)
        hit = memo.get(key)
        if hit is not None:
            return hit
        total = 0
        for j in nbrs[cursor]:
            bit = 1 << (j - cursor)
            if not covered & bit:
                total += go(cursor, covered | 1 | bit)
        memo[key] = total
        return total

    return go(0, 0)


def count_matchings_with_impurities(
    g: PlaneGraph,
    impurity_edges: Sequence[int] = (),
    limit: Optional[int] = None,
    allow_diagonals: bool = False,
) -> int:
    """Count perfect matchings of ``g`` containing exactly the given
    diagonal edges.

    The endpoints of ``impurity_edges`` are removed together with every
    other diagonal edge; the rest is counted by a memoised sweep in id
    order. With ``allow_diagonals`` the other diagonals stay, which gives
    the total matching count when ``impurity_edges`` is empty.

    Raises
    ------
    OracleLimitError
        If the remaining graph exceeds ``limit`` vertices.
    ValueError
        If an edge is not diagonal or two impurity edges share a vertex.
    """
    limit = _DEFAULTS.matching_vertex_limit if limit is None else limit
    removed: set[int] = set()
    for eid in impurity_edges:
        e = g.edges[eid]
        if e.kind != "diagonal-impurity":
            raise ValueError(f"Edge {eid} is a {e.kind}, not an impurity edge")
        if e.u in removed or e.v in removed:
            raise ValueError("Impurity edges must be vertex-disjoint")
        removed |= {e.u, e.v}
    order = [v.id for v in g.vertices if v.id not in removed]
    if len(order) > limit:
        raise OracleLimitError(
            f"{len(order)} vertices remain in {g.name}; the matching limit is {limit}"
        )
    neighbours: dict[int, list[int]] = defaultdict(list)
    for e in g.edges:
        if e.kind == "diagonal-impurity" and not allow_diagonals:
            continue
        neighbours[e.u].append(e.v)
        neighbours[e.v].append(e.u)
    return _count_perfect(order, neighbours)


def impurity_edge(g: PlaneGraph, primal: Point, dual: Point) -> int:
    """Id of the diagonal edge from primal vertex ``primal`` to ``dual``.

    Raises
    ------
    KeyError
        If ``dual`` is not a corner of ``primal``.
    """
    x, d = g.primal(primal), g.find("dual", dual)
    for e in g.adjacency[x]:
        if e.kind == "diagonal-impurity" and e.other(x) == d:
            return e.id
    raise KeyError(f"No impurity edge between {primal} and dual {dual}")


def count_configuration_matchings(
    spec: GridSpec, config: ImpurityConfig, limit: Optional[int] = None
) -> int:
    """Brute-force count of matchings of ``G^(k)`` with exactly the
    impurity edges of ``config``; every dual must be given."""
    if any(d is None for d in config.duals):
        raise ValueError("The matching oracle needs a dual endpoint for every impurity")
    config.validate(spec)
    g = build_superposition(spec)
    ids = [impurity_edge(g, p, d) for p, d in zip(config.primals, config.duals)]
    return count_matchings_with_impurities(g, ids, limit)


@dataclass
class ImpurityTable:
    """Matching counts per impurity configuration.

    Attributes
    ----------
    by_primal : dict
        Sorted tuple of ``I1`` keys -> count.
    by_edge : dict
        Sorted tuple of ``(I1, I2)`` -> count.
    total : int
        Grand total over all configurations.
    """

    by_primal: dict[tuple, int] = field(default_factory=dict)
    by_edge: dict[tuple, int] = field(default_factory=dict)
    total: int = 0


def count_matchings_by_impurity(
    g: PlaneGraph, limit: Optional[int] = None
) -> ImpurityTable:
    """Tabulate matchings of ``G^(k)`` by impurity positions.

    Every matching holds exactly ``k`` diagonal edges, so the table runs
    over vertex-disjoint ``k``-sets of diagonals and counts each with
    ``count_matchings_with_impurities``.
    """
    if g.spec is None:
        raise ValueError("The impurity table needs a graph built from a GridSpec")
    k = g.spec.k
    diagonals = [e for e in g.edges if e.kind == "diagonal-impurity"]
    table = ImpurityTable()
    for combo in combinations(diagonals, k):
        ends = [x for e in combo for x in (e.u, e.v)]
        if len(set(ends)) != len(ends):
            continue
        ids = [e.id for e in combo]
        count = count_matchings_with_impurities(g, ids, limit)
        if not count:
            continue
        m = Matching.of(g, ids)
        primal = tuple(sorted((i[0] for i in m.impurities), key=_sort_key))
        table.by_primal[primal] = table.by_primal.get(primal, 0) + count
        table.by_edge[m.impurities] = count
        table.total += count
    logger.info(
        "Impurity table for %s: %d configurations, %d matchings",
        g.name, len(table.by_edge), table.total,
    )
    return table


@dataclass
class NormalizationCheck:
    """Grand matching total of ``G^(1)`` against both normalizations."""

    total: int
    per_dual: int
    summed: int

    @property
    def resolved(self) -> Optional[Normalization]:
        if self.total == self.per_dual:
            return Normalization.PER_DUAL
        if self.total == self.summed:
            return Normalization.SUMMED
        return None


def resolve_normalization(spec: GridSpec, limit: Optional[int] = None) -> NormalizationCheck:
    """Count every matching of ``G^(1)`` and compare with both totals."""
    g = build_superposition(spec)
    total = count_matchings_with_impurities(g, (), limit, allow_diagonals=True)
    per_dual = impurity_distribution(spec, Normalization.PER_DUAL).total
    summed = impurity_distribution(spec, Normalization.SUMMED).total
    check = NormalizationCheck(total, per_dual, summed)
    logger.info("Normalization on %s: total %d -> %s", spec.shape_label(), total, check.resolved)
    return check


# --- Spanning trees ---


def _weighted_edges(g: PlaneGraph) -> dict[tuple[int, int], int]:
    out: dict[tuple[int, int], int] = defaultdict(int)
    for e in g.edges:
        out[(min(e.u, e.v), max(e.u, e.v))] += int(e.weight)
    return dict(out)


def _deletion_contraction(vertices: frozenset, edges: dict[tuple, int], memo: dict) -> int:
    if len(vertices) == 1:
        return 1
    if not edges:
        return 0
    key = (vertices, frozenset(edges.items()))
    if key in memo:
        return memo[key]
    (u, v), w = min(edges.items())
    deleted = {e: m for e, m in edges.items() if e != (u, v)}
    contracted: dict[tuple, int] = defaultdict(int)
    for (x, y), m in deleted.items():
        x, y = (u if x == v else x), (u if y == v else y)
        if x != y:
            contracted[(min(x, y), max(x, y))] += m
    total = _deletion_contraction(vertices, deleted, memo) if _connected(vertices, deleted) else 0
    total += w * _deletion_contraction(vertices - {v}, dict(contracted), memo)
    memo[key] = total
    return total


def _connected(vertices: frozenset, edges: dict[tuple, int]) -> bool:
    h = nx.Graph()
    h.add_nodes_from(vertices)
    h.add_edges_from(edges)
    return nx.is_connected(h)


def enumerate_spanning_trees(g: PlaneGraph) -> int:
    """Count spanning trees by deletion-contraction, parallel edges weighted.

    Raises
    ------
    DisconnectedGraphError
        If ``g`` is not connected.
    """
    vertices = frozenset(v.id for v in g.vertices)
    edges = _weighted_edges(g)
    if not vertices or not _connected(vertices, edges):
        raise DisconnectedGraphError(f"{g.name} is not connected")
    count = _deletion_contraction(vertices, edges, {})
    logger.info("%s has %d spanning trees", g.name, count)
    return count


def iter_spanning_trees(
    g: PlaneGraph, edge_limit: Optional[int] = None
) -> Iterator[frozenset[tuple[int, int]]]:
    """Yield every spanning tree as a set of ``(edge id, copy)`` pairs.

    An edge of weight ``w`` stands for ``w`` parallel copies numbered
    ``0 .. w-1``.

    Raises
    ------
    OracleLimitError
        If the expanded edge count exceeds ``edge_limit``.
    DisconnectedGraphError
        If ``g`` is not connected.
    """
    edge_limit = _DEFAULTS.grove_edge_limit if edge_limit is None else edge_limit
    copies = [(e.id, c, e.u, e.v) for e in g.edges for c in range(int(e.weight))]
    if len(copies) > edge_limit:
        raise OracleLimitError(
            f"{g.name} has {len(copies)} edge copies; the tree stream limit is {edge_limit}"
        )
    vertices = frozenset(v.id for v in g.vertices)
    if not _connected(vertices, _weighted_edges(g)):
        raise DisconnectedGraphError(f"{g.name} is not connected")
    need = len(vertices) - 1
    for subset in combinations(copies, need):
        dsu = _DisjointSets()
        if all(dsu.union(u, v) for _, _, u, v in subset):
            yield frozenset((eid, c) for eid, c, _, _ in subset)


class _DisjointSets:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x, y) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        self.parent[ry] = rx
        return True


# --- Groves ---


@dataclass(frozen=True)
class ForestPattern:
    """Required node connectivity of a forest.

    Attributes
    ----------
    blocks : tuple of tuple
        Disjoint node sets; every tree of a counted forest contains exactly
        the nodes of one block (singletons included).
    """

    blocks: tuple[tuple[Key, ...], ...]

    @classmethod
    def from_partition(cls, p: PartitionSpec) -> "ForestPattern":
        return cls(tuple(tuple(b) for b in p.blocks))

    @classmethod
    def from_pairs(cls, nodes: Sequence[Key], pairs: Sequence[tuple[Key, Key]]) -> "ForestPattern":
        used = {x for p in pairs for x in p}
        return cls(tuple(tuple(p) for p in pairs) + tuple((x,) for x in nodes if x not in used))

    def check(self, nodes: Sequence[Key]) -> None:
        seen = [x for b in self.blocks for x in b]
        if len(seen) != len(set(seen)):
            raise ValueError("Pattern blocks overlap")
        if set(seen) != set(nodes):
            raise ValueError("Pattern blocks must cover exactly the nodes")


def _merged_edges(c: CircularGraph) -> dict[tuple[Key, Key], Fraction]:
    rank = {k: i for i, k in enumerate(list(c.nodes) + list(c.interior))}
    out: dict[tuple[Key, Key], Fraction] = defaultdict(Fraction)
    for u, v, w in c.edges:
        if u == v:
            continue
        a, b = sorted((u, v), key=rank.__getitem__)
        out[(a, b)] += w
    return dict(out)


def _sweep_rank(c: CircularGraph, edges: dict) -> dict[Key, float]:
    """Row-major rank for interior vertices; a node sits just before its
    first neighbour, so it joins the frontier once and stays there."""
    interior = sorted(
        c.interior, key=lambda k: (k[1], k[0]) if isinstance(k, tuple) else (0, 0)
    )
    rank: dict[Key, float] = {k: float(i) for i, k in enumerate(interior)}
    end = float(len(interior))
    for j, node in enumerate(c.nodes):
        around = [rank[x] for e in edges for x in e if node in e and x != node and x in rank]
        rank[node] = (min(around) - 1 if around else end) + (j + 1) / (len(c.nodes) + 1)
    return rank


def enumerate_constrained_forests(
    c: CircularGraph,
    pattern: ForestPattern,
    state_limit: Optional[int] = None,
) -> int:
    """Count spanning forests of ``c`` whose trees realise ``pattern``.

    A frontier sweep over the edges: each state records the component
    label of every vertex still touched by unprocessed edges, the nodes
    each component holds and how many components have closed. Unions
    that would mix two blocks are pruned; a component closes only when it
    holds a whole block.

    Raises
    ------
    OracleLimitError
        If the number of live states exceeds ``state_limit``.
    """
    state_limit = _DEFAULTS.forest_state_limit if state_limit is None else state_limit
    pattern.check(c.nodes)
    block_of = {x: i for i, b in enumerate(pattern.blocks) for x in b}
    blocks = [frozenset(b) for b in pattern.blocks]
    edges = _merged_edges(c)
    rank = _sweep_rank(c, edges)
    order = sorted(
        edges.items(),
        key=lambda item: (
            max(rank[item[0][0]], rank[item[0][1]]),
            min(rank[item[0][0]], rank[item[0][1]]),
        ),
    )
    last: dict[Key, int] = {}
    for i, ((u, v), _) in enumerate(order):
        last[u] = last[v] = i

    closed_start = 0
    for x in list(c.nodes) + list(c.interior):
        if x in last:
            continue
        if x in block_of and blocks[block_of[x]] == {x}:
            closed_start += 1
        else:
            return 0

    def emit(target, frontier, anchors, closed, count, retiring):
        for x in retiring:
            label = frontier.pop(x)
            if label in frontier.values():
                continue
            held = anchors[label]
            if not held or held != blocks[block_of[next(iter(held))]]:
                return
            closed += 1
        relabel: dict[int, int] = {}
        items = []
        for x in sorted(frontier, key=rank.__getitem__):
            label = relabel.setdefault(frontier[x], len(relabel))
            items.append((x, label))
        held = [frozenset()] * len(relabel)
        for old, new in relabel.items():
            held[new] = anchors[old]
        target[(tuple(items), tuple(held), closed)] += count

    states: dict[tuple, Fraction] = {((), (), closed_start): Fraction(1)}
    for i, ((u, v), w) in enumerate(order):
        retiring = [x for x in (u, v) if last[x] == i]
        nxt: dict[tuple, Fraction] = defaultdict(Fraction)
        for (items, held, closed), count in states.items():
            frontier = dict(items)
            anchors = list(held)
            for x in (u, v):
                if x not in frontier:
                    frontier[x] = len(anchors)
                    anchors.append(frozenset([x]) if x in block_of else frozenset())
            emit(nxt, dict(frontier), anchors, closed, count, retiring)
            lu, lv = frontier[u], frontier[v]
            if lu == lv:
                continue
            joined = anchors[lu] | anchors[lv]
            if len({block_of[x] for x in joined}) > 1:
                continue
            merged = {x: (lu if lab == lv else lab) for x, lab in frontier.items()}
            grown = list(anchors)
            grown[lu] = joined
            emit(nxt, merged, grown, closed, count * w, retiring)
        states = nxt
        if len(states) > state_limit:
            raise OracleLimitError(
                f"Forest sweep reached {len(states)} states; the limit is {state_limit}"
            )
    total = sum(
        (count for (_, _, closed), count in states.items() if closed == len(blocks)),
        Fraction(0),
    )
    logger.debug("Forest sweep over %d edges: %s forests", len(order), total)
    return int(total) if total.denominator == 1 else total


def _grove_partitions(c: CircularGraph, edge_limit: Optional[int]):
    edge_limit = _DEFAULTS.grove_edge_limit if edge_limit is None else edge_limit
    edges = list(_merged_edges(c).items())
    if len(edges) > edge_limit:
        raise OracleLimitError(
            f"Circular graph has {len(edges)} edges; the grove limit is {edge_limit}"
        )
    nodes = set(c.nodes)
    everything = list(c.nodes) + list(c.interior)
    for size in range(len(everything)):
        for subset in combinations(edges, size):
            dsu = _DisjointSets()
            if not all(dsu.union(u, v) for (u, v), _ in subset):
                continue
            comps: dict = defaultdict(set)
            for x in everything:
                comps[dsu.find(x)].add(x)
            if any(not (comp & nodes) for comp in comps.values()):
                continue
            weight = Fraction(1)
            for _, w in subset:
                weight *= w
            partition = frozenset(frozenset(comp & nodes) for comp in comps.values())
            yield partition, weight


def grove_partition_counts(
    c: CircularGraph, edge_limit: Optional[int] = None
) -> dict[frozenset, int]:
    """Count groves of ``c`` by realised node partition in one pass."""
    out: dict[frozenset, Fraction] = defaultdict(Fraction)
    for partition, weight in _grove_partitions(c, edge_limit):
        out[partition] += weight
    return {p: int(v) for p, v in out.items()}


def enumerate_groves(
    c: CircularGraph, pattern: ForestPattern, edge_limit: Optional[int] = None
) -> int:
    """Count groves realising ``pattern`` by listing edge subsets.

    Raises
    ------
    OracleLimitError
        If ``c`` has more than ``edge_limit`` distinct edges.
    """
    pattern.check(c.nodes)
    wanted = frozenset(frozenset(b) for b in pattern.blocks)
    total = sum(
        (w for partition, w in _grove_partitions(c, edge_limit) if partition == wanted),
        Fraction(0),
    )
    return int(total)


def spanning_tree_check(spec: GridSpec) -> tuple[int, int]:
    """Return ``(deletion-contraction count of G_{1,R}, det K)``."""
    g = build_rooted(spec, "terminals-identified")
    return enumerate_spanning_trees(g), grid_context(spec).det_k
