"""Circular planar graphs, response matrices and grove determinants.

A circular graph is a weighted graph whose nodes lie on the outer face in
a fixed anticlockwise order. Its Laplacian splits into node and interior
blocks ``[[F, G], [H, K]]``; the response matrix ``L = G K^-1 H - F`` turns
grove counts for bipartite partitions into small determinants.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Hashable, Iterable, Iterator, Optional, Sequence

from .lattice import PlaneGraph
from .linalg import ExactMatrix, det_exact
from .models import DimerlabError

logger = logging.getLogger(__name__)

Key = Hashable


class CircularGraphError(DimerlabError):
    """Raised when node identification or node order is inconsistent."""

    pass


class PartitionError(DimerlabError):
    """Raised when a node partition cannot be used for a grove count."""

    pass


class CrossingPartitionError(PartitionError):
    """Raised when two blocks of a partition interleave."""

    pass


class NonBipartitePartitionError(PartitionError):
    """Raised when no contiguous red/blue colouring exists."""

    pass


@dataclass
class CircularGraph:
    """A graph with an ordered set of outer nodes.

    Attributes
    ----------
    nodes : list
        Node keys in anticlockwise order.
    interior : list
        Interior vertex keys (primal positions for grid vertices).
    edges : list of (key, key, weight)
        Edges of the assembled graph after identification, self-loops
        removed.
    F, G, H, K : ExactMatrix
        Laplacian blocks (nodes x nodes, nodes x interior, interior x
        nodes, interior x interior).
    """

    nodes: list[Key]
    interior: list[Key]
    edges: list[tuple[Key, Key, Fraction]]
    F: ExactMatrix
    G: ExactMatrix
    H: ExactMatrix
    K: ExactMatrix


def _vertex_key(g: PlaneGraph, vid: int) -> Key:
    v = g.vertices[vid]
    if v.role == "primal":
        return (v.pos[0] // 2, v.pos[1] // 2)
    return v.tag or f"v{vid}"


def _cyclic_runs(order: Sequence, labels: dict) -> list:
    """Labels met along ``order`` with cyclic repeats collapsed."""
    seq = [labels[x] for x in order if x in labels]
    runs = []
    for lab in seq:
        if not runs or runs[-1] != lab:
            runs.append(lab)
    while len(runs) > 1 and runs[0] == runs[-1]:
        runs.pop()
    return runs


def blocks_cross(order: Sequence, a: Iterable, b: Iterable) -> bool:
    """Return ``True`` when blocks ``a`` and ``b`` interleave along ``order``."""
    labels = {x: 0 for x in a}
    labels.update({x: 1 for x in b})
    return len(_cyclic_runs(order, labels)) > 2


def assemble_circular(
    g: PlaneGraph,
    identify: Sequence[Iterable[int]] = (),
    nodes: Sequence[int] = (),
    names: Optional[dict[int, str]] = None,
) -> CircularGraph:
    """Merge identification classes and extract Laplacian blocks.

    Parameters
    ----------
    g : PlaneGraph
        Source graph; its ``boundary_cycle`` gives the outer-face order.
    identify : sequence of iterables of vertex ids
        Disjoint classes; each class becomes one vertex, parallel edges add
        their weights and edges inside a class disappear.
    nodes : sequence of vertex ids
        Node order (anticlockwise). A class is a node when any of its
        members is listed; the first listed member names it unless
        ``names`` says otherwise.
    names : dict, optional
        Explicit key for the node represented by a vertex id.

    Returns
    -------
    CircularGraph

    Raises
    ------
    CircularGraphError
        On an empty node list, overlapping or interleaving classes, unknown
        vertices, or nodes listed out of boundary order.
    """
    if not nodes:
        raise CircularGraphError("A circular graph needs at least one node")
    n_vertices = len(g.vertices)
    rep: dict[int, int] = {}
    classes = [sorted(set(c)) for c in identify]
    for c in classes:
        for vid in c:
            if not 0 <= vid < n_vertices:
                raise CircularGraphError(f"Unknown vertex id {vid}")
            if vid in rep:
                raise CircularGraphError(f"Vertex {vid} is in two identification classes")
            rep[vid] = c[0]

    cycle = list(g.boundary_cycle)
    position = {vid: i for i, vid in enumerate(cycle)}
    for i, a in enumerate(classes):
        for b in classes[i + 1:]:
            if all(x in position for x in a + b) and blocks_cross(cycle, a, b):
                raise CircularGraphError(f"Identification classes {a} and {b} interleave")

    def root(vid: int) -> int:
        return rep.get(vid, vid)

    node_roots: list[int] = []
    for vid in nodes:
        if not 0 <= vid < n_vertices:
            raise CircularGraphError(f"Unknown vertex id {vid}")
        r = root(vid)
        if r in node_roots:
            raise CircularGraphError(f"Node {vid} listed twice")
        node_roots.append(r)

    merged = set(rep.values())
    placed = [position[r] for r in node_roots if r not in merged and r in position]
    if len(placed) > 2:
        start = placed.index(min(placed))
        rotated = placed[start:] + placed[:start]
        if rotated != sorted(rotated):
            raise CircularGraphError("Nodes are not listed in boundary order")

    names = names or {}
    key_of: dict[int, Key] = {}
    for vid, r in zip(nodes, node_roots):
        key_of[r] = names.get(vid, _vertex_key(g, vid))
    node_keys = [key_of[r] for r in node_roots]
    interior_roots = sorted({root(v) for v in range(n_vertices)} - set(node_roots))
    for r in interior_roots:
        key_of[r] = _vertex_key(g, r)
    interior_keys = [key_of[r] for r in interior_roots]

    everything = node_keys + interior_keys
    index = {k: i for i, k in enumerate(everything)}
    if len(index) != len(everything):
        raise CircularGraphError("Vertex keys collide after identification")
    size = len(everything)
    lap = [[Fraction(0)] * size for _ in range(size)]
    edges = []
    for e in g.edges:
        u, v = key_of[root(e.u)], key_of[root(e.v)]
        if u == v:
            continue
        w = Fraction(e.weight)
        i, j = index[u], index[v]
        lap[i][i] += w
        lap[j][j] += w
        lap[i][j] -= w
        lap[j][i] -= w
        edges.append((u, v, w))

    nn = len(node_keys)
    full = ExactMatrix(everything, everything, lap)
    c = CircularGraph(
        nodes=node_keys,
        interior=interior_keys,
        edges=edges,
        F=full.submatrix(node_keys, node_keys),
        G=full.submatrix(node_keys, interior_keys),
        H=full.submatrix(interior_keys, node_keys),
        K=full.submatrix(interior_keys, interior_keys),
    )
    logger.debug("Assembled circular graph: %d nodes, %d interior", nn, len(interior_keys))
    return c


def response_matrix(c: CircularGraph) -> ExactMatrix:
    """Return ``L = G K^-1 H - F`` over the nodes.

    Raises
    ------
    SingularMatrixError
        If the interior block ``K`` is singular.
    """
    nodes = c.nodes
    interior = c.interior
    entries = [[-c.F[r, s] for s in nodes] for r in nodes]
    if interior:
        g_rows = [c.G.row(r) for r in nodes]
        for j, s in enumerate(nodes):
            h = [c.H[x, s] for x in interior]
            if not any(h):
                continue
            y = c.K.factors().solve(h)
            for i, gr in enumerate(g_rows):
                entries[i][j] += sum((a * b for a, b in zip(gr, y) if a), Fraction(0))
    return ExactMatrix(nodes, nodes, entries)


@dataclass(frozen=True)
class PartitionSpec:
    """A node partition with a red/blue colouring of its paired nodes.

    Attributes
    ----------
    blocks : tuple of tuple
        Disjoint blocks covering the nodes; singletons included.
    red, blue : tuple
        Row and column nodes of the grove determinant. A split node is
        listed in both.
    """

    blocks: tuple[tuple[Key, ...], ...]
    red: tuple[Key, ...] = ()
    blue: tuple[Key, ...] = ()

    @classmethod
    def from_pairs(
        cls, nodes: Sequence[Key], pairs: Sequence[tuple[Key, Key]]
    ) -> "PartitionSpec":
        """Build the partition with the given pairs and all other nodes single.

        The colouring is found by scanning every cyclic arc of ``nodes`` for
        one that holds exactly one endpoint of each pair.

        Raises
        ------
        PartitionError
            On unknown or repeated nodes.
        CrossingPartitionError
            If two pairs interleave.
        NonBipartitePartitionError
            If no arc separates every pair.
        """
        known = set(nodes)
        used: list[Key] = []
        for a, b in pairs:
            for x in (a, b):
                if x not in known:
                    raise PartitionError(f"Unknown node {x!r}")
            used += [a, b]
        if len(set(used)) != len(used):
            raise PartitionError("A node appears in two pairs")
        blocks = [tuple(p) for p in pairs] + [(x,) for x in nodes if x not in set(used)]
        check_noncrossing(nodes, blocks)
        paired = [x for x in nodes if x in set(used)]
        partner = {}
        for a, b in pairs:
            partner[a], partner[b] = b, a
        count = len(paired)
        if count == 0:
            return cls(tuple(blocks))
        for start in range(count):
            for length in range(1, count):
                arc = {paired[(start + i) % count] for i in range(length)}
                if all((a in arc) != (b in arc) for a, b in pairs):
                    red = tuple(paired[(start + i) % count] for i in range(length))
                    blue = tuple(partner[x] for x in red)
                    return cls(tuple(blocks), red, blue)
        raise NonBipartitePartitionError(
            f"No contiguous colouring separates the pairs {list(pairs)}"
        )

    @classmethod
    def with_split(
        cls,
        nodes: Sequence[Key],
        pairs: Sequence[tuple[Key, Key]],
        split: Sequence[Key],
    ) -> "PartitionSpec":
        """``from_pairs`` plus nodes that are both a row and a column.

        A split node stays a singleton block of the spec; the grove count
        then takes every grove in which it has joined one of the other
        trees.

        Raises
        ------
        PartitionError
            If a split node is unknown, repeated or also paired.
        """
        split = tuple(split)
        known = set(nodes)
        paired = {x for p in pairs for x in p}
        if len(set(split)) != len(split):
            raise PartitionError("A split node is listed twice")
        for x in split:
            if x not in known:
                raise PartitionError(f"Unknown node {x!r}")
            if x in paired:
                raise PartitionError(f"Split node {x!r} is also paired")
        base = cls.from_pairs(nodes, pairs)
        return cls(base.blocks, base.red + split, base.blue + split)


def check_noncrossing(order: Sequence[Key], blocks: Sequence[Sequence[Key]]) -> None:
    """Raise ``CrossingPartitionError`` if any two blocks interleave."""
    real = [b for b in blocks if len(b) > 1]
    for i, a in enumerate(real):
        for b in real[i + 1:]:
            if blocks_cross(order, a, b):
                raise CrossingPartitionError(f"Blocks {tuple(a)} and {tuple(b)} cross")


def _validate_partition(c: CircularGraph, p: PartitionSpec) -> None:
    covered = [x for b in p.blocks for x in b]
    if sorted(map(repr, covered)) != sorted(map(repr, c.nodes)):
        raise PartitionError("Partition blocks must cover every node exactly once")
    if any(len(b) > 2 for b in p.blocks):
        raise PartitionError("Grove determinants need blocks of size at most two")
    check_noncrossing(c.nodes, p.blocks)
    if len(p.red) != len(p.blue):
        raise NonBipartitePartitionError("Red and blue node counts differ")
    block_of = {x: i for i, b in enumerate(p.blocks) for x in b}
    for r, b in zip(p.red, p.blue):
        if block_of.get(r) != block_of.get(b) and r != b:
            raise NonBipartitePartitionError(f"Nodes {r!r} and {b!r} are not paired")
    paired = [x for x in c.nodes if x in set(p.red) | set(p.blue)]
    colours = {x: ("r" if x in p.red else "b") for x in paired}
    split = set(p.red) & set(p.blue)
    plain = [x for x in paired if x not in split]
    if len(_cyclic_runs(plain, {x: colours[x] for x in plain})) > 2:
        raise NonBipartitePartitionError("Red nodes are not contiguous")


def grove_count_bipartite(
    c: CircularGraph, p: PartitionSpec, response: Optional[ExactMatrix] = None
) -> Fraction:
    """Return the number of groves realising a bipartite partition.

    ``Z = |det L_{R,B}| * |det K|`` where ``L_{R,B}`` keeps the red rows and
    blue columns of the response matrix. The absolute value removes the
    sign of the row/column order. Pass ``response`` to reuse a response
    matrix already computed for the same graph under another node order.

    Raises
    ------
    CrossingPartitionError, NonBipartitePartitionError, PartitionError
        If ``p`` is not a bipartite planar partition of ``c``'s nodes.
    """
    _validate_partition(c, p)
    det_k = abs(det_exact(c.K))
    if not p.red:
        return det_k
    if response is None:
        response = response_matrix(c)
    sub = response.submatrix(list(p.red), list(p.blue))
    return abs(det_exact(sub)) * det_k


def perturbed_matrix(k: ExactMatrix, x: Key) -> ExactMatrix:
    """Return ``K_x``: a copy of ``k`` with ``(x, x)`` increased by one.

    Raises
    ------
    CircularGraphError
        If ``x`` is not an index of ``k``.
    """
    if x not in k.row_index or x not in k.col_index:
        raise CircularGraphError(f"Unknown vertex {x!r}")
    return k.with_entry(x, x, k[x, x] + 1)


def noncrossing_partitions(
    items: Sequence[Key], max_block: Optional[int] = None
) -> Iterator[tuple[tuple[Key, ...], ...]]:
    """Yield every non-crossing partition of ``items`` (in cyclic order).

    Blocks are tuples in ``items`` order; ``max_block`` caps block sizes.
    """
    items = list(items)
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    limit = len(items) if max_block is None else max_block
    for size in range(0, min(limit, len(items))):
        for chosen in combinations(range(len(rest)), size):
            block = (first,) + tuple(rest[i] for i in chosen)
            cuts = [-1] + list(chosen) + [len(rest)]
            gaps = [rest[cuts[i] + 1: cuts[i + 1]] for i in range(len(cuts) - 1)]
            yield from _combine(block, gaps, max_block)


def _combine(block, gaps, max_block):
    if not gaps:
        yield (block,)
        return
    for head in noncrossing_partitions(gaps[0], max_block):
        for tail in _combine(block, gaps[1:], max_block):
            yield head + tail


@dataclass(frozen=True)
class Resolvent:
    """Entries of ``K^-1`` and ``K_x^-1`` tied by the rank-one update at ``x``."""

    inv_xx: Fraction
    inv_xt: Fraction
    perturbed_xx: Fraction
    perturbed_xt: Fraction
    det_k: Fraction
    det_perturbed: Fraction

    def identities(self) -> dict[str, bool]:
        """Each identity by name; all must hold exactly."""
        scale = 1 + self.inv_xx
        return {
            "diagonal": self.perturbed_xx == self.inv_xx / scale,
            "off-diagonal": self.perturbed_xt == self.inv_xt / scale,
            "determinant": scale == self.det_perturbed / self.det_k,
            "cancellation": abs(self.perturbed_xt * self.det_perturbed)
            == abs(self.inv_xt * self.det_k),
        }

    def holds(self) -> bool:
        return all(self.identities().values())


def resolvent(k: ExactMatrix, x: Key, t: Key) -> Resolvent:
    """Compare ``K`` and ``K_x`` at ``(x, x)`` and ``(x, t)``."""
    kx = perturbed_matrix(k, x)
    return Resolvent(
        inv_xx=k.column_of_inverse(x)[x],
        inv_xt=k.column_of_inverse(t)[x],
        perturbed_xx=kx.column_of_inverse(x)[x],
        perturbed_xt=kx.column_of_inverse(t)[x],
        det_k=det_exact(k),
        det_perturbed=det_exact(kx),
    )
