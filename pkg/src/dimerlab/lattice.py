"""Graph families built on a rectangle or chain G1.

Builds the primal grid ``G1``, the superposition ``G^(k)`` of G2 and the
terminal-augmented G1, the rooted graphs ``G_{1,T,R}`` and ``G_{1,R}``, the
slotted graph used for grove constructions, and boundary arcs. Graphs are
immutable ``PlaneGraph`` values carrying half-unit coordinates.
"""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Optional, Union

import networkx as nx

from .models import (
    DIRECTIONS,
    DimerlabError,
    GridSpec,
    GridSpecError,
    Point,
    Slot,
    format_half,
    half,
)

logger = logging.getLogger(__name__)

DOT_HEADER = "impurity-dimer-graph v1"
DOCUMENT_FORMAT = "impurity-dimer-graph"
DOCUMENT_VERSION = 1

ROLES = ("primal", "dual", "terminal", "middle", "boundary", "root", "pendant")
KINDS = (
    "primal-edge",
    "dual-edge",
    "diagonal-impurity",
    "terminal-edge",
    "root-edge",
    "slot-edge",
    "pendant-edge",
)

Weight = Union[int, Fraction]


class ArcError(DimerlabError):
    """Raised when no usable boundary arc exists between two vertices."""

    pass


@dataclass(frozen=True)
class Vertex:
    """A graph vertex.

    Attributes
    ----------
    id : int
        Dense identifier, assigned in row-major position order.
    role : str
        One of ``ROLES``.
    pos : tuple of int
        Half-unit position.
    tag : str
        Human-readable label (slot or terminal name); may be empty.
    """

    id: int
    role: str
    pos: Point
    tag: str = ""


@dataclass(frozen=True)
class Edge:
    """A graph edge; root-edges carry their multiplicity as ``weight``.

    Attributes
    ----------
    id : int
        Dense identifier.
    u, v : int
        Endpoint vertex ids, ``u < v``.
    kind : str
        One of ``KINDS``.
    weight : int or Fraction
        Conductance / multiplicity.
    slots : tuple of str
        Directions of the boundary slots a root-edge bundles.
    """

    id: int
    u: int
    v: int
    kind: str
    weight: Weight = 1
    slots: tuple[str, ...] = ()

    def other(self, x: int) -> int:
        return self.v if x == self.u else self.u


@dataclass(frozen=True)
class PlaneGraph:
    """An embedded graph with typed vertices and edges.

    Attributes
    ----------
    name : str
        Family name (``G1``, ``G(k)``, ``G1R``, ...).
    vertices : tuple of Vertex
        Ordered by id.
    edges : tuple of Edge
        Ordered by id.
    boundary_cycle : tuple of int
        Outer-face vertex ids in anticlockwise order.
    spec : GridSpec or None
        The grid this graph was built from.
    """

    name: str
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    boundary_cycle: tuple[int, ...] = ()
    spec: Optional[GridSpec] = field(default=None, compare=False)

    @cached_property
    def _by_pos(self) -> dict[tuple[str, Point], int]:
        return {(v.role, v.pos): v.id for v in self.vertices}

    @cached_property
    def _by_tag(self) -> dict[str, int]:
        return {v.tag: v.id for v in self.vertices if v.tag}

    @cached_property
    def adjacency(self) -> dict[int, list[Edge]]:
        """Incident edges per vertex id, in edge-id order."""
        adj: dict[int, list[Edge]] = {v.id: [] for v in self.vertices}
        for e in self.edges:
            adj[e.u].append(e)
            adj[e.v].append(e)
        return adj

    def find(self, role: str, pos: Point) -> int:
        """Return the id of the vertex with ``role`` at half-unit ``pos``."""
        try:
            return self._by_pos[(role, pos)]
        except KeyError:
            raise GridSpecError(f"No {role} vertex at {format_half(pos)}")

    def primal(self, p: Point) -> int:
        """Return the id of primal vertex ``(x, y)``."""
        return self.find("primal", half(p))

    def tagged(self, tag: str) -> int:
        try:
            return self._by_tag[tag]
        except KeyError:
            raise GridSpecError(f"No vertex tagged {tag!r}")

    def ids(self, role: str) -> list[int]:
        return [v.id for v in self.vertices if v.role == role]

    def neighbors(self, x: int) -> list[int]:
        return [e.other(x) for e in self.adjacency[x]]

    def degree(self, x: int, weighted: bool = False) -> Weight:
        if weighted:
            return sum(e.weight for e in self.adjacency[x])
        return len(self.adjacency[x])

    def to_networkx(self) -> nx.MultiGraph:
        """Return a networkx multigraph with role/kind/weight attributes."""
        g = nx.MultiGraph(name=self.name)
        for v in self.vertices:
            g.add_node(v.id, role=v.role, pos=v.pos, tag=v.tag)
        for e in self.edges:
            g.add_edge(e.u, e.v, key=e.id, kind=e.kind, weight=e.weight)
        return g


class _Builder:
    """Collects vertices by position, then assigns row-major ids."""

    _ROLE_ORDER = {r: i for i, r in enumerate(ROLES)}

    def __init__(self):
        self._vertices: dict[tuple[str, Point, str], None] = {}
        self._edges: list[tuple[tuple, tuple, str, Weight, tuple]] = []

    def vertex(self, role: str, pos: Point, tag: str = "") -> tuple:
        key = (role, pos, tag)
        self._vertices[key] = None
        return key

    def edge(
        self, a: tuple, b: tuple, kind: str, weight: Weight = 1, slots: tuple = ()
    ) -> None:
        self._edges.append((a, b, kind, weight, slots))

    def build(
        self, name: str, spec: Optional[GridSpec], cycle: list[tuple] = ()
    ) -> PlaneGraph:
        keys = sorted(
            self._vertices,
            key=lambda k: (k[1][1], k[1][0], self._ROLE_ORDER[k[0]], k[2]),
        )
        ids = {k: i for i, k in enumerate(keys)}
        vertices = tuple(Vertex(ids[k], k[0], k[1], k[2]) for k in keys)
        raw = []
        for a, b, kind, weight, slots in self._edges:
            u, v = sorted((ids[a], ids[b]))
            if u == v:
                raise GridSpecError(f"Self-loop at vertex {u} in {name}")
            raw.append((u, v, kind, weight, slots))
        raw.sort(key=lambda r: (r[0], r[1], r[2]))
        edges = tuple(Edge(i, *r) for i, r in enumerate(raw))
        return PlaneGraph(
            name, vertices, edges, tuple(ids[k] for k in cycle), spec
        )


def _check(spec: GridSpec) -> None:
    spec.validate()


def _boundary_walk(spec: GridSpec) -> list[Point]:
    """Boundary vertices in anticlockwise order (repeats on thin grids)."""
    walk: list[Point] = []
    for s in spec.slots():
        if not walk or walk[-1] != s.vertex:
            walk.append(s.vertex)
    while len(walk) > 1 and walk[0] == walk[-1]:
        walk.pop()
    return walk


def _add_primals(b: _Builder, spec: GridSpec) -> dict[Point, tuple]:
    return {p: b.vertex("primal", half(p)) for p in spec.vertices()}


def _add_grid(b: _Builder, spec: GridSpec) -> dict[Point, tuple]:
    keys = _add_primals(b, spec)
    for p in spec.vertices():
        for d in "EN":
            dx, dy = DIRECTIONS[d]
            q = (p[0] + dx, p[1] + dy)
            if spec.contains(q):
                b.edge(keys[p], keys[q], "primal-edge")
    return keys


def build_g1(spec: GridSpec) -> PlaneGraph:
    """Build the primal grid G1.

    Parameters
    ----------
    spec : GridSpec
        Shape description; terminals are validated but not added.

    Returns
    -------
    PlaneGraph
        Primal vertices and grid edges only. ``boundary_cycle`` records the
        anticlockwise boundary walk.
    """
    spec.validate(require_terminals=False)
    b = _Builder()
    keys = _add_grid(b, spec)
    cycle = [keys[p] for p in _boundary_walk(spec)]
    return b.build("G1", spec, cycle)


def build_superposition(spec: GridSpec) -> PlaneGraph:
    """Build the impurity graph ``G^(k)``.

    Every G1 edge crosses one G2 edge at a middle vertex. Every boundary
    slot carries either a boundary vertex (adjacent to the slot's primal
    vertex and the two boundary duals of the crossed G2 edge) or, at a
    terminal, a middle vertex adjacent to ``t``, ``T`` and the same two
    duals. Diagonal impurity edges join each primal vertex to its four
    surrounding dual vertices and each terminal ``T`` to its two adjacent
    dual vertices, so every face between a primal and a dual vertex carries
    one.

    Parameters
    ----------
    spec : GridSpec
        Validated grid with ``2k - 1`` terminals.

    Returns
    -------
    PlaneGraph
        The graph ``G^(k)``; ``boundary_cycle`` lists the slot vertices and
        terminals in anticlockwise order.
    """
    _check(spec)
    b = _Builder()
    primal = _add_primals(b, spec)
    dual = {d: b.vertex("dual", d) for d in spec.dual_vertices()}

    for p in spec.vertices():
        for d in "EN":
            dx, dy = DIRECTIONS[d]
            q = (p[0] + dx, p[1] + dy)
            if not spec.contains(q):
                continue
            mid = (2 * p[0] + dx, 2 * p[1] + dy)
            mk = b.vertex("middle", mid)
            b.edge(primal[p], mk, "primal-edge")
            b.edge(primal[q], mk, "primal-edge")
            # the crossing dual edge is perpendicular to the primal one
            px, py = -dy, dx
            b.edge(dual[(mid[0] + px, mid[1] + py)], mk, "dual-edge")
            b.edge(dual[(mid[0] - px, mid[1] - py)], mk, "dual-edge")
        for d in spec.corner_duals(p):
            b.edge(primal[p], dual[d], "diagonal-impurity")

    terminals = {t.slot: t for t in spec.terminals}
    cycle = []
    for s in spec.slots():
        if s in terminals:
            mk = b.vertex("middle", s.crossing, s.label())
            tk = b.vertex("terminal", s.outer, f"T{spec.terminals.index(terminals[s]) + 1}")
            b.edge(primal[s.vertex], mk, "terminal-edge")
            b.edge(tk, mk, "terminal-edge")
            b.edge(dual[s.ahead], mk, "dual-edge")
            b.edge(dual[s.behind], mk, "dual-edge")
            b.edge(tk, dual[s.ahead], "diagonal-impurity")
            b.edge(tk, dual[s.behind], "diagonal-impurity")
            cycle.append(tk)
        else:
            bk = b.vertex("boundary", s.crossing, s.label())
            b.edge(primal[s.vertex], bk, "primal-edge")
            b.edge(dual[s.ahead], bk, "dual-edge")
            b.edge(dual[s.behind], bk, "dual-edge")
            cycle.append(bk)

    g = b.build(f"G({spec.k})", spec, cycle)
    logger.info(
        "Built %s on %s: %d vertices, %d edges",
        g.name, spec.shape_label(), len(g.vertices), len(g.edges),
    )
    return g


def build_rooted(spec: GridSpec, variant: str = "terminals-identified") -> PlaneGraph:
    """Build ``G_{1,T,R}`` or ``G_{1,R}``.

    Parameters
    ----------
    spec : GridSpec
        Validated grid.
    variant : str
        ``with-terminals`` keeps the terminal vertices and joins every
        outer vertex to the root; ``terminals-identified`` merges the
        terminals into the root so that every primal vertex has degree 4
        counting root-edge multiplicity.

    Returns
    -------
    PlaneGraph
        The rooted graph. Root-edges bundle parallel slots into one edge
        whose ``weight`` is the multiplicity and ``slots`` the directions.
    """
    _check(spec)
    if variant not in ("with-terminals", "terminals-identified"):
        raise GridSpecError(f"Unknown rooted variant {variant!r}")
    b = _Builder()
    primal = _add_grid(b, spec)
    root = b.vertex("root", (0, 0), "R")
    terminal_slots = spec.terminal_slots()

    for p in spec.vertices():
        dirs = [s.direction for s in spec.slots_of(p)]
        if variant == "with-terminals":
            dirs = [d for d in dirs if Slot(p, d) not in terminal_slots]
        if dirs:
            b.edge(primal[p], root, "root-edge", len(dirs), tuple(dirs))

    name = "G1R"
    if variant == "with-terminals":
        name = "G1TR"
        for i, t in enumerate(spec.terminals, start=1):
            tk = b.vertex("terminal", t.position, f"T{i}")
            b.edge(primal[t.vertex], tk, "terminal-edge", 1, (t.direction,))
            b.edge(tk, root, "root-edge")
    return b.build(name, spec, [root])


def build_slotted(
    spec: GridSpec,
    pendants: Optional[list[tuple[Point, int]]] = None,
    omit: tuple[Slot, ...] = (),
) -> PlaneGraph:
    """Build G1 with one outer node per slot, the input of grove assemblies.

    Non-terminal slots get a boundary vertex tagged with the slot label,
    terminal slots get the terminal vertex tagged ``T1``, ``T2``, ...
    Pendants are extra leaves hung on chosen primal vertices.

    Parameters
    ----------
    spec : GridSpec
        Validated grid.
    pendants : list of (vertex, gap), optional
        Leaf attached to ``vertex`` and placed on the outer face after slot
        number ``gap``; tagged ``V(x,y)``.
    omit : tuple of Slot
        Slots left without an outer node (their primal vertex loses one
        from its degree).

    Returns
    -------
    PlaneGraph
        Interior vertices are exactly the primal vertices.
    """
    _check(spec)
    b = _Builder()
    primal = _add_grid(b, spec)
    terminals = {t.slot: i for i, t in enumerate(spec.terminals, start=1)}
    slots = spec.slots()
    by_gap: dict[int, list[tuple]] = {}
    for vertex, gap in pendants or []:
        if not spec.contains(vertex):
            raise GridSpecError(f"Pendant vertex {vertex} is outside the grid")
        key = b.vertex("pendant", slots[gap % len(slots)].ahead, f"V({vertex[0]},{vertex[1]})")
        b.edge(primal[vertex], key, "pendant-edge")
        by_gap.setdefault(gap % len(slots), []).append(key)

    cycle = []
    for i, s in enumerate(slots):
        if s not in omit:
            if s in terminals:
                key = b.vertex("terminal", s.outer, f"T{terminals[s]}")
                b.edge(primal[s.vertex], key, "terminal-edge", 1, (s.direction,))
            else:
                key = b.vertex("boundary", s.crossing, s.label())
                b.edge(primal[s.vertex], key, "slot-edge", 1, (s.direction,))
            cycle.append(key)
        cycle.extend(by_gap.get(i, []))
    return b.build("G1S", spec, cycle)


# --- Boundary arcs ---


@dataclass(frozen=True)
class BoundaryArc:
    """The boundary stretch strictly between two boundary vertices.

    Attributes
    ----------
    a, b : tuple of int
        Endpoint primal vertices.
    side : str
        ``ccw`` when the arc runs anticlockwise from ``a`` to ``b``,
        ``cw`` otherwise.
    members : tuple of tuple of int
        Primal vertices strictly between ``a`` and ``b``, in walk order.
    slots : tuple of Slot
        The slots of the arc, counted with multiplicity at corners.
    """

    a: Point
    b: Point
    side: str
    members: tuple[Point, ...]
    slots: tuple[Slot, ...]


def _walk(spec: GridSpec, a: Point, b: Point) -> Optional[list[Slot]]:
    """Slots met walking anticlockwise from ``a`` to ``b``.

    Starts after a maximal run of ``a``'s slots; returns ``None`` when every
    start meets ``a`` again before reaching ``b``.
    """
    slots = spec.slots()
    count = len(slots)
    for i in range(count):
        if slots[i].vertex != a or slots[(i + 1) % count].vertex == a:
            continue
        out = []
        for j in range(1, count):
            s = slots[(i + j) % count]
            if s.vertex == b:
                return out
            if s.vertex == a:
                break
            out.append(s)
    return None


def boundary_arc(
    g1: PlaneGraph,
    spec: GridSpec,
    a: Point,
    b: Point,
    side: Optional[str] = None,
) -> BoundaryArc:
    """Return the terminal-free boundary arc between ``a`` and ``b``.

    Parameters
    ----------
    g1 : PlaneGraph
        The primal grid (used to confirm the endpoints exist).
    spec : GridSpec
        Grid and terminals.
    a, b : tuple of int
        Boundary vertices.
    side : {"ccw", "cw"}, optional
        Walk direction from ``a`` to ``b``. When omitted, the unique side
        without a terminal is chosen.

    Returns
    -------
    BoundaryArc

    Raises
    ------
    GridSpecError
        If ``a == b`` or either vertex is not on the boundary.
    ArcError
        If the requested side carries a terminal, or no side (or both
        sides) qualify when ``side`` is omitted.
    """
    for p in (a, b):
        g1.primal(p)
        if not spec.on_boundary(p):
            raise GridSpecError(f"Vertex {p} is not on the boundary")
    if a == b:
        raise GridSpecError("Arc endpoints must differ")

    terminal_slots = spec.terminal_slots()
    terminal_vertices = {t.vertex for t in spec.terminals}

    def make(which: str) -> Optional[BoundaryArc]:
        walked = _walk(spec, a, b) if which == "ccw" else _walk(spec, b, a)
        if walked is None:
            return None
        if which == "cw":
            walked = walked[::-1]
        members: list[Point] = []
        for s in walked:
            if not members or members[-1] != s.vertex:
                members.append(s.vertex)
        return BoundaryArc(a, b, which, tuple(members), tuple(walked))

    def clean(arc: BoundaryArc) -> bool:
        return not (
            any(s in terminal_slots for s in arc.slots)
            or any(p in terminal_vertices for p in arc.members)
        )

    if side is not None:
        if side not in ("ccw", "cw"):
            raise ArcError(f"Unknown arc side {side!r}")
        arc = make(side)
        if arc is None:
            raise ArcError(f"No {side} boundary walk from {a} to {b}")
        if not clean(arc):
            raise ArcError(f"The {side} arc from {a} to {b} contains a terminal")
        return arc

    candidates = [arc for arc in (make("ccw"), make("cw")) if arc and clean(arc)]
    if not candidates:
        raise ArcError(f"Every arc between {a} and {b} contains a terminal")
    if len(candidates) > 1:
        raise ArcError(f"Both arcs between {a} and {b} are terminal-free; pass a side")
    return candidates[0]


# --- Export ---


def _fmt_weight(w: Weight) -> str:
    return str(w) if not isinstance(w, Fraction) else f"{w.numerator}/{w.denominator}"


def export_dot(g: PlaneGraph) -> str:
    """Return a deterministic DOT rendering of ``g``.

    The first line is the format header ``// impurity-dimer-graph v1``.
    Vertices and edges are listed in id order with role/kind annotations
    and half-unit coordinates.
    """
    lines = [f"// {DOT_HEADER}", f'graph "{g.name}" {{']
    for v in g.vertices:
        tag = f', tag="{v.tag}"' if v.tag else ""
        lines.append(
            f'  {v.id} [role={v.role}, pos="{v.pos[0]},{v.pos[1]}!"{tag}];'
        )
    for e in g.edges:
        extra = f', slots="{"".join(e.slots)}"' if e.slots else ""
        lines.append(
            f"  {e.u} -- {e.v} [id={e.id}, kind={e.kind}, "
            f"weight={_fmt_weight(e.weight)}{extra}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_document(g: PlaneGraph) -> dict:
    """Return a versioned JSON-serialisable document for ``g``."""
    return {
        "format": DOCUMENT_FORMAT,
        "version": DOCUMENT_VERSION,
        "name": g.name,
        "vertices": [
            {"id": v.id, "role": v.role, "pos": list(v.pos), "tag": v.tag}
            for v in g.vertices
        ],
        "edges": [
            {
                "id": e.id,
                "u": e.u,
                "v": e.v,
                "kind": e.kind,
                "weight": _fmt_weight(e.weight),
                "slots": list(e.slots),
            }
            for e in g.edges
        ],
        "boundary_cycle": list(g.boundary_cycle),
    }


def graph_from_document(doc: Union[dict, str]) -> PlaneGraph:
    """Rebuild a ``PlaneGraph`` from ``graph_document`` output.

    Raises
    ------
    GridSpecError
        On an unknown format or version.
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    if doc.get("format") != DOCUMENT_FORMAT or doc.get("version") != DOCUMENT_VERSION:
        raise GridSpecError("Not an impurity-dimer-graph v1 document")
    vertices = tuple(
        Vertex(v["id"], v["role"], tuple(v["pos"]), v.get("tag", ""))
        for v in doc["vertices"]
    )
    edges = []
    for e in doc["edges"]:
        w = Fraction(e["weight"])
        edges.append(
            Edge(
                e["id"], e["u"], e["v"], e["kind"],
                int(w) if w.denominator == 1 else w,
                tuple(e.get("slots", ())),
            )
        )
    return PlaneGraph(doc["name"], vertices, tuple(edges), tuple(doc["boundary_cycle"]))


# --- Planarity of the coordinate embedding ---


def _orient(p: Point, q: Point, r: Point) -> int:
    v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    return (v > 0) - (v < 0)


def _on_segment(p: Point, q: Point, r: Point) -> bool:
    return min(p[0], r[0]) <= q[0] <= max(p[0], r[0]) and min(p[1], r[1]) <= q[1] <= max(p[1], r[1])


def _segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool:
    o1, o2 = _orient(a, b, c), _orient(a, b, d)
    o3, o4 = _orient(c, d, a), _orient(c, d, b)
    if o1 != o2 and o3 != o4:
        return True
    return (
        (o1 == 0 and _on_segment(a, c, b))
        or (o2 == 0 and _on_segment(a, d, b))
        or (o3 == 0 and _on_segment(c, a, d))
        or (o4 == 0 and _on_segment(c, b, d))
    )


def crossing_pairs(g: PlaneGraph) -> Iterator[tuple[Edge, Edge]]:
    """Yield pairs of edges whose straight segments meet away from a shared vertex."""
    pos = {v.id: v.pos for v in g.vertices}
    edges = list(g.edges)
    for i, e in enumerate(edges):
        for f in edges[i + 1:]:
            if {e.u, e.v} & {f.u, f.v}:
                continue
            if _segments_cross(pos[e.u], pos[e.v], pos[f.u], pos[f.v]):
                yield e, f


def check_planar(g: PlaneGraph) -> bool:
    """Return ``True`` when no two edges of the embedding cross."""
    for e, f in crossing_pairs(g):
        logger.debug("Edges %d and %d cross", e.id, f.id)
        return False
    return True
