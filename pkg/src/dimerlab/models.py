"""Domain model for dimerlab.

Defines the grid description (``GridSpec``), terminals, boundary slots,
impurity configurations and count results shared by every module, plus the
parsers for the ``rect:2x2`` / ``x,y:D`` flag syntax.

Positions of primal vertices are integer pairs ``(x, y)`` with
``1 <= x <= n`` and ``1 <= y <= m``. Everything that can sit between primal
vertices (dual vertices, middle vertices, terminals) is addressed in
half-units: a primal vertex ``(x, y)`` lives at ``(2x, 2y)`` and the dual
vertex ``(x + 1/2, y + 1/2)`` at ``(2x + 1, 2y + 1)``.
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

Point = tuple[int, int]

DIRECTIONS: dict[str, Point] = {
    "N": (0, 1),
    "S": (0, -1),
    "E": (1, 0),
    "W": (-1, 0),
}


class DimerlabError(Exception):
    """Base class for every error raised by dimerlab."""

    pass


class GridSpecError(DimerlabError):
    """Raised when a shape, terminal or vertex description is invalid."""

    pass


def half(p: Point) -> Point:
    """Return the half-unit position of primal vertex ``p``."""
    return (2 * p[0], 2 * p[1])


def _rot_ccw(d: Point) -> Point:
    return (-d[1], d[0])


@dataclass(frozen=True, order=True)
class Slot:
    """A boundary exit of the degree-4 completion of G1.

    Attributes
    ----------
    vertex : tuple of int
        Primal vertex ``(x, y)``.
    direction : str
        One of ``N``, ``S``, ``E``, ``W``; the neighbour in that direction
        lies outside the grid.
    """

    vertex: Point
    direction: str

    @property
    def crossing(self) -> Point:
        """Half-unit midpoint of the slot edge (where it crosses G2)."""
        dx, dy = DIRECTIONS[self.direction]
        return (2 * self.vertex[0] + dx, 2 * self.vertex[1] + dy)

    @property
    def outer(self) -> Point:
        """Half-unit position one full step outside the grid."""
        dx, dy = DIRECTIONS[self.direction]
        return (2 * self.vertex[0] + 2 * dx, 2 * self.vertex[1] + 2 * dy)

    @property
    def ahead(self) -> Point:
        """Dual endpoint of the crossed boundary edge, anticlockwise side."""
        cx, cy = self.crossing
        rx, ry = _rot_ccw(DIRECTIONS[self.direction])
        return (cx + rx, cy + ry)

    @property
    def behind(self) -> Point:
        """Dual endpoint of the crossed boundary edge, clockwise side."""
        cx, cy = self.crossing
        rx, ry = _rot_ccw(DIRECTIONS[self.direction])
        return (cx - rx, cy - ry)

    def label(self) -> str:
        return f"{self.vertex[0]},{self.vertex[1]}:{self.direction}"


@dataclass(frozen=True)
class Terminal:
    """A terminal attachment: boundary vertex plus outward direction.

    Attributes
    ----------
    vertex : tuple of int
        The attachment vertex ``t`` in G1.
    direction : str
        Outward direction; the terminal vertex ``T`` sits one step that way.
    """

    vertex: Point
    direction: str

    @property
    def slot(self) -> Slot:
        return Slot(self.vertex, self.direction)

    @property
    def position(self) -> Point:
        """Half-unit position of the terminal vertex ``T``."""
        return self.slot.outer


@dataclass(frozen=True)
class GridSpec:
    """Declarative description of G1, its terminals and the impurity count.

    Chains are rectangles of height one; ``kind`` only changes how vertices
    are written on the command line.

    Attributes
    ----------
    kind : str
        ``rect`` or ``chain``.
    n : int
        Width (chain length).
    m : int
        Height; always 1 for chains.
    k : int
        Number of impurities.
    terminals : tuple of Terminal
        The ``2k - 1`` terminal attachments, in the order given.
    """

    kind: str
    n: int
    m: int
    k: int = 1
    terminals: tuple[Terminal, ...] = field(default_factory=tuple)

    @classmethod
    def rectangle(
        cls, n: int, m: int, terminals: list[Terminal], k: Optional[int] = None
    ) -> "GridSpec":
        if k is None:
            k = (len(terminals) + 1) // 2
        return cls("rect", n, m, k, tuple(terminals))

    @classmethod
    def chain(
        cls, n: int, terminals: list[Terminal], k: Optional[int] = None
    ) -> "GridSpec":
        if k is None:
            k = (len(terminals) + 1) // 2
        return cls("chain", n, 1, k, tuple(terminals))

    def shape_label(self) -> str:
        """Return the shape in flag syntax."""
        if self.kind == "chain":
            return f"chain:{self.n}"
        return f"rect:{self.n}x{self.m}"

    def terminal_labels(self) -> list[str]:
        return [format_terminal(self, t) for t in self.terminals]

    def vertices(self) -> list[Point]:
        """Primal vertices in row-major order (y, then x)."""
        return [(x, y) for y in range(1, self.m + 1) for x in range(1, self.n + 1)]

    def contains(self, p: Point) -> bool:
        return 1 <= p[0] <= self.n and 1 <= p[1] <= self.m

    def neighbors(self, p: Point) -> list[Point]:
        """Grid neighbours of ``p`` in N, S, E, W order."""
        out = []
        for d in "NSEW":
            dx, dy = DIRECTIONS[d]
            q = (p[0] + dx, p[1] + dy)
            if self.contains(q):
                out.append(q)
        return out

    def on_boundary(self, p: Point) -> bool:
        return self.contains(p) and len(self.neighbors(p)) < 4

    def slots(self) -> list[Slot]:
        """All slots in anticlockwise order, starting at ``(1, 1)`` south."""
        n, m = self.n, self.m
        out = [Slot((x, 1), "S") for x in range(1, n + 1)]
        out += [Slot((n, y), "E") for y in range(1, m + 1)]
        out += [Slot((x, m), "N") for x in range(n, 0, -1)]
        out += [Slot((1, y), "W") for y in range(m, 0, -1)]
        return out

    def slots_of(self, p: Point) -> list[Slot]:
        return [s for s in self.slots() if s.vertex == p]

    def terminal_slots(self) -> set[Slot]:
        return {t.slot for t in self.terminals}

    def gap_index(self, dual: Point) -> int:
        """Index ``i`` of the boundary dual sitting after slot ``i``.

        Raises
        ------
        GridSpecError
            If ``dual`` is not a boundary dual vertex.
        """
        for i, s in enumerate(self.slots()):
            if s.ahead == dual:
                return i
        raise GridSpecError(f"{format_half(dual)} is not a boundary dual vertex")

    def dual_vertices(self) -> list[Point]:
        """Half-unit positions of the ``(n+1)(m+1)`` dual vertices."""
        return [
            (2 * x + 1, 2 * y + 1)
            for y in range(0, self.m + 1)
            for x in range(0, self.n + 1)
        ]

    def is_boundary_dual(self, d: Point) -> bool:
        return d[0] in (1, 2 * self.n + 1) or d[1] in (1, 2 * self.m + 1)

    def corner_duals(self, p: Point) -> list[Point]:
        """The four dual vertices around primal vertex ``p``."""
        x, y = half(p)
        return [(x + dx, y + dy) for dy in (-1, 1) for dx in (-1, 1)]

    def validate(self, require_terminals: bool = True) -> None:
        """Check the shape and terminal invariants.

        With ``require_terminals=False`` only the shape and the terminals
        actually given are checked, not their count.

        Raises
        ------
        GridSpecError
            On a non-positive size, a wrong terminal count, a terminal that
            does not point into the outer face, or two terminals on one
            vertex.
        """
        if self.kind not in ("rect", "chain"):
            raise GridSpecError(f"Unknown shape kind: {self.kind!r}")
        if self.n < 1 or self.m < 1:
            raise GridSpecError(f"Grid sides must be >= 1, got {self.n}x{self.m}")
        if self.kind == "chain" and self.m != 1:
            raise GridSpecError("A chain has height 1")
        if self.k < 1:
            raise GridSpecError(f"Impurity count must be >= 1, got {self.k}")
        if require_terminals and len(self.terminals) != 2 * self.k - 1:
            raise GridSpecError(
                f"k={self.k} needs exactly {2 * self.k - 1} terminal(s), "
                f"got {len(self.terminals)}"
            )
        slots = set(self.slots())
        seen: set[Point] = set()
        for t in self.terminals:
            if t.direction not in DIRECTIONS:
                raise GridSpecError(f"Unknown direction {t.direction!r}")
            if not self.contains(t.vertex):
                raise GridSpecError(f"Terminal vertex {t.vertex} is outside the grid")
            if t.slot not in slots:
                raise GridSpecError(
                    f"Terminal {format_terminal(self, t)} does not point "
                    "into the outer face"
                )
            if t.vertex in seen:
                raise GridSpecError(
                    f"Two terminals attached to vertex {t.vertex}"
                )
            seen.add(t.vertex)


class DualClass(str, Enum):
    """Position class of an impurity's dual endpoint."""

    BOUNDARY = "boundary"
    NEAR_BOUNDARY = "near-boundary"
    INTERIOR = "interior"


@dataclass(frozen=True)
class ImpurityConfig:
    """Positions of the impurity edges.

    Attributes
    ----------
    primals : tuple of tuple of int
        Primal endpoints ``I1`` of the impurities.
    duals : tuple
        Dual endpoints ``I2`` in half-units, or ``None`` where only the
        primal endpoint matters.
    """

    primals: tuple[Point, ...]
    duals: tuple[Optional[Point], ...] = ()

    def __post_init__(self):
        if not self.duals:
            object.__setattr__(self, "duals", (None,) * len(self.primals))
        if len(self.duals) != len(self.primals):
            raise GridSpecError("Each impurity needs one (possibly empty) dual")

    @property
    def k(self) -> int:
        return len(self.primals)

    def dual_class(self, spec: GridSpec, j: int) -> Optional[DualClass]:
        """Classify the dual endpoint of impurity ``j``."""
        d = self.duals[j]
        if d is None:
            return None
        if spec.is_boundary_dual(d):
            return DualClass.BOUNDARY
        if spec.on_boundary(self.primals[j]):
            return DualClass.NEAR_BOUNDARY
        return DualClass.INTERIOR

    def validate(self, spec: GridSpec) -> None:
        for j, p in enumerate(self.primals):
            if not spec.contains(p):
                raise GridSpecError(f"Impurity vertex {p} is outside the grid")
            d = self.duals[j]
            if d is not None and d not in spec.corner_duals(p):
                raise GridSpecError(
                    f"Dual {format_half(d)} is not a corner of vertex {p}"
                )


@dataclass
class CountResult:
    """An exact matching count and the formula that produced it.

    Attributes
    ----------
    value : int
        Nonnegative count.
    route : str
        ``cofactor``, ``hitting`` or ``grove``.
    parts : dict
        Named summands (``A``, ``B``, ``C``); they add up to ``value``.
    """

    value: int
    route: str
    parts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.parts and sum(self.parts.values()) != self.value:
            raise ValueError("CountResult parts do not add up to the value")


# --- Flag syntax ---

_RECT_RE = re.compile(r"^rect:(\d+)x(\d+)$")
_CHAIN_RE = re.compile(r"^chain:(\d+)$")


def parse_shape(text: str) -> tuple[str, int, int]:
    """Parse ``rect:NxM`` or ``chain:N`` into ``(kind, n, m)``."""
    text = text.strip()
    match = _RECT_RE.match(text)
    if match:
        return "rect", int(match.group(1)), int(match.group(2))
    match = _CHAIN_RE.match(text)
    if match:
        return "chain", int(match.group(1)), 1
    raise GridSpecError(f"Invalid shape {text!r}; expected rect:NxM or chain:N")


def parse_vertex(kind: str, text: str) -> Point:
    """Parse ``x,y`` (rectangles) or ``i`` (chains) into a primal vertex."""
    parts = text.strip().split(",")
    try:
        if kind == "chain" and len(parts) == 1:
            return (int(parts[0]), 1)
        if len(parts) == 2:
            return (int(parts[0]), int(parts[1]))
    except ValueError:
        pass
    raise GridSpecError(f"Invalid vertex {text!r}")


def parse_terminal(kind: str, text: str) -> Terminal:
    """Parse ``x,y:D`` (or ``i:D`` on chains) into a ``Terminal``."""
    if ":" not in text:
        raise GridSpecError(f"Invalid terminal {text!r}; expected x,y:D")
    where, direction = text.rsplit(":", 1)
    direction = direction.strip().upper()
    if direction not in DIRECTIONS:
        raise GridSpecError(f"Invalid direction in terminal {text!r}")
    return Terminal(parse_vertex(kind, where), direction)


def parse_dual(text: str) -> Point:
    """Parse a dual vertex written ``x.5,y.5`` into half-units."""
    parts = text.strip().split(",")
    if len(parts) != 2:
        raise GridSpecError(f"Invalid dual vertex {text!r}")
    try:
        hx, hy = (round(2 * float(p)) for p in parts)
    except ValueError:
        raise GridSpecError(f"Invalid dual vertex {text!r}")
    if hx % 2 == 0 or hy % 2 == 0:
        raise GridSpecError(f"Dual coordinates must be half-integers: {text!r}")
    return (hx, hy)


def format_half(p: Point) -> str:
    """Format a half-unit position as ``x,y`` with ``.5`` where needed."""

    def one(v: int) -> str:
        return str(v // 2) if v % 2 == 0 else f"{v / 2:.1f}"

    return f"{one(p[0])},{one(p[1])}"


def format_vertex(spec: GridSpec, p: Point) -> str:
    if spec.kind == "chain":
        return str(p[0])
    return f"{p[0]},{p[1]}"


def format_terminal(spec: GridSpec, t: Terminal) -> str:
    return f"{format_vertex(spec, t.vertex)}:{t.direction}"


def build_spec(
    shape: str, terminals: list[str], k: Optional[int] = None
) -> GridSpec:
    """Build and validate a ``GridSpec`` from flag strings."""
    kind, n, m = parse_shape(shape)
    parsed = [parse_terminal(kind, t) for t in terminals]
    if kind == "chain":
        spec = GridSpec.chain(n, parsed, k)
    else:
        spec = GridSpec.rectangle(n, m, parsed, k)
    spec.validate()
    return spec
