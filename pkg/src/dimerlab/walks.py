"""Random walks on G_{1,R}: Wilson's sampler, loop erasure and hitting
estimates.

All randomness comes from ``numpy.random.Generator(numpy.random.Philox(seed))``
so a seed fixes every sample sequence. Each primal vertex of G_{1,R} has
four edge slots; a step picks one of them uniformly, so parallel root
edges are distinct choices.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import networkx as nx
import numpy as np
from scipy import stats

from .lattice import PlaneGraph, build_rooted
from .models import DIRECTIONS, DimerlabError, GridSpec, Point, Slot

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator]
Stub = tuple[int, int]


class UnreachableTargetError(DimerlabError):
    """Raised when a walk cannot reach its target set."""

    pass


def make_rng(seed: Seed) -> np.random.Generator:
    """Return a Philox generator for ``seed`` (generators pass through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(int(seed)))


class _Steps:
    """Buffered uniform draws so a walk step costs no generator call."""

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self._rng = rng
        self._block = block
        self._buf = rng.random(block)
        self._i = 0

    def choose(self, count: int) -> int:
        if self._i == self._block:
            self._buf = self._rng.random(self._block)
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return min(int(u * count), count - 1)


def _stubs(g: PlaneGraph) -> dict[int, list[tuple[int, Stub]]]:
    """Per vertex: ``(neighbour, (edge id, copy))`` for every edge copy."""
    out: dict[int, list[tuple[int, Stub]]] = {v.id: [] for v in g.vertices}
    for e in g.edges:
        for c in range(int(e.weight)):
            out[e.u].append((e.v, (e.id, c)))
            out[e.v].append((e.u, (e.id, c)))
    return out


def _walk_erased(
    stubs: dict[int, list[tuple[int, Stub]]],
    start: int,
    in_target,
    steps: _Steps,
) -> list[tuple[int, Optional[Stub]]]:
    """Chronological loop erasure of a walk from ``start`` until it hits
    the target; each entry is a vertex and the stub used to leave it."""
    path: list[tuple[int, Optional[Stub]]] = [(start, None)]
    where = {start: 0}
    x = start
    while not in_target(x):
        choices = stubs[x]
        y, stub = choices[steps.choose(len(choices))]
        path[-1] = (x, stub)
        if y in where:
            cut = where[y]
            for v, _ in path[cut + 1:]:
                del where[v]
            del path[cut + 1:]
            path[-1] = (y, None)
        else:
            where[y] = len(path)
            path.append((y, None))
        x = y
    return path


def lerw(
    g: PlaneGraph,
    start: int,
    targets: Iterable[int],
    seed: Seed = 0,
) -> list[int]:
    """Loop-erased random walk from ``start`` to the first target hit.

    Returns
    -------
    list of int
        Vertex ids of the erased path, ``start`` first and a target last.

    Raises
    ------
    UnreachableTargetError
        If no target lies in ``start``'s component.
    """
    targets = set(targets)
    component = nx.node_connected_component(g.to_networkx(), start)
    if not targets & component:
        raise UnreachableTargetError(f"No target reachable from vertex {start}")
    path = _walk_erased(_stubs(g), start, targets.__contains__, _Steps(make_rng(seed)))
    return [v for v, _ in path]


@dataclass
class TreeSample:
    """A spanning tree of a rooted graph as a parent map.

    Attributes
    ----------
    root : int
        Root vertex id.
    parent : dict
        Vertex id -> ``(parent id, (edge id, copy))``.
    """

    root: int
    parent: dict[int, tuple[int, Stub]] = field(default_factory=dict)

    @property
    def edges(self) -> frozenset[Stub]:
        return frozenset(stub for _, stub in self.parent.values())

    def exit_stub(self, x: int) -> Optional[Stub]:
        """The stub by which the tree path from ``x`` enters the root."""
        last = None
        while x != self.root:
            x, last = self.parent[x]
        return last

    def ti_component(self, g: PlaneGraph, terminal: Slot) -> set[int]:
        """Primal vertices whose path to the root leaves through ``terminal``."""
        t_id = g.primal(terminal.vertex)
        edge = next(
            e for e in g.adjacency[t_id]
            if e.kind == "root-edge" and terminal.direction in e.slots
        )
        stub = (edge.id, edge.slots.index(terminal.direction))
        return {x for x in self.parent if self.exit_stub(x) == stub}


def wilson_sample(g: PlaneGraph, seed: Seed = 0, root: Optional[int] = None) -> TreeSample:
    """Sample a uniform spanning tree of ``g`` by Wilson's algorithm.

    Vertices are started in id order; each loop-erased walk is grafted
    onto the tree grown so far.
    """
    if root is None:
        root = g.tagged("R") if any(v.role == "root" for v in g.vertices) else 0
    steps = _Steps(make_rng(seed))
    stubs = _stubs(g)
    in_tree = {root}
    sample = TreeSample(root)
    for v in g.vertices:
        if v.id in in_tree:
            continue
        path = _walk_erased(stubs, v.id, in_tree.__contains__, steps)
        for (x, stub), (y, _) in zip(path, path[1:]):
            sample.parent[x] = (y, stub)
            in_tree.add(x)
    return sample


@dataclass
class TIStats:
    """Monte Carlo statistics of the TI-component size ``l_T``."""

    mean: float
    stderr: float
    samples: int
    seed: int
    membership: dict[Point, float]
    membership_stderr: dict[Point, float]


def ti_length_stats(spec: GridSpec, samples: int, seed: int = 0) -> TIStats:
    """Estimate ``E[l_T]`` and ``P(x in C_t)`` under uniform spanning trees.

    ``l_T`` counts primal vertices whose tree path to the root leaves
    through the terminal slot.
    """
    if spec.k != 1:
        raise ValueError("TI statistics need a single terminal")
    if samples < 2:
        raise ValueError("At least two samples are needed for a standard error")
    g = build_rooted(spec, "terminals-identified")
    rng = make_rng(seed)
    terminal = spec.terminals[0].slot
    ids = {g.primal(p): p for p in spec.vertices()}
    lengths = np.zeros(samples)
    hits = dict.fromkeys(ids.values(), 0)
    for i in range(samples):
        component = wilson_sample(g, rng).ti_component(g, terminal)
        lengths[i] = len(component)
        for x in component:
            hits[ids[x]] += 1
    membership = {p: h / samples for p, h in hits.items()}
    logger.info(
        "Sampled %d trees on %s: mean l_T %.4f", samples, spec.shape_label(), lengths.mean()
    )
    return TIStats(
        mean=float(lengths.mean()),
        stderr=float(lengths.std(ddof=1) / math.sqrt(samples)),
        samples=samples,
        seed=seed,
        membership=membership,
        membership_stderr={
            p: math.sqrt(q * (1 - q) / samples) for p, q in membership.items()
        },
    )


@dataclass
class HittingEstimate:
    """Absorption frequencies of walks from one start vertex.

    Attributes
    ----------
    frequencies : dict
        Slot -> fraction of walks absorbed through it; sums to one.
    stderr : dict
        Slot -> binomial standard error.
    """

    start: Point
    walks: int
    seed: int
    frequencies: dict[Slot, float]
    stderr: dict[Slot, float]

    def terminal_frequencies(self, spec: GridSpec) -> list[float]:
        return [self.frequencies[t.slot] for t in spec.terminals]


def srw_hitting_estimate(
    spec: GridSpec, x: Point, walks: int, seed: int = 0
) -> HittingEstimate:
    """Run ``walks`` simple random walks from ``x`` until they leave G1.

    All walks advance in lock-step as numpy arrays. Each step moves in one
    of the four directions; a move off the grid is absorption through that
    slot.
    """
    if not spec.contains(x):
        raise ValueError(f"Start vertex {x} is outside the grid")
    if walks < 1:
        raise ValueError("At least one walk is needed")
    rng = make_rng(seed)
    slots = spec.slots()
    index = {s: i for i, s in enumerate(slots)}
    order = "NSEW"
    delta = np.array([DIRECTIONS[d] for d in order])
    lookup = np.full((spec.n + 2, spec.m + 2, 4), -1, dtype=np.int64)
    for s, i in index.items():
        lookup[s.vertex[0], s.vertex[1], order.index(s.direction)] = i

    pos = np.tile(np.array(x, dtype=np.int64), (walks, 1))
    alive = np.arange(walks)
    counts = np.zeros(len(slots), dtype=np.int64)
    steps = 0
    while alive.size:
        d = rng.integers(0, 4, size=alive.size)
        here = pos[alive]
        exit_slot = lookup[here[:, 0], here[:, 1], d]
        leaving = exit_slot >= 0
        np.add.at(counts, exit_slot[leaving], 1)
        staying = alive[~leaving]
        pos[staying] += delta[d[~leaving]]
        alive = staying
        steps += 1
    freqs = counts / walks
    logger.info("Ran %d walks from %s for %d lock-steps", walks, x, steps)
    return HittingEstimate(
        start=x,
        walks=walks,
        seed=seed,
        frequencies={s: float(freqs[i]) for s, i in index.items()},
        stderr={s: math.sqrt(freqs[i] * (1 - freqs[i]) / walks) for s, i in index.items()},
    )


@dataclass
class UniformityTest:
    statistic: float
    pvalue: float
    samples: int
    universe: int


def uniformity_test(
    samples: Sequence[frozenset], universe: Sequence[frozenset]
) -> UniformityTest:
    """Chi-square test of ``samples`` against the uniform law on ``universe``.

    Trees never drawn count as zero observations.

    Raises
    ------
    ValueError
        If a sample is not in ``universe``.
    """
    index = {t: i for i, t in enumerate(universe)}
    observed = np.zeros(len(universe))
    for t in samples:
        if t not in index:
            raise ValueError("Sampled tree is not in the universe")
        observed[index[t]] += 1
    result = stats.chisquare(observed)
    return UniformityTest(
        float(result.statistic), float(result.pvalue), len(samples), len(universe)
    )
