"""Self-checks that tie every counting route to brute force.

Each check builds its own small instances, runs the exact formulas next to
an oracle or a sampler with a fixed seed, and reports a ``CheckResult``.
The ``small`` suite runs in seconds; ``full`` adds larger grids, more
samples and the asymptotic checks.
"""

import logging
import math
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from itertools import product
from typing import Callable, Optional, Sequence

from .asymptotics import (
    LAMBDA_PLUS,
    chain_asymptotics,
    concentration_profile,
    continuum_entry,
    exact_ti_length,
    expected_ti_length,
    spectral_entry,
    ti_length_slope,
)
from .counts import (
    ROUTES,
    Normalization,
    count_chain,
    count_configuration,
    count_one_impurity,
    count_two_boundary,
    grid_context,
    hitting_matrix_count,
    impurity_distribution,
)
from .groves import (
    NonBipartitePartitionError,
    PartitionSpec,
    assemble_circular,
    grove_count_bipartite,
    noncrossing_partitions,
    resolvent,
)
from .lattice import (
    build_rooted,
    build_slotted,
    build_superposition,
    check_planar,
    export_dot,
    graph_document,
    graph_from_document,
)
from .linalg import inverse_entry
from .models import DimerlabError, GridSpec, ImpurityConfig, Terminal
from .oracle import (
    ForestPattern,
    count_configuration_matchings,
    count_matchings_by_impurity,
    enumerate_constrained_forests,
    enumerate_groves,
    enumerate_matchings,
    grove_partition_counts,
    iter_spanning_trees,
    resolve_normalization,
    spanning_tree_check,
)
from .walks import lerw, make_rng, srw_hitting_estimate, ti_length_stats, uniformity_test, wilson_sample

logger = logging.getLogger(__name__)

SUITES = ("small", "full")


@dataclass
class CheckResult:
    """Outcome of one named check."""

    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


# --- Instances ---


def _rect(n: int, m: int, *terminals: tuple) -> GridSpec:
    spec = GridSpec.rectangle(n, m, [Terminal(v, d) for v, d in terminals])
    spec.validate()
    return spec


def _chain(n: int, *terminals: tuple) -> GridSpec:
    spec = GridSpec.chain(n, [Terminal((j, 1), d) for j, d in terminals])
    spec.validate()
    return spec


def boundary_pair_instance() -> tuple[GridSpec, ImpurityConfig]:
    """2x3 grid, terminals on the east side, impurities on the west side."""
    spec = _rect(2, 3, ((2, 3), "E"), ((2, 2), "E"), ((2, 1), "E"))
    return spec, ImpurityConfig(((1, 3), (1, 1)), ((1, 5), (1, 3)))


def boundary_pair_large_instance() -> tuple[GridSpec, ImpurityConfig]:
    """4x5 grid; the arc from ``a`` to ``b`` turns two corners."""
    spec = _rect(4, 5, ((4, 2), "E"), ((4, 3), "E"), ((4, 4), "E"))
    return spec, ImpurityConfig(((2, 5), (2, 1)), ((3, 11), (3, 1)))


def near_boundary_instance() -> tuple[GridSpec, ImpurityConfig]:
    """3x6 grid where ``a``'s dual sits one step inside the boundary; the
    partner ``c`` is (1, 2) on the west arc."""
    spec = _rect(3, 6, ((3, 2), "E"), ((3, 3), "E"), ((3, 4), "E"))
    return spec, ImpurityConfig(((1, 3), (1, 1)), ((3, 5), (1, 1)))


def three_boundary_instance() -> tuple[GridSpec, ImpurityConfig]:
    """4x5 grid with five east terminals and three impurities down the
    west side."""
    spec = _rect(
        4, 5,
        ((4, 1), "E"), ((4, 2), "E"), ((4, 3), "E"), ((4, 4), "E"), ((4, 5), "E"),
    )
    return spec, ImpurityConfig(((1, 5), (1, 3), (1, 1)), ((1, 9), (1, 5), (1, 1)))


# Merged arc slots and grove pairs of each boundary instance, written out by
# hand so the forest oracle does not reuse the arc search.
_ANCHORS = {
    "boundary-pair": (
        [["1,2:W"]],
        [("1,3:W", "T1"), ("C1", "T2"), ("1,1:W", "T3")],
    ),
    "boundary-pair-large": (
        [["1,5:N", "1,5:W", "1,4:W", "1,3:W", "1,2:W", "1,1:W", "1,1:S"]],
        [("2,5:N", "T3"), ("C1", "T2"), ("2,1:S", "T1")],
    ),
    "near-boundary": (
        [["1,2:W"]],
        [("1,3:W", "T3"), ("C1", "T2"), ("1,1:W", "T1")],
    ),
    "three-boundary": (
        [["1,4:W"], ["1,2:W"]],
        [("1,5:W", "T5"), ("C1", "T4"), ("1,3:W", "T3"), ("C2", "T2"), ("1,1:W", "T1")],
    ),
}


def anchored_forests(spec: GridSpec, name: str) -> int:
    """Constrained forests of the slotted grid for a named boundary instance.

    Each arc's slots are merged into one node ``C1``, ``C2``, ... and the
    listed pairs must each share a tree; every other node stays alone.
    """
    arcs, pairs = _ANCHORS[name]
    g = build_slotted(spec)
    classes = [[g.tagged(label) for label in arc] for arc in arcs]
    names: dict[int, str] = {}
    merged: set[int] = set()
    for j, cls in enumerate(classes, start=1):
        first = min(cls, key=g.boundary_cycle.index)
        names[first] = f"C{j}"
        merged |= set(cls) - {first}
    nodes = [v for v in g.boundary_cycle if v not in merged]
    c = assemble_circular(g, identify=classes, nodes=nodes, names=names)
    return enumerate_constrained_forests(c, ForestPattern.from_pairs(c.nodes, pairs))


def chain_pair_instance(n: int = 7) -> tuple[GridSpec, tuple, tuple]:
    """Chain with three north terminals and impurities between them.

    Returns the grid and the two impurity vertices ``a`` and ``b``.
    """
    if n == 7:
        return _chain(7, (1, "N"), (4, "N"), (7, "N")), (2, 1), (6, 1)
    if n == 5:
        return _chain(5, (1, "W"), (3, "N"), (5, "E")), (2, 1), (4, 1)
    raise ValueError(f"No chain instance of length {n}")


def chain_triple_instance() -> tuple[GridSpec, tuple]:
    """Chain of nine with five north terminals on the odd vertices and
    three impurities between them."""
    spec = _chain(9, (1, "N"), (3, "N"), (5, "N"), (7, "N"), (9, "N"))
    return spec, ((2, 1), (4, 1), (8, 1))


# --- Checks ---

_Check = Callable[[bool], tuple[bool, str]]
_REGISTRY: list[tuple[str, _Check]] = []


def _check(name: str):
    def register(fn: _Check) -> _Check:
        _REGISTRY.append((name, fn))
        return fn

    return register


def check_names() -> list[str]:
    return [name for name, _ in _REGISTRY]


@_check("graph-families")
def _graph_families(full: bool) -> tuple[bool, str]:
    specs = [_rect(2, 2, ((1, 1), "W")), _rect(3, 2, ((1, 1), "S"))]
    if full:
        specs.append(_rect(3, 3, ((2, 1), "S"), ((3, 2), "E"), ((2, 3), "N")))
    for spec in specs:
        g = build_superposition(spec)
        if not check_planar(g):
            return False, f"{g.name} on {spec.shape_label()} has crossing edges"
        if graph_from_document(graph_document(g)) != g:
            return False, f"{g.name} on {spec.shape_label()} does not survive its document"
        if export_dot(g) != export_dot(build_superposition(spec)):
            return False, f"DOT output of {g.name} is not deterministic"
    chain = _chain(2, (1, "N"))
    listed = sum(1 for _ in enumerate_matchings(build_superposition(chain)))
    total = impurity_distribution(chain).total
    corner = inverse_entry(grid_context(specs[0]).K, (1, 1), (1, 1))
    ok = listed == total and corner == Fraction(7, 24)
    return ok, f"{len(specs)} planar graphs; chain:2 lists {listed} matchings (total {total})"


@_check("single-impurity-oracle")
def _single_impurity_oracle(full: bool) -> tuple[bool, str]:
    specs = [_rect(2, 2, ((1, 1), "W")), _chain(3, (1, "W"))]
    if full:
        specs += [_rect(2, 3, ((2, 1), "S")), _rect(3, 3, ((2, 1), "S")), _chain(5, (3, "N"))]
    notes = []
    for spec in specs:
        table = count_matchings_by_impurity(build_superposition(spec))
        ctx = grid_context(spec)
        for x in spec.vertices():
            m = count_one_impurity(spec, x).value
            if table.by_primal.get((x,), 0) != 4 * m:
                return False, f"{spec.shape_label()}: {x} has {table.by_primal.get((x,))} != 4*{m}"
        if table.by_primal.get(("T1",), 0) != 2 * ctx.det_k:
            return False, f"{spec.shape_label()}: terminal carries {table.by_primal.get(('T1',))}"
        notes.append(f"{spec.shape_label()} total {table.total}")
    return True, "; ".join(notes)


@_check("normalization")
def _normalization(full: bool) -> tuple[bool, str]:
    specs = [_rect(2, 2, ((1, 1), "W"))]
    if full:
        specs.append(_rect(3, 3, ((1, 1), "S")))
    for spec in specs:
        check = resolve_normalization(spec)
        if check.resolved is not Normalization.PER_DUAL:
            return False, f"{spec.shape_label()}: total {check.total} resolves to {check.resolved}"
    return True, f"{Normalization.PER_DUAL.value} on {len(specs)} grid(s)"


@_check("routes-agree")
def _routes_agree(full: bool) -> tuple[bool, str]:
    spec = _rect(3, 3, ((2, 1), "S")) if not full else _rect(4, 5, ((1, 3), "W"))
    for x in spec.vertices():
        values = {r: count_one_impurity(spec, x, r).value for r in ROUTES}
        if len(set(values.values())) != 1:
            return False, f"{x}: {values}"
    return True, f"{len(spec.vertices())} vertices on {spec.shape_label()}"


def _boundary_pair(
    spec: GridSpec, config: ImpurityConfig, anchor: str, with_matchings: bool
) -> tuple[bool, str]:
    a, b = config.primals
    values = {r: count_two_boundary(spec, a, b, r).value for r in ROUTES}
    values["hitting-matrix"] = hitting_matrix_count(spec, a, b).value
    values["forests"] = anchored_forests(spec, anchor)
    if with_matchings:
        values["matchings"] = count_configuration_matchings(spec, config, limit=128)
    ok = len(set(values.values())) == 1
    return ok, f"{spec.shape_label()} {values}"


@_check("two-boundary")
def _two_boundary(full: bool) -> tuple[bool, str]:
    ok, detail = _boundary_pair(*boundary_pair_instance(), "boundary-pair", with_matchings=True)
    if ok and full:
        ok, more = _boundary_pair(
            *boundary_pair_large_instance(), "boundary-pair-large", with_matchings=True
        )
        detail += "; " + more
    return ok, detail


@_check("near-boundary")
def _near_boundary(full: bool) -> tuple[bool, str]:
    spec, config = near_boundary_instance()
    result = count_configuration(spec, config)
    brute = count_configuration_matchings(spec, config, limit=128)
    forests = anchored_forests(spec, "near-boundary")
    ok = result.value == brute and forests == result.parts["A"] > 0
    return ok, (
        f"{spec.shape_label()} M={result.value} parts={result.parts} "
        f"matchings={brute} forests(A)={forests}"
    )


@_check("three-boundary")
def _three_boundary(full: bool) -> tuple[bool, str]:
    if not full:
        return True, "skipped in the small suite"
    spec, config = three_boundary_instance()
    values = {r: count_configuration(spec, config, r).value for r in ROUTES}
    values["forests"] = anchored_forests(spec, "three-boundary")
    values["matchings"] = count_configuration_matchings(spec, config, limit=128)
    ok = len(set(values.values())) == 1 and values["cofactor"] > 0
    return ok, str(values)


@_check("chain-pair")
def _chain_pair(full: bool) -> tuple[bool, str]:
    spec, a, b = chain_pair_instance(7 if full else 5)
    checked = nonzero = 0
    for da in spec.corner_duals(a):
        for db in spec.corner_duals(b):
            config = ImpurityConfig((a, b), (da, db))
            value = count_configuration(spec, config).value
            swept = count_chain(spec, config, "transfer").value
            brute = count_configuration_matchings(spec, config)
            if not value == swept == brute:
                return False, f"duals {da}, {db}: grove {value}, transfer {swept}, matchings {brute}"
            checked += 1
            nonzero += bool(value)
    return True, f"{spec.shape_label()}: {checked} dual choices, {nonzero} nonzero"


@_check("chain-triple")
def _chain_triple(full: bool) -> tuple[bool, str]:
    if not full:
        return True, "skipped in the small suite"
    spec, points = chain_triple_instance()
    checked = nonzero = 0
    for duals in product(*(spec.corner_duals(p) for p in points)):
        config = ImpurityConfig(points, duals)
        value = count_configuration(spec, config).value
        brute = count_configuration_matchings(spec, config)
        if value != brute:
            return False, f"duals {duals}: transfer {value}, matchings {brute}"
        checked += 1
        nonzero += bool(value)
    return nonzero > 0, f"{spec.shape_label()}: {checked} dual choices, {nonzero} nonzero"


@_check("resolvent")
def _resolvent(full: bool) -> tuple[bool, str]:
    sizes = [2, 3] if not full else [2, 3, 4, 6]
    checked = 0
    for n in sizes:
        k = grid_context(GridSpec("rect", n, n)).K
        for x in GridSpec("rect", n, n).vertices():
            r = resolvent(k, x, (1, 1))
            if not r.holds():
                return False, f"{n}x{n} at {x}: {r.identities()}"
            checked += 1
    return True, f"{checked} perturbations"


@_check("matrix-tree")
def _matrix_tree(full: bool) -> tuple[bool, str]:
    specs = [_rect(2, 2, ((1, 1), "W")), _chain(4, (1, "W")), _rect(3, 3, ((1, 1), "S"))]
    if full:
        specs.append(_rect(3, 4, ((1, 1), "S")))
    notes = []
    for spec in specs:
        trees, det_k = spanning_tree_check(spec)
        if trees != det_k:
            return False, f"{spec.shape_label()}: {trees} trees, det K {det_k}"
        notes.append(f"{spec.shape_label()}={trees}")
    return True, ", ".join(notes)


@_check("grove-determinant")
def _grove_determinant(full: bool) -> tuple[bool, str]:
    spec = _rect(2, 2, ((1, 1), "S"), ((2, 1), "E"), ((2, 2), "N"))
    g = build_slotted(spec)
    c = assemble_circular(g, nodes=g.boundary_cycle)
    brute = grove_partition_counts(c)
    wanted = 30 if full else 12
    checked = 0
    for blocks in noncrossing_partitions(c.nodes, max_block=2):
        pairs = [b for b in blocks if len(b) == 2]
        if not pairs:
            continue
        try:
            p = PartitionSpec.from_pairs(c.nodes, pairs)
        except NonBipartitePartitionError:
            continue
        value = int(grove_count_bipartite(c, p))
        expected = brute.get(frozenset(frozenset(b) for b in blocks), 0)
        if value != expected:
            return False, f"{pairs}: determinant {value}, enumeration {expected}"
        if not checked and enumerate_groves(c, ForestPattern.from_partition(p)) != expected:
            return False, f"{pairs}: grove listing disagrees with the partition pass"
        checked += 1
        if checked == wanted:
            break
    return checked == wanted, f"{checked} bipartite partitions"


@_check("wilson-uniform")
def _wilson_uniform(full: bool) -> tuple[bool, str]:
    spec = _rect(2, 2, ((1, 1), "W"))
    g = build_rooted(spec, "terminals-identified")
    universe = list(iter_spanning_trees(g))
    samples = 100_000 if full else 20_000
    rng = make_rng(7)
    test = uniformity_test([wilson_sample(g, rng).edges for _ in range(samples)], universe)
    stats = ti_length_stats(spec, samples // 4, seed=11)
    exact = float(exact_ti_length(2))
    within = abs(stats.mean - exact) <= 3 * stats.stderr
    column = grid_context(spec).K.column_of_inverse((1, 1))
    members = all(
        abs(stats.membership[x] - float(column[x])) <= 3 * stats.membership_stderr[x] + 1e-12
        for x in spec.vertices()
    )
    ok = test.pvalue > 1e-3 and within and members and len(universe) == grid_context(spec).det_k
    detail = (
        f"{len(universe)} trees, chi2 p={test.pvalue:.4f}, "
        f"E[l_T]={stats.mean:.4f}+-{stats.stderr:.4f} (exact {exact})"
    )
    return ok, detail


@_check("srw-hitting")
def _srw_hitting(full: bool) -> tuple[bool, str]:
    spec = _rect(
        4, 4, ((1, 1), "S"), ((4, 1), "E"), ((4, 4), "N"), ((1, 4), "W"), ((2, 4), "N")
    )
    walks = 200_000 if full else 20_000
    ctx = grid_context(spec)
    starts = [(1, 1), (2, 2), (3, 2), (2, 3), (4, 3)]
    inside = total = 0
    for i, x in enumerate(starts):
        est = srw_hitting_estimate(spec, x, walks, seed=100 + i)
        for t in spec.terminals:
            exact = float(ctx.K.column_of_inverse(t.vertex)[x])
            err = est.stderr[t.slot]
            inside += abs(est.frequencies[t.slot] - exact) <= 3 * err + 1e-12
            total += 1
    return inside >= 20, f"{inside}/{total} pairs within 3 sigma"


@_check("lerw-exit")
def _lerw_exit(full: bool) -> tuple[bool, str]:
    spec = _rect(2, 2, ((1, 1), "W"))
    g = build_rooted(spec, "terminals-identified")
    root, start = g.tagged("R"), g.primal((1, 1))
    walks = 40_000 if full else 4_000
    rng = make_rng(5)
    hits = 0
    for _ in range(walks):
        path = lerw(g, start, [root], rng)
        if path[-1] != root or len(set(path)) != len(path):
            return False, f"bad loop-erased path {path}"
        hits += path[-2] == start
    # two slots at the corner, each hit with probability K^-1(x, x)
    exact = 2 * float(inverse_entry(grid_context(spec).K, (1, 1), (1, 1)))
    freq = hits / walks
    err = math.sqrt(exact * (1 - exact) / walks)
    return abs(freq - exact) <= 4 * err, f"exit at the start corner {freq:.4f} vs {exact:.4f}"


@_check("chain-decay")
def _chain_decay(full: bool) -> tuple[bool, str]:
    result = chain_asymptotics(40)
    target = 1 / LAMBDA_PLUS
    worst = max(abs(result.ratios[j - 1] / target - 1) for j in range(5, 16))
    return worst < 0.01, f"max relative deviation {worst:.2e}, fitted rate {result.rate:.6f}"


@_check("ti-length")
def _ti_length(full: bool) -> tuple[bool, str]:
    sizes = range(1, 7) if not full else range(1, 11)
    for n in sizes:
        exact = float(exact_ti_length(n))
        if abs(expected_ti_length(n) - exact) > 1e-9:
            return False, f"n={n}: spectral {expected_ti_length(n)} vs exact {exact}"
    ctx = grid_context(GridSpec("rect", 4, 5))
    column = ctx.K.column_of_inverse((1, 1))
    for (x, y), v in column.items():
        if abs(spectral_entry(4, 5, x, y) - float(v)) > 1e-12:
            return False, f"K^-1(({x},{y}),(1,1)) mismatch on 4x5"
    if not full:
        return True, f"spectral sums match exact for n <= {max(sizes)}"
    slope = ti_length_slope(256)
    ok = abs(slope / (2 / math.pi) - 1) < 0.10
    return ok, f"slope at 256: {slope:.4f} (2/pi = {2 / math.pi:.4f})"


@_check("continuum")
def _continuum(full: bool) -> tuple[bool, str]:
    if not full:
        return True, "skipped in the small suite"
    limit = continuum_entry(1, 1, tol=1e-5, max_resolution=2048)
    finite = spectral_entry(256, 256, 1, 1)
    ok = abs(finite - limit.value) <= 0.01 * abs(limit.value)
    return ok, f"A(1,1)={limit.value:.6f}, 256x256 gives {finite:.6f}"


def _tails(rows) -> str:
    """Tail per size with the method that produced it."""
    return ", ".join(f"n={r.n} {r.tail:.6g} ({r.method})" for r in rows)


@_check("concentration")
def _concentration(full: bool) -> tuple[bool, str]:
    plane_rows = concentration_profile([8, 16, 32], 0.25, dim=2)
    line_rows = concentration_profile([8, 16, 32], 0.25, dim=1)
    plane = [r.tail for r in plane_rows]
    line = [r.tail for r in line_rows]
    decreasing = all(a > b for a, b in zip(plane, plane[1:]))
    geometric = all(a > b for a, b in zip(line, line[1:])) and line[2] * line[0] <= line[1] ** 2
    return decreasing and geometric, (
        f"2-D tails {_tails(plane_rows)}; 1-D tails {_tails(line_rows)}"
    )


@_check("distribution-sums")
def _distribution_sums(full: bool) -> tuple[bool, str]:
    spec = _rect(2, 2, ((1, 1), "W"))
    dist = impurity_distribution(spec)
    weights = [dist.weights[p] for p in sorted(dist.weights)]
    ok = (
        sum(dist.probabilities.values()) + dist.terminal_mass == 1
        and dist.det_k == 192
        and sorted(weights) == [8, 16, 16, 56]
    )
    return ok, f"weights {dist.weights}, det K {dist.det_k}"


def run_checks(suite: str = "small", only: Optional[Sequence[str]] = None) -> list[CheckResult]:
    """Run the checks of ``suite`` (optionally only the named ones).

    Raises
    ------
    ValueError
        On an unknown suite or check name.
    """
    if suite not in SUITES:
        raise ValueError(f"Unknown suite {suite!r}; expected one of {SUITES}")
    names = check_names()
    for name in only or ():
        if name not in names:
            raise ValueError(f"Unknown check {name!r}")
    results = []
    for name, fn in _REGISTRY:
        if only and name not in only:
            continue
        start = time.perf_counter()
        try:
            passed, detail = fn(suite == "full")
        except DimerlabError as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        result = CheckResult(name, bool(passed), detail, time.perf_counter() - start)
        level = logging.INFO if result.passed else logging.WARNING
        logger.log(level, "%s %s (%.2fs): %s", name, "ok" if passed else "FAILED", result.seconds, detail)
        results.append(result)
    return results
