from fractions import Fraction
from itertools import combinations, product

import pytest

from dimerlab.counts import grid_context
from dimerlab.groves import (
    CircularGraphError,
    CrossingPartitionError,
    NonBipartitePartitionError,
    PartitionError,
    PartitionSpec,
    assemble_circular,
    blocks_cross,
    check_noncrossing,
    grove_count_bipartite,
    noncrossing_partitions,
    perturbed_matrix,
    resolvent,
    response_matrix,
)
from dimerlab.lattice import Edge, PlaneGraph, Vertex, build_slotted
from dimerlab.models import GridSpec, Terminal
from dimerlab.oracle import ForestPattern, enumerate_groves, grove_partition_counts


@pytest.fixture
def star():
    """One interior vertex joined to three nodes a, b, c."""
    vertices = (
        Vertex(0, "boundary", (2, 0), "a"),
        Vertex(1, "primal", (2, 2)),
        Vertex(2, "boundary", (4, 2), "b"),
        Vertex(3, "boundary", (2, 4), "c"),
    )
    edges = (
        Edge(0, 0, 1, "slot-edge"),
        Edge(1, 1, 2, "slot-edge"),
        Edge(2, 1, 3, "slot-edge"),
    )
    g = PlaneGraph("star", vertices, edges, (0, 2, 3))
    return assemble_circular(g, nodes=[0, 2, 3])


@pytest.fixture
def slotted_square():
    spec = GridSpec.rectangle(
        2, 2, [Terminal((1, 1), "S"), Terminal((2, 1), "E"), Terminal((2, 2), "N")]
    )
    g = build_slotted(spec)
    return assemble_circular(g, nodes=g.boundary_cycle)


def test_blocks_cross():
    order = [1, 2, 3, 4, 5, 6]
    assert blocks_cross(order, {1, 3}, {2, 4})
    assert not blocks_cross(order, {1, 2}, {3, 4})
    assert not blocks_cross(order, {1, 6}, {2, 5})


def test_noncrossing_partitions_counts():
    assert sum(1 for _ in noncrossing_partitions("abcd")) == 14
    assert sum(1 for _ in noncrossing_partitions("abcde")) == 42
    assert sum(1 for _ in noncrossing_partitions("abcd", max_block=2)) == 9
    for blocks in noncrossing_partitions("abcdef", max_block=3):
        check_noncrossing("abcdef", blocks)


def test_partition_from_pairs_colours_contiguously():
    p = PartitionSpec.from_pairs("abcd", [("a", "d"), ("b", "c")])
    assert set(p.red) in ({"a", "b"}, {"c", "d"})
    assert dict(zip(p.red, p.blue)) in ({"a": "d", "b": "c"}, {"c": "b", "d": "a"})


def test_partition_errors():
    with pytest.raises(CrossingPartitionError):
        PartitionSpec.from_pairs("abcd", [("a", "c"), ("b", "d")])
    with pytest.raises(NonBipartitePartitionError):
        PartitionSpec.from_pairs("abcdef", [("a", "b"), ("c", "d"), ("e", "f")])
    with pytest.raises(PartitionError, match="Unknown"):
        PartitionSpec.from_pairs("abc", [("a", "z")])
    with pytest.raises(PartitionError, match="two pairs"):
        PartitionSpec.from_pairs("abcd", [("a", "b"), ("b", "c")])


def test_star_response_matrix(star):
    assert star.nodes == ["a", "b", "c"]
    assert star.interior == [(1, 1)]
    L = response_matrix(star)
    assert L["a", "a"] == Fraction(-2, 3)
    assert L["a", "b"] == Fraction(1, 3)
    assert all(sum(L.row(r)) == 0 for r in star.nodes)


def test_star_grove_count(star):
    p = PartitionSpec.from_pairs(star.nodes, [("a", "b")])
    assert grove_count_bipartite(star, p) == 1
    assert grove_count_bipartite(star, PartitionSpec.from_pairs(star.nodes, [])) == 3


def test_grove_determinant_matches_enumeration(slotted_square):
    c = slotted_square
    assert len(c.nodes) + len(c.interior) == 12
    pairs = [("T1", "1,1:W"), ("2,1:S", "T2")]
    p = PartitionSpec.from_pairs(c.nodes, pairs)
    expected = enumerate_groves(c, ForestPattern.from_partition(p))
    assert grove_count_bipartite(c, p) == expected


def test_assemble_merges_classes(slotted_square):
    spec = GridSpec.rectangle(
        2, 2, [Terminal((1, 1), "S"), Terminal((2, 1), "E"), Terminal((2, 2), "N")]
    )
    g = build_slotted(spec)
    arc = [g.tagged("1,2:W"), g.tagged("1,1:W")]
    nodes = [v for v in g.boundary_cycle if v != arc[1]]
    c = assemble_circular(g, identify=[arc], nodes=nodes, names={arc[0]: "C1"})
    assert "C1" in c.nodes
    assert len(c.nodes) == len(slotted_square.nodes) - 1
    assert response_matrix(c).is_symmetric()


def test_assemble_errors(slotted_square):
    spec = GridSpec.rectangle(
        2, 2, [Terminal((1, 1), "S"), Terminal((2, 1), "E"), Terminal((2, 2), "N")]
    )
    g = build_slotted(spec)
    cycle = list(g.boundary_cycle)
    with pytest.raises(CircularGraphError, match="at least one node"):
        assemble_circular(g)
    with pytest.raises(CircularGraphError, match="boundary order"):
        assemble_circular(g, nodes=[cycle[0], cycle[2], cycle[1]])
    with pytest.raises(CircularGraphError, match="listed twice"):
        assemble_circular(g, nodes=[cycle[0], cycle[0]])
    with pytest.raises(CircularGraphError, match="interleave"):
        assemble_circular(
            g, identify=[[cycle[0], cycle[2]], [cycle[1], cycle[3]]], nodes=cycle
        )


def test_perturbed_matrix(square2):
    k = grid_context(square2).K
    kx = perturbed_matrix(k, (2, 2))
    assert kx[(2, 2), (2, 2)] == 5
    assert k[(2, 2), (2, 2)] == 4
    with pytest.raises(CircularGraphError):
        perturbed_matrix(k, (9, 9))


@pytest.mark.parametrize("n", [2, 3])
def test_resolvent_identities(n):
    spec = GridSpec.rectangle(n, n, [Terminal((1, 1), "W")])
    k = grid_context(spec).K
    for x in spec.vertices():
        r = resolvent(k, x, (1, 1))
        assert r.holds(), r.identities()


def test_resolvent_values_on_square(square2):
    r = resolvent(grid_context(square2).K, (1, 1), (1, 1))
    assert r.inv_xx == Fraction(7, 24)
    assert r.perturbed_xx == Fraction(7, 31)
    assert r.det_perturbed == 192 + 56


def test_split_node_on_star(star):
    p = PartitionSpec.with_split(star.nodes, [("a", "b")], ["c"])
    assert p.red[-1] == p.blue[-1] == "c"
    # c can only hang off the a-b tree
    assert grove_count_bipartite(star, p) == 1
    with pytest.raises(PartitionError, match="also paired"):
        PartitionSpec.with_split(star.nodes, [("a", "b")], ["a"])
    with pytest.raises(PartitionError, match="Unknown"):
        PartitionSpec.with_split(star.nodes, [("a", "b")], ["z"])


def test_split_nodes_match_partition_enumeration(slotted_square):
    c = slotted_square
    brute = grove_partition_counts(c)
    response = response_matrix(c)
    checked = 0
    for blocks in noncrossing_partitions(c.nodes, max_block=2):
        pairs = [b for b in blocks if len(b) == 2]
        lone = [b[0] for b in blocks if len(b) == 1]
        if not pairs:
            continue
        try:
            PartitionSpec.from_pairs(c.nodes, pairs)
        except NonBipartitePartitionError:
            continue
        for size in (1, 2):
            for split in combinations(lone, size):
                rest = [set(b) for b in blocks if not (len(b) == 1 and b[0] in split)]
                expected = 0
                for choice in product(range(len(rest)), repeat=size):
                    merged = [set(b) for b in rest]
                    for node, i in zip(split, choice):
                        merged[i].add(node)
                    expected += brute.get(frozenset(frozenset(b) for b in merged), 0)
                p = PartitionSpec.with_split(c.nodes, pairs, split)
                assert grove_count_bipartite(c, p, response) == expected, (pairs, split)
                checked += 1
    assert checked > 100
