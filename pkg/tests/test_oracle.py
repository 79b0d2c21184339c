import pytest

from dimerlab.counts import Normalization, boundary_circular, count_two_boundary
from dimerlab.groves import PartitionSpec, assemble_circular, grove_count_bipartite
from dimerlab.lattice import Edge, PlaneGraph, Vertex, build_g1, build_slotted, build_superposition
from dimerlab.oracle import (
    DisconnectedGraphError,
    ForestPattern,
    OracleLimitError,
    count_matchings_by_impurity,
    count_matchings_with_impurities,
    enumerate_constrained_forests,
    enumerate_groves,
    enumerate_matchings,
    enumerate_spanning_trees,
    grove_partition_counts,
    impurity_edge,
    iter_spanning_trees,
    resolve_normalization,
    spanning_tree_check,
)


def test_enumeration_agrees_with_sweep(chain2):
    g = build_superposition(chain2)
    matchings = list(enumerate_matchings(g))
    assert len(matchings) == 4 * (4 + 1) + 2 * 15
    assert len(matchings) == count_matchings_with_impurities(g, allow_diagonals=True)
    assert all(len(m.impurities) == 1 for m in matchings)
    assert matchings == list(enumerate_matchings(g))


def test_impurity_table_on_square(square2):
    table = count_matchings_by_impurity(build_superposition(square2))
    assert table.by_primal[((1, 1),)] == 4 * 56
    assert table.by_primal[((2, 2),)] == 4 * 8
    assert table.by_primal[("T1",)] == 2 * 192
    assert table.total == 768
    assert sum(table.by_edge.values()) == table.total


def test_normalization_resolves_per_dual(square2):
    check = resolve_normalization(square2)
    assert check.total == 768
    assert check.resolved is Normalization.PER_DUAL
    assert check.summed == 96 + 2 * 192


def test_impurity_edge(square2):
    g = build_superposition(square2)
    eid = impurity_edge(g, (1, 1), (3, 3))
    assert g.edges[eid].kind == "diagonal-impurity"
    assert count_matchings_with_impurities(g, [eid]) == 56
    with pytest.raises(KeyError):
        impurity_edge(g, (1, 1), (5, 5))


def test_matching_count_rejects_bad_edges(square2):
    g = build_superposition(square2)
    plain = next(e.id for e in g.edges if e.kind != "diagonal-impurity")
    with pytest.raises(ValueError, match="not an impurity edge"):
        count_matchings_with_impurities(g, [plain])
    first = impurity_edge(g, (1, 1), (3, 3))
    second = impurity_edge(g, (2, 2), (3, 3))
    with pytest.raises(ValueError, match="vertex-disjoint"):
        count_matchings_with_impurities(g, [first, second])


def test_oracle_limits(square2):
    g = build_superposition(square2)
    with pytest.raises(OracleLimitError):
        list(enumerate_matchings(g, limit=4))
    with pytest.raises(OracleLimitError):
        count_matchings_with_impurities(g, limit=4)
    with pytest.raises(OracleLimitError):
        list(iter_spanning_trees(g, edge_limit=3))


def test_spanning_trees(square2):
    assert spanning_tree_check(square2) == (192, 192)
    g1 = build_g1(square2)
    assert enumerate_spanning_trees(g1) == 4
    assert sum(1 for _ in iter_spanning_trees(g1)) == 4


def test_disconnected_graph():
    vertices = (Vertex(0, "primal", (2, 2)), Vertex(1, "primal", (6, 2)))
    g = PlaneGraph("split", vertices, ())
    with pytest.raises(DisconnectedGraphError):
        enumerate_spanning_trees(g)
    joined = PlaneGraph("pair", vertices, (Edge(0, 0, 1, "primal-edge", 3),))
    assert enumerate_spanning_trees(joined) == 3


def test_forest_sweep_matches_grove_determinant(rect23_pair):
    c, pairs = boundary_circular(rect23_pair, [(1, 3), (1, 1)])
    swept = enumerate_constrained_forests(c, ForestPattern.from_pairs(c.nodes, pairs))
    assert swept == count_two_boundary(rect23_pair, (1, 3), (1, 1), "grove").value
    assert swept == grove_count_bipartite(c, PartitionSpec.from_pairs(c.nodes, pairs))


def test_grove_partition_counts_cover_every_grove(square2):
    g = build_slotted(square2)
    c = assemble_circular(g, nodes=g.boundary_cycle)
    counts = grove_partition_counts(c)
    for partition, count in counts.items():
        pattern = ForestPattern(tuple(tuple(sorted(b)) for b in partition))
        assert enumerate_groves(c, pattern) == count
        assert enumerate_constrained_forests(c, pattern) == count


def test_forest_pattern_checks():
    with pytest.raises(ValueError, match="overlap"):
        ForestPattern((("a", "b"), ("b",))).check(["a", "b"])
    with pytest.raises(ValueError, match="cover"):
        ForestPattern((("a",),)).check(["a", "b"])
    pattern = ForestPattern.from_pairs(["a", "b", "c"], [("a", "c")])
    assert pattern.blocks == (("a", "c"), ("b",))
