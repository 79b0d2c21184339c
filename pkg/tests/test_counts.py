from fractions import Fraction
from itertools import combinations, permutations, product

import pytest

from dimerlab.asymptotics import chain_spec, recurrence_weights
from dimerlab.counts import (
    ROUTES,
    ConfigurationError,
    Normalization,
    boundary_circular,
    count_chain,
    count_configuration,
    count_k_boundary,
    count_one_impurity,
    count_two_boundary,
    count_two_near_boundary,
    hitting_column,
    hitting_matrix_count,
    impurity_distribution,
    near_boundary_partner,
)
from dimerlab.models import DimerlabError, GridSpec, GridSpecError, ImpurityConfig, Terminal
from dimerlab.oracle import count_configuration_matchings
from dimerlab.verify import (
    anchored_forests,
    chain_pair_instance,
    chain_triple_instance,
    three_boundary_instance,
)


@pytest.mark.parametrize("route", ROUTES)
def test_single_impurity_on_square(square2, route):
    values = [count_one_impurity(square2, x, route).value for x in square2.vertices()]
    assert values == [56, 16, 16, 8]


def test_single_impurity_on_chain(chain2):
    assert count_one_impurity(chain2, (2, 1)).value == 1
    assert count_one_impurity(chain2, (1, 1)).value == 4


def test_single_impurity_errors(square2, rect23_pair):
    with pytest.raises(ConfigurationError, match="Unknown route"):
        count_one_impurity(square2, (1, 1), "walk")
    with pytest.raises(GridSpecError):
        count_one_impurity(square2, (3, 1))
    with pytest.raises(ConfigurationError, match="k=1"):
        count_one_impurity(rect23_pair, (1, 1))


def test_hitting_column_is_inverse_column(square2):
    h = hitting_column(square2, (1, 1))
    assert h[(1, 1)] == Fraction(7, 24)
    assert h[(2, 2)] == Fraction(1, 24)
    with pytest.raises(GridSpecError):
        hitting_column(square2, (0, 1))


def test_two_boundary_routes_agree(rect23_pair):
    values = {r: count_two_boundary(rect23_pair, (1, 3), (1, 1), r).value for r in ROUTES}
    assert len(set(values.values())) == 1
    assert values["cofactor"] > 0
    assert hitting_matrix_count(rect23_pair, (1, 3), (1, 1)).value == values["cofactor"]


def test_two_boundary_matches_matchings(rect23_pair):
    config = ImpurityConfig(((1, 3), (1, 1)), ((1, 5), (1, 3)))
    counted = count_configuration(rect23_pair, config).value
    assert counted == count_configuration_matchings(rect23_pair, config)


def test_adjacent_or_repeated_impurities_give_zero(rect23_pair):
    assert count_two_boundary(rect23_pair, (1, 3), (1, 2)).value == 0
    assert count_two_boundary(rect23_pair, (1, 2), (1, 2)).value == 0


def test_boundary_count_errors(rect23_pair, square2):
    with pytest.raises(ConfigurationError):
        count_k_boundary(rect23_pair, [(1, 3)])
    with pytest.raises(ConfigurationError, match="k=2"):
        count_two_boundary(square2, (1, 1), (2, 2))
    big = GridSpec.rectangle(
        3, 3, [Terminal((3, 1), "E"), Terminal((3, 2), "E"), Terminal((3, 3), "E")]
    )
    with pytest.raises(GridSpecError, match="not on the boundary"):
        count_two_boundary(big, (2, 2), (1, 1))


def test_boundary_circular_pairs_arcs_with_terminals(rect23_pair):
    c, pairs = boundary_circular(rect23_pair, [(1, 3), (1, 1)])
    assert "C1" in c.nodes
    assert len(pairs) == 3
    assert {x for p in pairs for x in p} >= {"T1", "T2", "T3", "C1"}
    with pytest.raises(ConfigurationError, match="empty"):
        boundary_circular(rect23_pair, [(1, 3), (1, 2)])


def test_near_boundary_partner(rect34_near):
    assert near_boundary_partner(rect34_near, (1, 2), (3, 5)) == (1, 3)
    with pytest.raises(ConfigurationError, match="not a corner"):
        near_boundary_partner(rect34_near, (1, 2), (7, 7))
    with pytest.raises(ConfigurationError, match="boundary dual"):
        near_boundary_partner(rect34_near, (1, 2), (1, 3))
    with pytest.raises(ConfigurationError, match="c-undefined"):
        near_boundary_partner(rect34_near, (1, 1), (3, 3))


def test_near_boundary_parts_add_up(rect34_near):
    result = count_two_near_boundary(rect34_near, (1, 2), (1, 4), (3, 5))
    assert result.parts["A"] + result.parts["B"] == result.value
    hit = count_two_near_boundary(rect34_near, (1, 2), (1, 4), (3, 5), route="hitting")
    assert hit.value == result.value
    with pytest.raises(ConfigurationError, match="grove"):
        count_two_near_boundary(rect34_near, (1, 2), (1, 4), (3, 5), route="grove")


def test_near_boundary_matches_matchings(rect34_near):
    config = ImpurityConfig(((1, 2), (1, 4)), ((3, 5), (1, 7)))
    assert count_configuration(rect34_near, config).value == count_configuration_matchings(
        rect34_near, config
    )


def test_near_boundary_c_equal_to_b(rect34_near):
    with pytest.raises(ConfigurationError, match="c-undefined"):
        count_two_near_boundary(rect34_near, (1, 2), (1, 3), (3, 5))


def test_dispatcher_rejects_unsupported_configurations(rect34_near):
    interior = ImpurityConfig(((2, 2), (1, 4)), ((3, 3), (1, 7)))
    with pytest.raises(ConfigurationError, match="interior"):
        count_configuration(rect34_near, interior)
    with pytest.raises(ConfigurationError, match="impurities were given"):
        count_configuration(rect34_near, ImpurityConfig(((1, 1),)))
    both_near = ImpurityConfig(((1, 2), (1, 3)), ((3, 5), (3, 5)))
    with pytest.raises(ConfigurationError):
        count_configuration(rect34_near, both_near)


def test_chain_pair_against_matchings():
    spec, a, b = chain_pair_instance(5)
    da, db = spec.corner_duals(a)[0], spec.corner_duals(b)[0]
    config = ImpurityConfig((a, b), (da, db))
    result = count_chain(spec, config)
    assert sum(result.parts.values()) == result.value
    assert result.value == count_configuration_matchings(spec, config)


def test_chain_errors(rect23_pair):
    spec, a, b = chain_pair_instance(5)
    with pytest.raises(ConfigurationError, match="dual endpoint"):
        count_chain(spec, ImpurityConfig((a, b)))
    with pytest.raises(ConfigurationError, match="chain grid"):
        count_chain(rect23_pair, ImpurityConfig(((1, 3), (1, 1))))
    long = GridSpec.chain(
        9,
        [
            Terminal((1, 1), "W"),
            Terminal((3, 1), "N"),
            Terminal((5, 1), "N"),
            Terminal((7, 1), "N"),
            Terminal((9, 1), "E"),
        ],
    )
    with pytest.raises(ConfigurationError, match="dual endpoint"):
        count_chain(long, ImpurityConfig(((2, 1), (4, 1), (6, 1))))
    duals = ((3, 1), (7, 1), (11, 1))
    with pytest.raises(ConfigurationError, match="k=2 only"):
        count_chain(long, ImpurityConfig(((2, 1), (4, 1), (6, 1)), duals), "grove")
    pair = ImpurityConfig((a, b), (spec.corner_duals(a)[0], spec.corner_duals(b)[0]))
    with pytest.raises(ConfigurationError, match="Unknown chain route"):
        count_chain(spec, pair, "cofactor")


def test_distribution_per_dual(square2):
    dist = impurity_distribution(square2)
    assert dist.normalization is Normalization.PER_DUAL
    assert dist.total == 4 * 96 + 2 * 192
    assert dist.probabilities[(1, 1)] == Fraction(7, 24)
    assert dist.terminal_mass == Fraction(1, 2)
    assert sum(dist.probabilities.values()) + dist.terminal_mass == 1
    assert dist.argmax() == (1, 1)
    assert dist.edge_probability((1, 1)) == Fraction(56, 768)


def test_distribution_summed(square2):
    dist = impurity_distribution(square2, "summed")
    assert dist.total == 96 + 2 * 192
    assert sum(dist.probabilities.values()) + dist.terminal_mass == 1


def _boundary_dual_configurations(spec):
    edge = [p for p in spec.vertices() if spec.on_boundary(p)]
    for a, b in permutations(edge, 2):
        for da in spec.corner_duals(a):
            for db in spec.corner_duals(b):
                if spec.is_boundary_dual(da) and spec.is_boundary_dual(db):
                    yield ImpurityConfig((a, b), (da, db))


def _sweep_against_matchings(spec) -> int:
    agreed = 0
    for config in _boundary_dual_configurations(spec):
        try:
            value = count_configuration(spec, config).value
        except DimerlabError:
            continue
        assert value == count_configuration_matchings(spec, config, limit=128), config
        agreed += 1
    return agreed


def test_boundary_pairs_agree_with_matchings_on_3x3():
    spec = GridSpec.rectangle(
        3, 3, [Terminal((3, 1), "E"), Terminal((3, 2), "E"), Terminal((3, 3), "E")]
    )
    # every ordered pair of the five non-terminal boundary vertices, all boundary duals
    assert _sweep_against_matchings(spec) == 114


@pytest.mark.slow
def test_boundary_pairs_agree_with_matchings_on_3x4(rect34_near):
    assert _sweep_against_matchings(rect34_near) > 0


def test_impurity_on_terminal_vertex_is_rejected(rect34_near, rect36_near):
    spec = GridSpec.rectangle(
        3, 3, [Terminal((3, 1), "E"), Terminal((3, 2), "E"), Terminal((3, 3), "E")]
    )
    config = ImpurityConfig(((1, 1), (3, 1)), ((1, 1), (7, 3)))
    with pytest.raises(ConfigurationError, match="terminal vertex"):
        count_configuration(spec, config)
    with pytest.raises(ConfigurationError, match="terminal vertex"):
        count_two_boundary(rect34_near, (1, 1), (3, 1))
    near = ImpurityConfig(((1, 2), (3, 4)), ((3, 5), (7, 7)))
    with pytest.raises(ConfigurationError, match="terminal vertex"):
        count_configuration(rect36_near, near)


def test_boundary_count_is_symmetric(rect45_pair):
    edge = [p for p in rect45_pair.vertices() if rect45_pair.on_boundary(p)]
    nonzero = 0
    for a, b in combinations(edge, 2):
        try:
            forward = count_two_boundary(rect45_pair, a, b).value
        except DimerlabError:
            with pytest.raises(DimerlabError):
                count_two_boundary(rect45_pair, b, a)
            continue
        assert count_two_boundary(rect45_pair, b, a).value == forward
        nonzero += bool(forward)
    assert nonzero > 0


@pytest.mark.slow
def test_three_boundary_impurities():
    spec, config = three_boundary_instance()
    values = {r: count_k_boundary(spec, config.primals, r).value for r in ROUTES}
    assert len(set(values.values())) == 1
    assert values["cofactor"] > 0
    assert count_configuration(spec, config).value == values["cofactor"]
    assert values["cofactor"] == count_configuration_matchings(spec, config, limit=128)


def test_near_boundary_on_long_west_arc(rect36_near):
    config = ImpurityConfig(((1, 3), (1, 1)), ((3, 5), (1, 1)))
    assert near_boundary_partner(rect36_near, (1, 3), (3, 5)) == (1, 2)
    result = count_configuration(rect36_near, config)
    assert result.parts["A"] > 0
    assert result.parts["A"] == anchored_forests(rect36_near, "near-boundary")
    assert result.value == count_configuration_matchings(rect36_near, config, limit=128)


def test_chain_routes_agree_on_seven(chain7_pair):
    a, b = (2, 1), (6, 1)
    nonzero = 0
    for da in chain7_pair.corner_duals(a):
        for db in chain7_pair.corner_duals(b):
            config = ImpurityConfig((a, b), (da, db))
            grove = count_chain(chain7_pair, config)
            swept = count_chain(chain7_pair, config, "transfer")
            assert (grove.route, swept.route) == ("grove", "transfer")
            assert grove.value == swept.value == count_configuration_matchings(chain7_pair, config)
            nonzero += bool(grove.value)
    assert nonzero > 0


def test_chain_with_three_impurities():
    spec, points = chain_triple_instance()
    nonzero = 0
    for duals in product(*(spec.corner_duals(p) for p in points)):
        config = ImpurityConfig(points, duals)
        result = count_configuration(spec, config, "hitting")
        assert result.route == "transfer"
        assert result.value == count_configuration_matchings(spec, config)
        nonzero += bool(result.value)
    assert nonzero > 0


def test_chain_transfer_gives_zero_for_a_shared_dual():
    spec, _ = chain_triple_instance()
    config = ImpurityConfig(((2, 1), (3, 1), (8, 1)), ((5, 1), (5, 1), (15, 1)))
    assert count_chain(spec, config).value == 0


@pytest.mark.slow
@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("m", [2, 3, 4, 5, 6])
def test_argmax_is_the_terminal_vertex(n, m):
    for terminal in (Terminal((1, 1), "W"), Terminal((n, m // 2 + 1), "E")):
        spec = GridSpec.rectangle(n, m, [terminal])
        assert impurity_distribution(spec).argmax() == terminal.vertex


def test_chain_weights_decrease_away_from_the_terminal():
    for n in range(2, 41):
        weights = recurrence_weights(n)
        assert all(a > b for a, b in zip(weights, weights[1:])), n
    spec = chain_spec(9)
    assert [count_one_impurity(spec, (j, 1)).value for j in range(1, 10)] == recurrence_weights(9)
