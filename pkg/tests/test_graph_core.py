import random
from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from conftest import load_fixture
from foliagraph.generators import (
    enumerate_configurations,
    random_configuration,
    random_connected_configuration,
    random_tree_configuration,
)
from foliagraph.graph_core import (
    OPEN_END,
    CycleError,
    EndpointPresent,
    EulerianCertificate,
    ExhaustionLimit,
    GraphicalConfiguration,
    Multigraph,
    OddMicroCycle,
    OrientedMonochromeCycle,
    ParityContradiction,
    SchemaError,
    assign_levels,
    betti1,
    betti_defect,
    brute_force_bipartite,
    brute_force_global,
    build_main_graph,
    is_bipartite,
    is_locally_eulerian,
    macrograph,
    make_config,
    micrograph,
    micrographs_connected,
    obstruction_from_dict,
    parse_configuration,
    solve_global,
    to_dot,
    validate,
    verdict,
    verify_certificate,
    verify_obstruction,
)

seeds = st.integers(0, 2 ** 32 - 1)


def path_config():
    return make_config(["s"], {"L0": [OPEN_END, "s"], "L+": ["s", OPEN_END], "L-": ["s", OPEN_END]},
                       {"s": {"s_up": ["L0", "L+"], "s_down": ["L0", "L-"]}})


# ---------------------------------------------------------------------------
# validate


def test_branch2_fixture_is_valid():
    assert validate(load_fixture("branch2")) == []


def test_equal_micro_ends_reported():
    c = make_config(["s"], {"L1": ["s", OPEN_END]}, {"s": {"m": ["L1", "L1"]}})
    assert any("micro-edge ends equal" in p for p in validate(c))


def test_non_incident_micro_vertex_reported():
    c = make_config(["s", "t"], {"L1": ["s", OPEN_END], "L2": ["t", OPEN_END]}, {"s": {"m": ["L1", "L2"]}})
    problems = validate(c)
    assert any("non-incident micro-vertex" in p and "L2" in p for p in problems)


def test_loop_and_endpoint_micrograph_reported():
    c = make_config(["s"], {"L1": ["s", "s"]})
    assert any("loop" in p for p in validate(c))
    c = make_config(["e", "s"], {"L1": ["e", "s"], "L2": ["e", OPEN_END]}, {"e": {"m": ["L1", "L2"]}},
                    endpoints=["e"])
    assert any("endpoint" in p for p in validate(c))


def test_schema_errors_carry_json_pointer():
    with pytest.raises(SchemaError) as err:
        parse_configuration({"vertices": [{"id": "a"}], "edges": [{"id": "L", "ends": ["a", "b"]}]})
    assert err.value.path == "/edges/0/ends/1"
    with pytest.raises(SchemaError) as err:
        parse_configuration({"vertices": []})
    assert err.value.path == "/"


def test_json_round_trip():
    c = load_fixture("slit_pair")
    assert GraphicalConfiguration.from_json(c.to_json()) == c


# ---------------------------------------------------------------------------
# bipartiteness and local eulerianity


def test_path_micrograph_canonical_signs():
    assert is_bipartite(path_config(), "s") == {"L0": "-", "L+": "+", "L-": "+"}


def test_triangle_micrograph_odd_cycle():
    c = load_fixture("triangle")
    res = is_bipartite(c, "s")
    assert isinstance(res, OddMicroCycle) and len(res.cycle) == 3
    assert verify_obstruction(c, res)


def test_hexagon_micrograph_bipartite():
    res = is_bipartite(load_fixture("hexagon"), "s")
    assert isinstance(res, dict)
    assert [res[f"L{i}"] for i in range(1, 7)] == ["+", "-", "+", "-", "+", "-"]


def test_two_cycle_in_micrograph_is_even():
    c = make_config(["s"], {"L1": ["s", OPEN_END], "L2": [OPEN_END, "s"]},
                    {"s": {"a": ["L1", "L2"], "b": ["L2", "L1"]}})
    assert isinstance(is_bipartite(c, "s"), dict)


def test_local_eulerian_examples():
    assert is_locally_eulerian(load_fixture("branch2")) is None
    assert isinstance(is_locally_eulerian(load_fixture("triangle")), OddMicroCycle)
    assert isinstance(is_locally_eulerian(load_fixture("endpoint")), EndpointPresent)


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_is_bipartite_matches_exhaustive_colouring(seed):
    rng = random.Random(seed)
    c = random_configuration(rng, max_vertices=3, max_edges=12, max_micro=8)
    for v in c.vertex_ids:
        if len(c.incident(v)) <= 12:
            assert isinstance(is_bipartite(c, v), dict) == brute_force_bipartite(c, v)


# ---------------------------------------------------------------------------
# global decision


def test_branch2_certificate():
    c = load_fixture("branch2")
    cert = solve_global(c)
    assert isinstance(cert, EulerianCertificate)
    assert cert.orientation["L0"] == (OPEN_END, "v0") or cert.orientation["L0"] == ("v0", OPEN_END)
    into = cert.orientation["L0"][1] == "v0"
    for e in ("L1", "L2"):
        assert (cert.orientation[e][0] == "v0") == into
    assert cert.levels == {"v0": 0} and cert.epsilons == {"v0": Fraction(1, 4)}
    assert verify_certificate(c, cert) == []


def test_parallel_edges_monochrome_cycle():
    c = load_fixture("monochrome")
    assert is_locally_eulerian(c) is None
    res = solve_global(c)
    assert isinstance(res, OrientedMonochromeCycle)
    assert verify_obstruction(c, res)
    assert isinstance(brute_force_global(c), OrientedMonochromeCycle)
    assert verdict(c) == "locally-eulerian-only"


def test_single_vertex_vacuous():
    cert = solve_global(make_config(["s"], {}))
    assert isinstance(cert, EulerianCertificate)
    assert cert.orientation == {} and cert.levels == {"s": 0}


def test_brute_force_examples():
    assert isinstance(brute_force_global(load_fixture("branch2")), EulerianCertificate)
    assert not isinstance(brute_force_global(load_fixture("triangle")), EulerianCertificate)


def test_parity_contradiction_across_vertices():
    # two vertices joined by two edges with a micro-edge at one end only,
    # plus a third edge whose micro-edges force the opposite parity
    c = make_config(["a", "b"], {"L1": ["a", "b"], "L2": ["a", "b"], "L3": ["a", "b"]},
                    {"a": {"m1": ["L1", "L2"], "m2": ["L2", "L3"]}, "b": {"n1": ["L1", "L3"]}})
    res = solve_global(c)
    assert isinstance(res, ParityContradiction)
    assert verify_obstruction(c, res)
    assert not isinstance(brute_force_global(c), EulerianCertificate)


def test_exhaustion_limit():
    # 21 independent 2-cycles between consecutive vertex pairs
    edges, micro = {}, {}
    for i in range(21):
        a, b = f"a{i}", f"b{i}"
        edges[f"L{i}x"] = [a, b]
        edges[f"L{i}y"] = [a, b]
    c = make_config(sorted({v for e in edges.values() for v in e}), edges, micro)
    with pytest.raises(ExhaustionLimit):
        solve_global(c)


def test_assign_levels_path_and_cycle():
    c = make_config(["a", "b", "c"], {"L1": ["a", "b"], "L2": ["b", "c"]})
    levels, eps = assign_levels(c, {"L1": ("a", "b"), "L2": ("b", "c")})
    assert [levels[v] for v in "abc"] == [0, 1, 2]
    assert all(e == Fraction(1, 4) for e in eps.values())
    c = make_config(["a", "b"], {"L1": ["a", "b"], "L2": ["a", "b"]})
    with pytest.raises(CycleError):
        assign_levels(c, {"L1": ("a", "b"), "L2": ("b", "a")})


def test_main_graph_counts():
    mu = build_main_graph(load_fixture("branch2"))
    assert len(mu.nodes) == 6 and len(mu.edges) == 5 and betti1(mu) == 0
    mu = build_main_graph(load_fixture("monochrome"))
    assert len(mu.nodes) == 4 and betti1(mu) == 1
    mu = build_main_graph(make_config([], {}))
    assert mu.nodes == () and mu.edges == ()


def test_betti_examples():
    tree = Multigraph((1, 2, 3, 4, 5), (("a", 1, 2), ("b", 2, 3), ("c", 2, 4), ("d", 4, 5)))
    tri = Multigraph((1, 2, 3), (("a", 1, 2), ("b", 2, 3), ("c", 3, 1)))
    two = Multigraph((1, 2, 3, 4, 5, 6), (("a", 1, 2), ("b", 2, 3), ("c", 3, 1),
                                         ("d", 4, 5), ("e", 5, 6), ("f", 6, 4)))
    assert (betti1(tree), betti1(tri), betti1(two)) == (0, 1, 2)


def test_obstruction_serialization_round_trip():
    for name in ("triangle", "endpoint", "monochrome"):
        c = load_fixture(name)
        res = solve_global(c)
        again = obstruction_from_dict(res.to_dict())
        assert again.to_dict() == res.to_dict()
        assert verify_obstruction(c, again)


def test_dot_export_mentions_every_edge():
    c = load_fixture("slit_pair")
    dot = to_dot(c, solve_global(c))
    assert dot.startswith("graph configuration {")
    for e in c.edge_ids:
        assert e in dot


def test_solve_global_is_deterministic():
    c = load_fixture("slit_pair")
    assert solve_global(c).to_dict() == solve_global(c).to_dict()


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_solve_global_agrees_with_brute_force(seed):
    c = random_configuration(random.Random(seed), max_vertices=4, max_edges=8, max_micro=3)
    fast, slow = solve_global(c), brute_force_global(c)
    assert isinstance(fast, EulerianCertificate) == isinstance(slow, EulerianCertificate)
    if isinstance(fast, EulerianCertificate):
        assert verify_certificate(c, fast) == []
        assert is_locally_eulerian(c) is None
    else:
        assert verify_obstruction(c, fast)


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_tree_configurations_are_globally_eulerian(seed):
    c = random_tree_configuration(random.Random(seed))
    assert betti1(macrograph(c)) == 0
    assert all(betti1(micrograph(c, v)) == 0 for v in c.vertex_ids)
    assert isinstance(solve_global(c), EulerianCertificate)


def _nx_betti(graph: Multigraph) -> int:
    g = nx.MultiGraph()
    g.add_nodes_from(graph.nodes)
    g.add_edges_from((u, v) for _, u, v in graph.edges)
    return g.number_of_edges() - g.number_of_nodes() + nx.number_connected_components(g)


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_betti_identity_on_connected_micrographs(seed):
    c = random_connected_configuration(random.Random(seed))
    assert micrographs_connected(c)
    mu = build_main_graph(c)
    assert _nx_betti(mu) == betti1(mu)
    assert betti1(mu) == betti1(macrograph(c)) + sum(betti1(micrograph(c, v)) for v in c.vertex_ids)
    assert betti_defect(c) == 0


def test_betti_defect_counts_disconnected_micrographs():
    # two micro-components at s: the main graph loses one cycle relative to the sum
    c = make_config(["s", "t"], {"A": ["s", "t"], "B": ["s", "t"], "C": ["s", OPEN_END]},
                    {"t": {"m": ["A", "B"]}})
    assert not micrographs_connected(c)
    assert betti_defect(c) == -1


def test_exhaustive_small_configurations_agree():
    count = 0
    for c in enumerate_configurations(max_vertices=2, max_edges=3, max_micro=1):
        assert isinstance(solve_global(c), EulerianCertificate) == \
            isinstance(brute_force_global(c), EulerianCertificate)
        count += 1
    assert count > 50


def test_obstructions_reported_in_sorted_vertex_order():
    # odd cycle at a sorts before the endpoint at b
    c = make_config(["a", "b"], {"A": ["a", OPEN_END], "B": [OPEN_END, "a"], "C": ["a", OPEN_END],
                                 "D": ["b", OPEN_END]},
                    {"a": {"x": ["A", "B"], "y": ["B", "C"], "z": ["C", "A"]}}, endpoints=["b"])
    for result in (solve_global(c), brute_force_global(c)):
        assert isinstance(result, OddMicroCycle) and result.vertex == "a"
