import itertools
import math
import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boostersim.errors import ModelError
from boostersim.topology import (
    COMPUTE,
    GLOBAL_LINK,
    LEAF,
    SPINE,
    Path,
    TopologySpec,
    bisection_bandwidth,
    build_dragonfly_plus,
    edge_list_csv,
    exhaustive_bisection_bandwidth,
    path_latency,
    route,
    to_dot,
)


def to_nx(graph):
    g = nx.MultiGraph()
    g.add_nodes_from(v.id for v in graph.vertices)
    for e in graph.edges:
        g.add_edge(e.src, e.dst, bandwidth=e.bandwidth)
    return g


def nx_balanced_cut_min(graph):
    """Independent oracle: minimum over balanced cell splits of crossing capacity, both directions."""
    g = to_nx(graph)
    cells = list(range(graph.num_cells))
    best = math.inf
    for side in itertools.combinations(cells, len(cells) // 2):
        left = {v.id for v in graph.vertices if v.cell in side}
        cut = nx.cut_size(g, left, weight="bandwidth")
        best = min(best, 2 * cut)
    return best


def spec_with_cells(cells, per_cell=4, links=3, **kw):
    return TopologySpec(num_nodes=cells * per_cell, nodes_per_cell=per_cell,
                        intercell_links_per_pair=links, **kw)


class TestBuild:
    def test_juwels_cells(self, juwels_graph):
        spec = juwels_graph.spec
        assert juwels_graph.num_cells == 20
        sizes = [spec.cell_population(c) for c in range(20)]
        assert sizes == [48] * 19 + [24]
        per_cell = [0] * 20
        for v in juwels_graph.vertices:
            if v.kind == COMPUTE:
                per_cell[v.cell] += 1
        assert per_cell == sizes

    def test_single_node(self):
        g = build_dragonfly_plus(TopologySpec(num_nodes=1, nodes_per_cell=48))
        assert g.num_cells == 1
        assert g.inter_cell_edges() == []
        assert g.is_connected()

    def test_two_cells_have_exactly_ten_global_links(self):
        g = build_dragonfly_plus(TopologySpec(num_nodes=96, nodes_per_cell=48, intercell_links_per_pair=10))
        crossing = [e for e in g.edges if g.cell_of(e.src) != g.cell_of(e.dst)]
        assert len(crossing) == 10
        assert len(g.inter_cell_edges()) == 10

    @pytest.mark.parametrize("bad", [dict(num_nodes=0, nodes_per_cell=48), dict(num_nodes=10, nodes_per_cell=0)])
    def test_rejects_empty(self, bad):
        with pytest.raises(ModelError):
            TopologySpec(**bad)

    def test_structure_invariants(self, juwels_graph):
        g = juwels_graph
        spec = g.spec
        for node in g.compute_nodes():
            kinds = [g.vertices[v].kind for v, _ in g.adjacency[node]]
            assert kinds == [LEAF] * spec.nics_per_node
        pair_counts = {}
        for e in g.edges:
            a, b = g.cell_of(e.src), g.cell_of(e.dst)
            if a != b:
                assert e.kind == GLOBAL_LINK
                assert g.vertices[e.src].kind == SPINE and g.vertices[e.dst].kind == SPINE
                key = (min(a, b), max(a, b))
                pair_counts[key] = pair_counts.get(key, 0) + 1
        assert len(pair_counts) == 20 * 19 // 2
        assert set(pair_counts.values()) == {10}
        assert g.is_connected()

    def test_cell_is_non_blocking(self, juwels_graph):
        g = juwels_graph
        leaf = g.leaves(0)[0]
        down = sum(g.edges[i].bandwidth for v, i in g.adjacency[leaf] if g.vertices[v].kind == COMPUTE)
        up = sum(g.edges[i].bandwidth for v, i in g.adjacency[leaf] if g.vertices[v].kind == SPINE)
        assert up == pytest.approx(down)

    @settings(max_examples=40, deadline=None)
    @given(
        nodes=st.integers(1, 60),
        per_cell=st.integers(1, 12),
        links=st.integers(1, 5),
        nics=st.integers(1, 3),
        hosts=st.one_of(st.none(), st.integers(1, 6)),
    )
    def test_random_specs(self, nodes, per_cell, links, nics, hosts):
        spec = TopologySpec(num_nodes=nodes, nodes_per_cell=per_cell, intercell_links_per_pair=links,
                            nics_per_node=nics, hosts_per_leaf=hosts)
        g = build_dragonfly_plus(spec)
        c = math.ceil(nodes / per_cell)
        assert g.num_cells == c
        assert len(g.inter_cell_edges()) == c * (c - 1) // 2 * links
        assert g.is_connected()
        assert nx.is_connected(to_nx(g))

    def test_serialization_is_deterministic(self):
        spec = spec_with_cells(5)
        a, b = build_dragonfly_plus(spec), build_dragonfly_plus(spec)
        assert edge_list_csv(a) == edge_list_csv(b)
        assert to_dot(a) == to_dot(b)

    def test_edge_csv_format(self):
        text = edge_list_csv(build_dragonfly_plus(spec_with_cells(2, per_cell=2, links=1)))
        lines = text.split("\n")
        assert lines[0] == "src_id,dst_id,kind,bandwidth_bits_per_s,latency_s"
        assert text.endswith("\n") and "\r" not in text
        assert lines[1].split(",")[2] == "nic"


class TestRoute:
    def test_same_leaf(self, juwels_graph):
        path = route(juwels_graph, 0, 1)
        assert path.hops == 2
        assert juwels_graph.vertices[path.vertices[1]].kind == LEAF

    def test_inter_cell_crosses_once(self, juwels_graph):
        path = route(juwels_graph, 0, 500)
        crossings = [e for e in path.edges if e.kind == GLOBAL_LINK]
        assert len(crossings) == 1
        assert path.hops == nx.shortest_path_length(to_nx(juwels_graph), 0, 500)

    def test_hops_match_bfs_on_eight_cells(self):
        g = build_dragonfly_plus(TopologySpec(num_nodes=8 * 48, nodes_per_cell=48))
        oracle = to_nx(g)
        rng = random.Random(1234)
        for _ in range(100):
            a, b = rng.sample(range(g.spec.num_nodes), 2)
            assert route(g, a, b).hops == nx.shortest_path_length(oracle, a, b)

    def test_exhaustive_small_instance(self):
        g = build_dragonfly_plus(spec_with_cells(8, per_cell=3, links=2, nics_per_node=2))
        lengths = dict(nx.all_pairs_shortest_path_length(to_nx(g)))
        for a, b in itertools.permutations(g.compute_nodes(), 2):
            assert route(g, a, b).hops == lengths[a][b]

    def test_deterministic_tie_break(self, juwels_graph):
        assert route(juwels_graph, 3, 700) == route(juwels_graph, 3, 700)
        path = route(juwels_graph, 3, 700)
        # first hop takes the lowest-numbered leaf
        assert path.vertices[1] == min(v for v, _ in juwels_graph.adjacency[3])

    def test_path_is_contiguous(self, juwels_graph):
        path = route(juwels_graph, 10, 900)
        for i, e in enumerate(path.edges):
            assert {e.src, e.dst} == {path.vertices[i], path.vertices[i + 1]}
        assert path.bottleneck_bandwidth == min(e.bandwidth for e in path.edges)

    def test_no_transit_through_compute_nodes(self, juwels_graph):
        path = route(juwels_graph, 0, 935)
        assert all(juwels_graph.vertices[v].kind != COMPUTE for v in path.vertices[1:-1])

    @pytest.mark.parametrize("src,dst", [(0, 0), (0, 10_000), (-1, 3)])
    def test_errors(self, juwels_graph, src, dst):
        with pytest.raises(ModelError):
            route(juwels_graph, src, dst)

    def test_switch_endpoint_rejected(self, juwels_graph):
        with pytest.raises(ModelError):
            route(juwels_graph, 0, juwels_graph.spec.num_nodes)


class TestLatency:
    def test_two_hop(self):
        spec = TopologySpec(num_nodes=4, nodes_per_cell=4, switch_hop_latency=2e-7, nic_latency=1e-6)
        p = route(build_dragonfly_plus(spec), 0, 1)
        assert path_latency(p) == pytest.approx(2 * 2e-7 + 2 * 1e-6)

    def test_inter_cell_slower(self, juwels_graph):
        assert path_latency(route(juwels_graph, 0, 500)) > path_latency(route(juwels_graph, 0, 1))

    def test_empty_path(self):
        with pytest.raises(ModelError):
            path_latency(Path(vertices=(0,), edges=()))


class TestBisection:
    def test_juwels(self, juwels_graph):
        assert bisection_bandwidth(juwels_graph) == 400e12

    def test_two_cells(self):
        g = build_dragonfly_plus(TopologySpec(num_nodes=96, nodes_per_cell=48))
        assert bisection_bandwidth(g) == 4e12

    def test_single_cell_has_no_bisection(self):
        g = build_dragonfly_plus(TopologySpec(num_nodes=48, nodes_per_cell=48))
        assert bisection_bandwidth(g) == 0

    @pytest.mark.parametrize("cells", [2, 3, 4, 5, 6, 7, 8])
    def test_matches_exhaustive_oracle(self, cells):
        g = build_dragonfly_plus(spec_with_cells(cells, per_cell=2, links=3, nics_per_node=1))
        expected = nx_balanced_cut_min(g)
        assert bisection_bandwidth(g) == pytest.approx(expected)
        assert exhaustive_bisection_bandwidth(g) == pytest.approx(expected)
