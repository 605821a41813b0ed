import itertools

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from sues.catalog import SHIPPED, generate_topologies
from sues.graphs import (
    CatalogMissing,
    GraphError,
    LabeledGraph,
    catalog_sizes,
    enumerate_labeled,
    labeling_count,
    labeling_digits,
    labeling_id,
    labeling_perms,
    load_catalog,
    random_graph,
    validate,
)


def k4(labeling=0):
    return LabeledGraph.from_adjacency(load_catalog(3, 4)[0], labeling_perms(labeling, 3, 4))


def to_nx(adj):
    g = nx.Graph()
    g.add_nodes_from(range(len(adj)))
    g.add_edges_from((v, w) for v, row in enumerate(adj) for w in row if v < w)
    return g


# connected d-regular graphs on n vertices, up to isomorphism
KNOWN_COUNTS = {(3, 4): 1, (3, 6): 2, (3, 8): 5, (4, 5): 1, (4, 6): 1}


@pytest.mark.parametrize("d,n", SHIPPED)
def test_catalog_counts_and_non_isomorphic(d, n):
    tops = load_catalog(d, n)
    assert len(tops) == KNOWN_COUNTS[(d, n)]
    graphs = [to_nx(a) for a in tops]
    for g in graphs:
        assert nx.is_connected(g)
        assert all(deg == d for _, deg in g.degree())
    for a, b in itertools.combinations(graphs, 2):
        assert not nx.is_isomorphic(a, b)


@pytest.mark.parametrize("d,n", SHIPPED)
def test_catalog_complete_against_random_regular_graphs(d, n):
    graphs = [to_nx(a) for a in load_catalog(d, n)]
    seen = set()
    for seed in range(60):
        g = nx.random_regular_graph(d, n, seed=seed)
        if not nx.is_connected(g):
            continue
        matches = [i for i, h in enumerate(graphs) if nx.is_isomorphic(g, h)]
        assert len(matches) == 1
        seen.add(matches[0])
    assert seen  # at least one sample landed


@pytest.mark.parametrize("d,n", SHIPPED)
def test_catalog_regenerates(d, n):
    assert [tuple(map(tuple, a)) for a in generate_topologies(d, n)] == [
        tuple(map(tuple, a)) for a in load_catalog(d, n)
    ]


def test_missing_catalog_entry():
    with pytest.raises(CatalogMissing):
        load_catalog(3, 10)


def test_catalog_sizes_skip_impossible():
    assert catalog_sizes(3, 8) == [4, 6, 8]
    assert catalog_sizes(4, 6) == [5, 6]


def test_labeling_zero_sorts_ports():
    g = k4(0)
    assert [[w for w, _ in row] for row in g.rot] == [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]


@given(st.integers(0, labeling_count(3, 4) - 1))
def test_labeling_id_round_trip(lab):
    perms = labeling_perms(lab, 3, 4)
    assert labeling_id(perms) == lab
    assert len(labeling_digits(lab, 3, 4)) == 4


@given(st.integers(0, labeling_count(3, 4) - 1))
def test_every_labeling_is_valid(lab):
    g = k4(lab)
    assert validate(g)
    for e in g.start_edges():
        assert g.reverse(g.reverse(e)) == e
        assert g.is_edge(g.reverse(e))


def test_validate_catches_broken_involution():
    rot = [list(row) for row in k4().rot]
    rot[0][0] = (1, 1)
    g = LabeledGraph(4, 3, tuple(tuple(r) for r in rot))
    v = validate(g)
    assert not v and v.witness is not None


def test_validate_catches_self_loop_and_parallel_edge():
    loop = LabeledGraph(2, 2, (((0, 1), (0, 0)), ((1, 1), (1, 0))))
    assert "self-loop" in validate(loop).reason
    par = LabeledGraph(2, 2, (((1, 0), (1, 1)), ((0, 0), (0, 1))))
    assert "parallel" in validate(par).reason


def test_odd_degree_sum_rejected():
    with pytest.raises(GraphError):
        LabeledGraph(3, 3, tuple(((0, 0),) * 3 for _ in range(3)))


def test_text_round_trip():
    g = k4(77)
    assert LabeledGraph.from_text(g.to_text()) == g


def test_from_text_rejects_invalid():
    text = k4().to_text().replace("(1,0)", "(1,1)", 1)
    with pytest.raises(GraphError):
        LabeledGraph.from_text(text)


def test_start_edge_count_k4():
    assert len(list(k4().start_edges())) == 12


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([(3, 6), (3, 8), (4, 6), (3, 10)]), st.integers(0, 10**6))
def test_random_graph_valid(dn, seed):
    d, n = dn
    g = random_graph(d, n, seed)
    assert validate(g)
    assert g.n == n and g.d == d
    assert random_graph(d, n, seed) == g


def test_enumerate_exhaustive_counts():
    graphs = list(enumerate_labeled(3, 4))
    assert len(graphs) == 1296
    assert len({g.rot for _, _, g in graphs}) == 1296


def test_enumerate_sampled_is_seeded():
    a = [lab for _, lab, _ in enumerate_labeled(3, 6, "sampled", count=5, seed=3)]
    b = [lab for _, lab, _ in enumerate_labeled(3, 6, "sampled", count=5, seed=3)]
    assert a == b and len(a) == 10


def test_from_adjacency_matches_permutations():
    adj = load_catalog(3, 6)[1]
    perms = labeling_perms(123, 3, 6)
    g = LabeledGraph.from_adjacency(adj, perms)
    for v in range(6):
        assert [w for w, _ in g.rot[v]] == [sorted(adj[v])[perms[v][p]] for p in range(3)]
    assert g.adjacency() == tuple(tuple(sorted(row)) for row in adj)
