import numpy as np
import pytest

from sttr.graph import (GraphError, NTU_CENTER_JOINT, NTU_EDGES, normalize_adjacency,
                        ntu_graph)


def test_two_node_normalization():
    g = normalize_adjacency([(0, 1)], 2, center_joint=0)
    np.testing.assert_allclose(g.full_normalized, [[0.5, 0.5], [0.5, 0.5]])


def test_edgeless_graph_is_identity_in_root():
    g = normalize_adjacency([], 4, center_joint=0)
    np.testing.assert_allclose(g.A_norm[0], np.eye(4))
    np.testing.assert_allclose(g.A_norm[1], 0.0)
    np.testing.assert_allclose(g.A_norm[2], 0.0)


def test_partitions_cover_normalized_exactly():
    g = ntu_graph()
    np.testing.assert_allclose(g.A_norm.sum(axis=0), g.full_normalized)
    assert (g.A_norm >= 0).all()
    # no entry is assigned to two partitions
    overlap = (g.A_norm > 0).sum(axis=0)
    assert overlap.max() <= 1


def test_ntu_graph_rows_positive_and_symmetric():
    g = ntu_graph()
    full = g.full_normalized
    assert (full.sum(axis=1) > 0).all()
    np.testing.assert_allclose(full, full.T, atol=1e-12)
    assert g.A_norm.shape == (3, 25, 25)


def test_self_loops_live_in_root_partition():
    g = ntu_graph()
    assert (np.diag(g.A_norm[0]) > 0).all()
    assert np.all(np.diag(g.A_norm[1]) == 0)
    assert np.all(np.diag(g.A_norm[2]) == 0)


def test_parents_walk_toward_center():
    g = ntu_graph()
    dist = {}
    # recompute hop distances independently with BFS over the edge list
    adj = {i: set() for i in range(25)}
    for a, b in NTU_EDGES:
        adj[a].add(b)
        adj[b].add(a)
    frontier = [NTU_CENTER_JOINT]
    dist[NTU_CENTER_JOINT] = 0
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    assert g.parents[NTU_CENTER_JOINT] == NTU_CENTER_JOINT
    for j in range(25):
        if j == NTU_CENTER_JOINT:
            continue
        assert dist[g.parents[j]] == dist[j] - 1
        assert g.parents[j] in adj[j]


def test_bad_edge_index_rejected():
    with pytest.raises(GraphError):
        normalize_adjacency([(0, 5)], 3)
