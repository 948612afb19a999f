import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accgraph import algorithms as alg
from accgraph.engine import EngineConfig
from accgraph.generate import rmat_graph, uniform_graph
from accgraph.graph import EdgeList, build_csr, generate_weights


def test_bfs_path():
    g = build_csr(EdgeList(np.arange(4), np.arange(1, 5), directed=False))
    assert alg.bfs(g, 0).values.tolist() == [0, 1, 2, 3, 4]


def test_bfs_two_components():
    g = build_csr(EdgeList(np.array([0, 2]), np.array([1, 3]), directed=False))
    lv = alg.bfs(g, 0).values
    assert lv[:2].tolist() == [0, 1] and (lv[2:] == alg.UNVISITED).all()


def test_bfs_invalid_source():
    with pytest.raises(ValueError, match="source"):
        alg.bfs(uniform_graph(5, 5, 0), 7)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_bfs_matches_oracle_and_edge_property(seed):
    g = uniform_graph(1000, 5000, seed)
    lv = alg.bfs(g, 0).values
    assert np.array_equal(lv, alg.bfs_oracle(g, 0))
    s, d = g.edge_sources, g.out_neighbors
    both = (lv[s] != alg.UNVISITED) & (lv[d] != alg.UNVISITED)
    assert (lv[d][both] <= lv[s][both] + 1).all()


def test_sssp_single_vertex():
    g = build_csr(EdgeList(np.zeros(0, np.int64), np.zeros(0, np.int64), vertex_count=1))
    assert alg.sssp(g, 0).values.tolist() == [0.0]


def test_sssp_rejects_zero_weight():
    g = build_csr(EdgeList(np.array([0]), np.array([1]), np.array([0.0])))
    with pytest.raises(ValueError, match="non-positive weight"):
        alg.sssp(g, 0)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_sssp_matches_dijkstra_any_delta(seed):
    g = generate_weights(uniform_graph(500, 4000, seed), seed, 1.0, 10.0)
    ref = alg.dijkstra(g, 0)
    for delta in (1.0, None, float(g.out_weights.max())):
        assert np.array_equal(alg.sssp(g, 0, delta).values, ref)


def test_sssp_integer_weights_exact_and_triangle_inequality():
    g = uniform_graph(500, 4000, 3)
    w = np.random.default_rng(0).integers(1, 11, g.edge_count)
    g = g.with_weights(w)
    dist = alg.sssp(g, 0).values
    assert np.array_equal(dist, alg.dijkstra(g, 0))
    fin = np.isfinite(dist[g.edge_sources])
    assert (dist[g.out_neighbors][fin] <= dist[g.edge_sources][fin] + g.out_weights[fin]).all()


def test_kcore_triangle_and_star():
    tri = build_csr(EdgeList(np.array([0, 1, 0]), np.array([1, 2, 2]), directed=False))
    assert alg.kcore(tri, 2).meta.aux["alive"].all()
    star = build_csr(EdgeList(np.zeros(5, np.int64), np.arange(1, 6), directed=False))
    assert not alg.kcore(star, 2).meta.aux["alive"].any()


def test_kcore_directed_rejected():
    with pytest.raises(ValueError, match="undirected"):
        alg.kcore(uniform_graph(10, 30, 0), 2)


@pytest.mark.parametrize("k", [2, 16, 32])
def test_kcore_matches_peeling(k):
    g = uniform_graph(2000, 20000, 11, directed=False)
    res = alg.kcore(g, k)
    alive = res.meta.aux["alive"]
    assert np.array_equal(alive, alg.kcore_oracle(g, k))
    # every survivor keeps at least k alive neighbors; counters track them
    alive_deg = np.bincount(g.edge_sources, weights=alive[g.out_neighbors], minlength=g.vertex_count)
    assert (alive_deg[alive] >= k).all()
    assert np.array_equal(res.values[alive], alive_deg[alive].astype(np.int64))


def test_kcore_directions_pull_first():
    g = rmat_graph(11, 8, 2, directed=False)
    dirs = alg.kcore(g, 16).stats.directions()
    assert dirs[0] == "pull"
    if "push" in dirs:
        first = dirs.index("push")
        assert set(dirs[first:]) == {"push"}


def test_pagerank_two_cycle_symmetric():
    g = build_csr(EdgeList(np.array([0, 1]), np.array([1, 0])), build_reverse=True)
    r = alg.pagerank(g, epsilon=1e-12).values
    assert r[0] == pytest.approx(r[1]) and r[0] == pytest.approx(1.0)


def test_pagerank_single_vertex():
    g = build_csr(EdgeList(np.zeros(0, np.int64), np.zeros(0, np.int64), vertex_count=1),
                  build_reverse=True)
    assert alg.pagerank(g).values.tolist() == [pytest.approx(0.15)]


def test_pagerank_invalid_damping():
    with pytest.raises(ValueError):
        alg.pagerank_spec(1.0)


def test_pagerank_matches_power_iteration():
    g = uniform_graph(500, 3000, 21)
    r = alg.pagerank(g, epsilon=1e-9).values
    assert np.abs(r - alg.pagerank_oracle(g)).sum() <= 1e-6
    assert (r >= 1 - alg.DEFAULT_DAMPING - 1e-15).all()


def test_pagerank_delta_shrinks():
    g = build_csr(EdgeList(np.arange(60), (np.arange(60) + 1) % 60, directed=False), build_reverse=True)
    g2 = build_csr(EdgeList(np.concatenate([np.arange(60), np.arange(60)]),
                            np.concatenate([(np.arange(60) + 1) % 60, (np.arange(60) * 7 + 3) % 60])),
                   build_reverse=True)
    for graph in (g, g2):
        res = alg.pagerank(graph, epsilon=1e-10, cfg=EngineConfig(max_iterations=40))
        m = alg.pagerank_matrix(graph)
        r = np.full(graph.vertex_count, 0.15)
        deltas = []
        for _ in range(40):
            nxt = 0.15 + m @ r
            deltas.append(np.abs(nxt - r).sum())
            r = nxt
        assert all(b <= a + 1e-15 for a, b in zip(deltas[1:], deltas[2:]))
        assert np.abs(res.values - r).sum() < 1e-8


def test_pagerank_switches_to_push_when_mostly_stable():
    # 95% of vertices have no in-edges: stable after one pull
    n = 400
    src = np.arange(20, n)
    dst = src % 20
    ring = np.arange(20)
    g = build_csr(EdgeList(np.concatenate([src, ring]), np.concatenate([dst, (ring + 1) % 20])),
                  build_reverse=True)
    res = alg.pagerank(g, epsilon=1e-10)
    dirs = res.stats.directions()
    assert dirs[0] == "pull" and "push" in dirs
    assert set(dirs[dirs.index("push"):]) == {"push"}
    assert np.abs(res.values - alg.pagerank_oracle(g)).sum() < 1e-6


def test_bp_symmetric_fixed_point():
    g = uniform_graph(100, 500, 2)
    b = alg.belief_propagation(g, np.full(100, 0.5), np.full(g.edge_count, 0.7), 10).values
    assert np.allclose(b, 0.5, atol=0, rtol=0)


def test_bp_isolated_vertex_keeps_prior():
    g = build_csr(EdgeList(np.array([0]), np.array([1]), vertex_count=3), build_reverse=True)
    pri = np.array([0.9, 0.3, 0.42])
    b = alg.belief_propagation(g, pri, np.array([0.8]), 7).values
    assert b[2] == 0.42 and b[0] == 0.9 and b[1] > 0.3


def test_bp_input_validation():
    g = uniform_graph(3, 2, 0)
    with pytest.raises(ValueError, match="priors"):
        alg.belief_propagation(g, np.array([0.1, 1.2, 0.3]), np.full(g.edge_count, 0.6))
    with pytest.raises(ValueError, match="likelihood"):
        alg.belief_propagation(g, np.full(3, 0.5), np.full(g.edge_count, 1.0))


def test_bp_chain_matches_hand_recurrence():
    g = build_csr(EdgeList(np.array([0, 1]), np.array([1, 2]), directed=False))
    pri = np.array([0.8, 0.4, 0.6])
    lik = np.full(g.edge_count, 0.7)
    got = alg.belief_propagation(g, pri, lik, 5, cfg=EngineConfig(deterministic=True)).values
    b = pri.copy()
    nbrs = {0: [1], 1: [0, 2], 2: [1]}
    for _ in range(5):
        new = []
        for u in range(3):
            s = 0.0
            for v in nbrs[u]:
                s += np.log((b[v] * 0.7 + (1 - b[v]) * 0.3) / (b[v] * 0.3 + (1 - b[v]) * 0.7))
            odds = pri[u] / (1 - pri[u]) * np.exp(s)
            new.append(odds / (1 + odds))
        b = np.array(new)
    assert np.abs(got - b).max() <= 1e-12
    assert np.abs(got - alg.bp_oracle(g, pri, lik, 5)).max() <= 1e-12


def test_bp_beliefs_in_unit_interval():
    g = rmat_graph(10, 8, 1)
    p, lik = alg.default_bp_inputs(g, 1)
    b = alg.belief_propagation(g, p, lik, 15).values
    assert ((b >= 0) & (b <= 1)).all()
