import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accgraph.generate import uniform_edges, uniform_graph
from accgraph.graph import (EdgeList, GraphFormatError, MissingReverseError, build_csr,
                            generate_weights, load_edge_list, read_binary, transpose, write_binary)


def test_parse_minimal():
    el = load_edge_list(b"0 1\n1 2\n")
    assert len(el) == 2 and el.vertex_count == 3 and el.directed


def test_parse_comment_and_weight():
    el = load_edge_list(b"# c\n0 1 5\n")
    assert len(el) == 1
    assert el.weight.tolist() == [5.0]


def test_parse_percent_comment_and_blank_lines():
    el = load_edge_list(b"% header\n\n3 4\n")
    assert el.src.tolist() == [3] and el.vertex_count == 5


def test_malformed_line_reported():
    lines = [f"{i} {i + 1}" for i in range(10)]
    lines[6] = "6 x"
    with pytest.raises(GraphFormatError, match="line 7"):
        load_edge_list("\n".join(lines).encode())


def test_negative_weight_rejected():
    with pytest.raises(GraphFormatError, match="negative"):
        load_edge_list(b"0 1 -2\n")


def test_vertex_id_overflow():
    with pytest.raises(GraphFormatError):
        load_edge_list(f"0 {2**32}\n".encode())


def test_parse_from_path(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("0 1 2.5\n")
    assert load_edge_list(p).weight.tolist() == [2.5]


def test_triangle_layout(triangle):
    assert triangle.out_offsets.tolist() == [0, 2, 4, 6]
    assert triangle.out_neighbors.tolist() == [1, 2, 0, 2, 0, 1]


def test_directed_reverse():
    g = build_csr(EdgeList(np.array([0, 0]), np.array([1, 2])), build_reverse=True)
    assert g.in_offsets.tolist() == [0, 0, 1, 2]
    assert g.in_neighbors.tolist() == [0, 0]


def test_missing_reverse_for_pull():
    g = build_csr(EdgeList(np.array([0]), np.array([1])))
    assert not g.can_pull()
    with pytest.raises(MissingReverseError):
        g.in_csr()


def test_undirected_pulls_without_reverse(triangle):
    assert triangle.can_pull()
    off, nbr, _, _ = triangle.in_csr()
    assert nbr.tolist() == triangle.out_neighbors.tolist()


def test_round_trip_edges_random():
    el = uniform_edges(100, 600, seed=7)
    g = build_csr(el)
    got = sorted((a, b) for a, b, _ in g.edges())
    assert got == sorted(zip(el.src.tolist(), el.dst.tolist()))


def test_duplicates_and_self_loops_preserved():
    g = build_csr(EdgeList(np.array([0, 0, 1]), np.array([1, 1, 1])))
    assert g.out_neighbors.tolist() == [1, 1, 1]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(0, 120), st.integers(0, 10**6), st.booleans())
def test_csr_invariants(n, m, seed, directed):
    el = uniform_edges(n, m, seed, directed=directed)
    g = build_csr(el, build_reverse=True)
    assert g.out_offsets[0] == 0 and g.out_offsets[-1] == g.edge_count
    assert np.all(np.diff(g.out_offsets) >= 0)
    assert g.out_degree.sum() == g.edge_count
    for v in range(n):
        assert np.all(np.diff(g.neighbors(v)) >= 0)
    # reverse holds exactly the transposed edges
    rs = np.repeat(np.arange(n), np.diff(g.in_offsets))
    fwd = sorted((a, b) for a, b, _ in g.edges())
    assert fwd == sorted(zip(g.in_neighbors.tolist(), rs.tolist()))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(0, 80), st.integers(0, 10**6))
def test_canonical_form_order_insensitive(n, m, seed):
    el = uniform_edges(n, m, seed)
    perm = np.random.default_rng(seed).permutation(len(el))
    el2 = EdgeList(el.src[perm], el.dst[perm], directed=True, vertex_count=n)
    assert build_csr(el).structurally_equal(build_csr(el2))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(0, 80), st.integers(0, 10**6))
def test_transpose_twice_identity(n, m, seed):
    g = build_csr(uniform_edges(n, m, seed))
    assert transpose(transpose(g)).structurally_equal(g)


def test_weights_deterministic_and_in_range():
    g = uniform_graph(200, 1000, 1)
    a = generate_weights(g, 5, 2.0, 9.0)
    b = generate_weights(g, 5, 2.0, 9.0)
    assert np.array_equal(a.out_weights, b.out_weights)
    assert a.out_weights.min() >= 2.0 and a.out_weights.max() < 9.0
    assert not np.array_equal(a.out_weights, generate_weights(g, 6, 2.0, 9.0).out_weights)


@pytest.mark.parametrize("lo,hi", [(3.0, 3.0), (5.0, 1.0), (-1.0, 2.0)])
def test_weights_invalid_range(lo, hi):
    with pytest.raises(ValueError):
        generate_weights(uniform_graph(5, 5, 0), 0, lo, hi)


def test_weights_symmetric_undirected(triangle):
    g = generate_weights(triangle, 11)
    lookup = {(a, b): x for a, b, x in g.edges()}
    for (a, b), x in lookup.items():
        assert lookup[(b, a)] == x


def test_weights_symmetric_random_undirected():
    g = generate_weights(uniform_graph(300, 2000, 3, directed=False), 2)
    fwd = sorted(g.edges())
    bwd = sorted((b, a, x) for a, b, x in g.edges())
    assert fwd == bwd


def _round_trip(g):
    buf = io.BytesIO()
    write_binary(g, buf)
    return read_binary(io.BytesIO(buf.getvalue())), buf.getvalue()


def test_binary_round_trip_triangle(triangle):
    back, _ = _round_trip(triangle)
    assert back.structurally_equal(triangle)


def test_binary_round_trip_random_weighted_reverse():
    g = generate_weights(uniform_graph(2000, 10_000, 4, build_reverse=True), 1)
    back, raw = _round_trip(g)
    assert raw[:4] == b"ACCX"
    for f in ("out_offsets", "out_neighbors", "out_weights", "in_offsets", "in_neighbors", "in_weights"):
        assert np.array_equal(getattr(back, f), getattr(g, f)), f
    assert back.directed and back.weighted and back.has_reverse


def test_binary_truncated(triangle):
    _, raw = _round_trip(triangle)
    with pytest.raises(GraphFormatError, match="shape mismatch"):
        read_binary(io.BytesIO(raw[:-3]))


def test_binary_bad_magic(triangle):
    _, raw = _round_trip(triangle)
    with pytest.raises(GraphFormatError, match="magic"):
        read_binary(io.BytesIO(b"XXXX" + raw[4:]))


def test_summary(triangle):
    assert triangle.summary() == "V=3 E=6"
