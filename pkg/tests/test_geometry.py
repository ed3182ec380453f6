import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasketlab import GasketSpec, build_graph, count_s, enumerate_s, uniform_cell_measure
from gasketlab.geometry import graph_distance, simplex_gram

specs = st.builds(
    lambda N, levels: GasketSpec(N, tuple(levels)),
    st.integers(2, 3),
    st.lists(st.integers(2, 4), min_size=1, max_size=3),
).filter(lambda s: s.M(s.max_depth) <= 400)


def test_enumerate_s_counts():
    assert enumerate_s(2, 2) == [(0, 0), (0, 1), (1, 0)]
    for N in (2, 3, 4):
        for l in range(2, 7):
            S = enumerate_s(l, N)
            assert len(S) == count_s(l, N) == math.comb(l - 1 + N, N)
            assert all(sum(a) <= l - 1 for a in S)
            assert len(set(S)) == len(S)


@pytest.mark.parametrize("bad", [dict(dimension=1, levels=(2,)), dict(dimension=2, levels=()),
                                 dict(dimension=2, levels=(2, 1))])
def test_spec_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        GasketSpec(**bad)


def test_sg2_vertex_counts(sg2):
    for n, g in sg2.items():
        assert g.n_cells == 3**n
        assert g.n_vertices == (3 ** (n + 1) + 3) // 2
        assert g.L == 2**n


def test_depth_zero_is_simplex():
    g = build_graph(GasketSpec(3, (2,)), 0)
    assert g.n_vertices == 4 and g.n_cells == 1
    assert sorted(g.boundary.tolist()) == [0, 1, 2, 3]


def test_level3_gasket_counts():
    # level 3 in the plane: 6 cells, 10 vertices, upward triangles only
    g = build_graph(GasketSpec(2, (3,)), 1)
    assert g.n_cells == 6
    assert g.n_vertices == 10
    assert len(g.edges) == 18


@settings(max_examples=25, deadline=None)
@given(specs)
def test_graph_invariants(spec):
    for n in range(spec.max_depth + 1):
        g = build_graph(spec, n)
        assert g.n_cells == spec.M(n)
        assert g.L == spec.L(n)
        # every cell has N+1 distinct corners
        assert np.all(np.sort(g.cells, axis=1)[:, 1:] != np.sort(g.cells, axis=1)[:, :-1])
        # keys lie in the scaled simplex
        assert np.all(g.keys >= 0) and np.all(g.keys.sum(axis=1) <= g.L)
        # the corners of the whole simplex are the boundary
        assert len(g.boundary) == spec.dimension + 1
        # symmetric adjacency, connected graph
        A = g.adjacency
        assert abs(A - A.T).max() == 0
        assert np.all(np.isfinite(g.hop_matrix))


@settings(max_examples=20, deadline=None)
@given(specs)
def test_parent_vertices_embed(spec):
    if spec.max_depth < 1:
        return
    prev = build_graph(spec, spec.max_depth - 1)
    nxt = build_graph(spec, spec.max_depth)
    idx = nxt.parent_vertex_indices(prev)
    scale = nxt.L // prev.L
    assert np.array_equal(nxt.keys[idx], prev.keys * scale)


def test_graph_metric_matches_edge_length(sg2):
    g = sg2[3]
    q = g.boundary
    assert graph_distance(g, int(q[0]), int(q[1])) == pytest.approx(1.0)
    u, v = g.edges[0]
    assert graph_distance(g, int(u), int(v)) == pytest.approx(1 / g.L)


def test_euclidean_embedding_is_regular_simplex():
    for N in (2, 3):
        g = build_graph(GasketSpec(N, (2,)), 0)
        D = g.euclidean_distances()
        off = D[~np.eye(N + 1, dtype=bool)]
        assert np.allclose(off, 1.0)
        G = simplex_gram(N)
        assert np.allclose(np.diag(G), 1.0)


def test_uniform_cell_measure(sg2):
    g = sg2[4]
    m = uniform_cell_measure(g)
    assert m.total == pytest.approx(1.0)
    assert np.allclose(m.mass, 1 / g.n_cells)
    assert m.to_vertices().sum() == pytest.approx(1.0)
    coarse = m.coarsen(2)
    assert coarse.shape == (9,) and np.allclose(coarse, 1 / 9)


def test_index_of_roundtrip(sg2):
    g = sg2[3]
    for v in (0, 5, g.n_vertices - 1):
        assert g.index_of(tuple(g.keys[v])) == v
