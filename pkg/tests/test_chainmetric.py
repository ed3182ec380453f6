import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasketlab.chainmetric import (
    FiniteMetricSpace,
    chain_constant,
    chain_metric,
    chain_midpoint,
    epsilon_net,
)


def path_space(n, gap=1.0):
    x = np.arange(n + 1) * gap
    return FiniteMetricSpace(np.abs(x[:, None] - x[None, :]), np.ones(n + 1), unit=gap)


def test_path_chain_metric():
    X = path_space(10)
    assert chain_metric(X, 1.5, 0, 10) == pytest.approx(10.0)
    assert chain_metric(X, 1.0, 0, 10) == np.inf  # hops must be strictly shorter than eps
    assert chain_constant(X, [1.5, 3.0])["C"] == pytest.approx(1.0)


def test_path_midpoint():
    X = path_space(10)
    z, chain = chain_midpoint(X, 1.5, 0, 10)
    assert z == 5
    assert chain == list(range(11))
    z, _ = chain_midpoint(X, 1.5, 0, 9)
    assert z == 5  # first point at or past half the length


def test_gap_makes_chain_constant_infinite():
    pts = np.array([0.0, 1.0, 5.0])
    X = FiniteMetricSpace(np.abs(pts[:, None] - pts[None, :]), np.ones(3))
    assert chain_constant(X, [2.0])["C"] == np.inf
    assert chain_constant(X, [4.5])["C"] == pytest.approx(1.0)


def test_graph_metric_chain_constant(sg2):
    X = FiniteMetricSpace.from_graph(sg2[3])
    assert chain_constant(X, [1 / 2, 1 / 4])["C"] == pytest.approx(1.0, abs=1e-12)
    # eps equal to the edge length admits no hop at all
    assert chain_constant(X, [1 / 8])["C"] == np.inf
    assert X.check_axioms()


def test_euclidean_chain_constant_bounded(sg2):
    E = FiniteMetricSpace.from_graph(sg2[3], "euclidean")
    C = chain_constant(E, [1 / 4])["C"]
    assert 1.0 <= C < 3.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1 / 4, 1 / 8, 3 / 16]))
def test_net_separated_and_covering(seed, eps):
    r = np.random.default_rng(seed)
    pts = r.random((60, 2))
    D = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
    X = FiniteMetricSpace(D, np.ones(60), unit=1e-3)
    net = epsilon_net(X, eps)
    sub = D[np.ix_(net, net)][~np.eye(len(net), dtype=bool)]
    assert np.all(sub >= eps - X.tol)
    assert np.all(D[:, net].min(axis=1) < eps)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_midpoint_bounds_on_gasket(seed):
    from gasketlab import GasketSpec, build_graph

    g = build_graph(GasketSpec.constant(2, 2, 4), 4)
    X = FiniteMetricSpace.from_graph(g)
    r = np.random.default_rng(seed)
    x, y = (int(v) for v in r.choice(X.size, 2, replace=False))
    eps = 1 / 8
    z, chain = chain_midpoint(X, eps, x, y)
    assert chain[0] == x and chain[-1] == y
    d = X.dist
    assert abs(2 * d[x, z] - d[x, y]) <= 5 * eps
    assert abs(2 * d[z, y] - d[x, y]) <= 5 * eps


def test_ball_mass_table_matches_direct(sg2):
    X = FiniteMetricSpace.from_graph(sg2[3])
    T = X.ball_mass_table()
    for j in (1, 2, 5):
        assert np.allclose(T[:, j], X.ball_masses(j * X.unit))


def test_euclidean_has_no_lattice_table(sg2):
    E = FiniteMetricSpace.from_graph(sg2[2], "euclidean")
    with pytest.raises(ValueError):
        E.ball_mass_table()


def test_space_validation():
    with pytest.raises(ValueError):
        FiniteMetricSpace(np.zeros((2, 3)), np.ones(2))
    with pytest.raises(ValueError):
        FiniteMetricSpace(np.zeros((2, 2)), np.array([1.0, 0.0]))
