"""Chain metrics, chain constants, nets and chain midpoints on finite metric spaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .geometry import GasketGraph, uniform_cell_measure

__all__ = [
    "FiniteMetricSpace",
    "chain_metric",
    "chain_metric_matrix",
    "chain_constant",
    "epsilon_net",
    "chain_midpoint",
    "sample_pairs",
]

# relative tolerance for strict comparisons d < r on lattice-valued distances
_REL_TOL = 1e-9


@dataclass
class FiniteMetricSpace:
    """Distance table, point masses and a length unit for tolerant comparisons.

    ``unit`` is the natural resolution of the distances (edge length for graph
    metrics); open-ball tests use ``d < r - 1e-9 * unit`` so that radii landing
    exactly on a lattice distance are not decided by rounding.
    """

    dist: np.ndarray
    mass: np.ndarray
    unit: float = 1.0

    def __post_init__(self):
        self.dist = np.asarray(self.dist, dtype=float)
        self.mass = np.asarray(self.mass, dtype=float)
        n = self.dist.shape[0]
        if self.dist.shape != (n, n):
            raise ValueError("distance table must be square")
        if self.mass.shape != (n,):
            raise ValueError("need one mass per point")
        if np.any(self.mass <= 0):
            raise ValueError("point masses must be positive")

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    @property
    def tol(self) -> float:
        return _REL_TOL * self.unit

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    @classmethod
    def from_graph(cls, graph: GasketGraph, metric: str = "graph", mass=None) -> "FiniteMetricSpace":
        if metric == "graph":
            dist = graph.hop_matrix / graph.L
        elif metric == "euclidean":
            dist = graph.euclidean_distances()
        else:
            raise ValueError(f"unknown metric {metric!r}")
        if mass is None:
            mass = uniform_cell_measure(graph).to_vertices()
        return cls(dist, mass, unit=1.0 / graph.L)

    def ball(self, x: int, r: float) -> np.ndarray:
        """Indices of the open ball ``B(x, r)``."""
        return np.flatnonzero(self.dist[x] < r - self.tol)

    def ball_masses(self, r: float, weights=None) -> np.ndarray:
        """``w(B(x, r))`` for every center ``x``."""
        w = self.mass if weights is None else np.asarray(weights, dtype=float)
        return (self.dist < r - self.tol).astype(float) @ w

    def lattice_steps(self) -> np.ndarray | None:
        """Distances in units of ``unit`` as ints, or None if they are not integral."""
        q = self.dist / self.unit
        k = np.rint(q)
        if np.max(np.abs(q - k), initial=0.0) > 1e-6:
            return None
        return k.astype(np.int64)

    def ball_mass_table(self, weights=None) -> np.ndarray:
        """``table[x, j] = w(B(x, j * unit))`` (open balls) for ``j = 0 .. max_step + 1``.

        Only for lattice-valued distances, e.g. graph metrics.
        """
        K = self.lattice_steps()
        if K is None:
            raise ValueError("distances are not multiples of the unit")
        w = self.mass if weights is None else np.asarray(weights, dtype=float)
        n, kmax = self.size, int(K.max())
        flat = (np.arange(n)[:, None] * (kmax + 2) + K + 1).reshape(-1)
        hist = np.bincount(flat, weights=np.tile(w, n), minlength=n * (kmax + 2))
        return np.cumsum(hist.reshape(n, kmax + 2), axis=1)

    def check_axioms(self, n_triples: int = 2000, seed: int = 0) -> bool:
        D = self.dist
        if not np.allclose(D, D.T) or np.any(np.diag(D) != 0):
            return False
        off = D[~np.eye(self.size, dtype=bool)]
        if off.size and off.min() <= 0:
            return False
        rng = np.random.default_rng(seed)
        i, j, k = rng.integers(0, self.size, size=(3, n_triples))
        return bool(np.all(D[i, k] <= D[i, j] + D[j, k] + self.tol))


def _hop_graph(space: FiniteMetricSpace, eps: float) -> sparse.csr_matrix:
    D = space.dist
    mask = (D < eps - space.tol) & (D > 0)
    i, j = np.nonzero(mask)
    return sparse.csr_matrix((D[i, j], (i, j)), shape=D.shape)


def chain_metric_matrix(space: FiniteMetricSpace, eps: float, sources=None, return_predecessors=False):
    """Rows ``d_eps(x, .)`` for ``x`` in ``sources`` (all points by default)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    G = _hop_graph(space, eps)
    idx = np.arange(space.size) if sources is None else np.atleast_1d(sources)
    return csgraph.dijkstra(G, directed=False, indices=idx, return_predecessors=return_predecessors)


def chain_metric(space: FiniteMetricSpace, eps: float, x: int, y: int) -> float:
    """``d_eps(x, y)``: shortest total length of a chain from x to y whose hops are all shorter than eps."""
    if x == y:
        return 0.0
    return float(chain_metric_matrix(space, eps, [x])[0, y])


def sample_pairs(n: int, max_all: int = 2000, n_samples: int = 100_000, seed: int = 0):
    """All unordered pairs when ``n <= max_all``, otherwise seeded random distinct pairs."""
    if n <= max_all:
        return np.triu_indices(n, 1)
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, n_samples)
    j = rng.integers(0, n - 1, n_samples)
    j = j + (j >= i)
    return i, j


def chain_constant(space: FiniteMetricSpace, eps_list, seed: int = 0) -> dict:
    """``max d_eps / d`` over sampled pairs for every ``eps`` in the list.

    Returns ``{"C": overall maximum, "per_eps": {eps: C_eps}}``; pairs with no
    eps-chain make the constant infinite.
    """
    eps_list = list(eps_list)
    if not eps_list:
        raise ValueError("need at least one eps")
    i, j = sample_pairs(space.size, seed=seed)
    d = space.dist[i, j]
    per = {}
    for eps in eps_list:
        D = chain_metric_matrix(space, eps)
        per[float(eps)] = float(np.max(D[i, j] / d)) if len(d) else 1.0
    return {"C": max(per.values()), "per_eps": per}


def epsilon_net(space: FiniteMetricSpace, eps: float) -> np.ndarray:
    """Greedy maximal eps-separated set, scanning points in ascending index order.

    A point joins the net unless it is strictly within eps of an earlier net
    point, so the net is eps-separated (``d >= eps``) and covers every point
    within distance ``< eps``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    covered = np.zeros(space.size, dtype=bool)
    net = []
    for x in range(space.size):
        if covered[x]:
            continue
        net.append(x)
        covered |= space.dist[x] < eps - space.tol
    return np.asarray(net, dtype=np.int64)


def chain_midpoint(space: FiniteMetricSpace, eps: float, x: int, y: int):
    """Chain midpoint between x and y.

    Takes a shortest eps-chain ``x = x_0, ..., x_N = y`` and returns the first
    ``x_k`` whose cumulative chain length reaches half of ``d_eps(x, y)``.
    Returns ``(z, chain)``.
    """
    if x == y:
        return x, [x]
    dist, pred = chain_metric_matrix(space, eps, [x], return_predecessors=True)
    if not np.isfinite(dist[0, y]):
        raise ValueError(f"no eps-chain from {x} to {y} at eps={eps}")
    chain = [y]
    while chain[-1] != x:
        chain.append(int(pred[0, chain[-1]]))
    chain.reverse()
    hops = space.dist[chain[:-1], chain[1:]]
    cum = np.concatenate([[0.0], np.cumsum(hops)])
    half = 0.5 * cum[-1]
    k = int(np.flatnonzero(cum >= half - space.tol)[0])
    return chain[k], chain
