"""Cell complexes of N-dimensional scale-irregular Sierpinski gaskets.

Vertices are addressed by integer barycentric coordinates ``(a_1, ..., a_N)``
relative to the corner ``q_0`` with common denominator ``L_n = l_1 * ... * l_n``,
so gluing of neighbouring cells is exact integer deduplication.  A depth-n cell
``F_w(simplex)`` is stored by the key of its ``q_0``-image; its other corners are
that key plus the unit vectors, since every depth-n cell has side ``1/L_n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

__all__ = [
    "GasketSpec",
    "GasketGraph",
    "CellMeasure",
    "enumerate_s",
    "count_s",
    "build_graph",
    "uniform_cell_measure",
    "graph_distance",
    "simplex_gram",
]

# L_n and M_n are exact Python ints; vertex keys are int64 and must stay below this
_INT64_SAFE = 2**62


@lru_cache(maxsize=None)
def _enumerate_s(l: int, N: int) -> tuple[tuple[int, ...], ...]:
    out = [
        idx
        for idx in itertools.product(range(l), repeat=N)
        if sum(idx) <= l - 1
    ]
    return tuple(sorted(out))


def enumerate_s(l: int, N: int) -> list[tuple[int, ...]]:
    """All multi-indices ``i`` in ``N`` nonnegative entries with ``sum(i) <= l - 1``.

    Returned in lexicographic order; there are ``binomial(l - 1 + N, N)`` of them.
    """
    if int(l) != l or int(N) != N:
        raise ValueError("level and dimension must be integers")
    if l < 2:
        raise ValueError(f"level must be >= 2, got {l}")
    if N < 2:
        raise ValueError(f"dimension must be >= 2, got {N}")
    return list(_enumerate_s(int(l), int(N)))


def count_s(l: int, N: int) -> int:
    """``#S_l``, the number of level-l cells in one subdivision step."""
    if l < 2 or N < 2:
        raise ValueError("need l >= 2 and N >= 2")
    return math.comb(l - 1 + N, N)


@dataclass(frozen=True)
class GasketSpec:
    """Dimension and level sequence of a scale-irregular gasket."""

    dimension: int
    levels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(l) for l in self.levels))
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.dimension}")
        if len(self.levels) == 0:
            raise ValueError("levels must be a non-empty sequence")
        bad = [l for l in self.levels if l < 2]
        if bad:
            raise ValueError(f"every level must be >= 2, got {bad}")

    @classmethod
    def constant(cls, dimension: int, level: int, depth: int) -> "GasketSpec":
        return cls(dimension, (level,) * max(depth, 1))

    @property
    def is_constant(self) -> bool:
        return len(set(self.levels)) == 1

    @property
    def max_depth(self) -> int:
        return len(self.levels)

    def L(self, n: int) -> int:
        """Side-length denominator ``L_n`` (exact integer)."""
        return math.prod(self.levels[:n])

    def M(self, n: int) -> int:
        """Number of depth-n cells ``M_n`` (exact integer)."""
        return math.prod(count_s(l, self.dimension) for l in self.levels[:n])


@dataclass(eq=False)
class GasketGraph:
    """Depth-n cell graph of a gasket.

    ``keys[v]`` is the integer coordinate vector of vertex ``v`` over the
    denominator ``L``; ``cells[w]`` lists the ``N + 1`` vertex indices of cell
    ``w`` in corner order ``q_0, q_1, ..., q_N``; ``digits[w, k]`` is the index
    of the k-th letter of the word of cell ``w`` inside ``enumerate_s(l_{k+1}, N)``.
    Cells are in lexicographic word order, so the children of a depth-(n-1)
    cell ``p`` are the contiguous block ``p * #S_{l_n} + (0 .. #S_{l_n} - 1)``.
    """

    spec: GasketSpec
    depth: int
    keys: np.ndarray
    cells: np.ndarray
    digits: np.ndarray
    edges: np.ndarray
    edge_multiplicity: np.ndarray
    boundary: np.ndarray
    L: int
    M: int
    _key_index: dict = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def n_vertices(self) -> int:
        return int(self.keys.shape[0])

    @property
    def n_cells(self) -> int:
        return int(self.cells.shape[0])

    @property
    def edge_length(self) -> float:
        return 1.0 / self.L

    def word(self, w: int) -> tuple[tuple[int, ...], ...]:
        """The word ``w_1 ... w_n`` of cell ``w`` as a tuple of multi-indices."""
        N = self.dimension
        return tuple(
            enumerate_s(self.spec.levels[k], N)[int(d)]
            for k, d in enumerate(self.digits[w])
        )

    def index_of(self, key) -> int:
        """Dense index of the vertex with integer coordinates ``key``."""
        if self._key_index is None:
            self._key_index = {tuple(int(a) for a in k): i for i, k in enumerate(self.keys)}
        try:
            return self._key_index[tuple(int(a) for a in key)]
        except KeyError:
            raise KeyError(f"no vertex with key {tuple(key)} at depth {self.depth}") from None

    def indices_of(self, keys) -> np.ndarray:
        return np.array([self.index_of(k) for k in keys], dtype=np.int64)

    def parent_vertex_indices(self, coarser: "GasketGraph") -> np.ndarray:
        """Indices in ``self`` of the vertices of ``coarser`` (``V_{n-1}`` inside ``V_n``)."""
        if coarser.spec.dimension != self.spec.dimension or coarser.depth >= self.depth:
            raise ValueError("coarser graph must be a shallower graph of the same gasket")
        if tuple(coarser.spec.levels[: coarser.depth]) != tuple(self.spec.levels[: coarser.depth]):
            raise ValueError("level sequences disagree on the common depths")
        factor = self.L // coarser.L
        return self.indices_of(coarser.keys * factor)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric edge-multiplicity matrix."""
        n = self.n_vertices
        i, j = self.edges[:, 0], self.edges[:, 1]
        w = self.edge_multiplicity.astype(float)
        A = sparse.coo_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])), shape=(n, n))
        return A.tocsr()

    @cached_property
    def hop_matrix(self) -> np.ndarray:
        """All-pairs shortest-path hop counts (int32)."""
        H = csgraph.shortest_path(self.adjacency, method="D", unweighted=True)
        return H.astype(np.int32)

    def euclidean_points(self) -> np.ndarray:
        """Float coordinates in R^N of a regular simplex with side length 1."""
        chol = np.linalg.cholesky(simplex_gram(self.dimension))
        return (np.asarray(self.keys, dtype=float) / self.L) @ chol

    def euclidean_distances(self) -> np.ndarray:
        P = self.euclidean_points()
        diff = P[:, None, :] - P[None, :, :]
        return np.sqrt((diff**2).sum(-1))


def simplex_gram(N: int) -> np.ndarray:
    """Gram matrix of the edge vectors ``q_k - q_0`` of a unit regular simplex."""
    return 0.5 * (np.ones((N, N)) + np.eye(N))


def _cell_offsets(spec: GasketSpec, depth: int):
    N = spec.dimension
    if spec.L(depth) >= _INT64_SAFE:
        raise OverflowError(f"L_{depth} = {spec.L(depth)} does not fit int64 vertex keys")
    dtype = np.int64
    offsets = np.zeros((1, N), dtype=dtype)
    digits = np.zeros((1, 0), dtype=np.int16)
    for k in range(depth):
        l = spec.levels[k]
        S = np.array(enumerate_s(l, N), dtype=dtype)
        nS = S.shape[0]
        offsets = (offsets[:, None, :] * l + S[None, :, :]).reshape(-1, N)
        digits = np.concatenate(
            [np.repeat(digits, nS, axis=0), np.tile(np.arange(nS, dtype=np.int16), digits.shape[0])[:, None]],
            axis=1,
        )
    return offsets, digits


def build_graph(spec: GasketSpec, depth: int) -> GasketGraph:
    """Cell graph approximating the gasket at ``depth`` subdivisions.

    >>> g = build_graph(GasketSpec(2, (2,)), 1)
    >>> g.n_vertices, g.n_cells, len(g.edges)
    (6, 3, 9)
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth > spec.max_depth:
        raise ValueError(f"depth {depth} exceeds the {spec.max_depth} available levels")
    N = spec.dimension
    offsets, digits = _cell_offsets(spec, depth)
    M = offsets.shape[0]
    corners = np.vstack([np.zeros(N, dtype=np.int64), np.eye(N, dtype=np.int64)])
    allkeys = (offsets[:, None, :] + corners[None, :, :]).reshape(-1, N)

    keys, inverse = np.unique(allkeys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    cells = inverse.reshape(M, N + 1)

    pairs = np.array(list(itertools.combinations(range(N + 1), 2)))
    e = np.sort(cells[:, pairs].reshape(-1, 2), axis=1)
    edges, mult = np.unique(e, axis=0, return_counts=True)

    L = spec.L(depth)
    graph = GasketGraph(
        spec=spec,
        depth=depth,
        keys=keys,
        cells=cells,
        digits=digits,
        edges=edges,
        edge_multiplicity=mult,
        boundary=np.zeros(N + 1, dtype=np.int64),
        L=L,
        M=spec.M(depth),
    )
    graph.boundary = graph.indices_of([c * L for c in corners])
    return graph


@dataclass
class CellMeasure:
    """Nonnegative mass per depth-n cell, in the graph's cell order."""

    graph: GasketGraph
    mass: np.ndarray

    @property
    def depth(self) -> int:
        return self.graph.depth

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def coarsen(self, steps: int = 1) -> np.ndarray:
        """Masses of the ancestor cells ``steps`` levels up."""
        mass = self.mass
        levels = self.graph.spec.levels
        N = self.graph.dimension
        for k in range(steps):
            nS = count_s(levels[self.depth - 1 - k], N)
            mass = mass.reshape(-1, nS).sum(axis=1)
        return mass

    def as_dict(self) -> dict:
        """Map word -> mass."""
        return {self.graph.word(w): float(m) for w, m in enumerate(self.mass)}

    def to_vertices(self) -> np.ndarray:
        """Equal split of each cell's mass among its N + 1 corners."""
        g = self.graph
        share = np.repeat(self.mass / (g.dimension + 1), g.dimension + 1)
        return np.bincount(g.cells.reshape(-1), weights=share, minlength=g.n_vertices)


def uniform_cell_measure(graph: GasketGraph) -> CellMeasure:
    """Every depth-n cell carries mass ``1/M_n``."""
    return CellMeasure(graph, np.full(graph.n_cells, 1.0 / graph.M))


def graph_distance(graph: GasketGraph, u: int, v: int) -> float:
    """Shortest-path length with every edge of length ``1/L_n``."""
    n = graph.n_vertices
    if not (0 <= u < n and 0 <= v < n):
        raise IndexError("vertex index out of range")
    if u == v:
        return 0.0
    d = csgraph.shortest_path(graph.adjacency, method="D", unweighted=True, indices=[u])[0, v]
    return float(d) / graph.L
