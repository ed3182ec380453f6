"""Discrete Dirichlet forms on gasket graphs.

The base form on the N + 1 corners is ``E0(f, f) = sum_{j<k} (f_j - f_k)^2``.
The depth-n form is the sum of cell copies of ``E0`` divided by
``R_n = r_{l_1} ... r_{l_n}``, where ``r_l`` is the factor by which tracing the
unscaled level-1 network back onto the corners multiplies ``E0``.

Two arithmetic backends are used: exact ``Fraction`` elimination for the small
level-1 networks that define ``r_l``, and floating sparse factorization for
everything at depth n.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse import linalg as splinalg

from .geometry import CellMeasure, GasketGraph, GasketSpec, build_graph, count_s

log = logging.getLogger(__name__)

__all__ = [
    "QuadraticForm",
    "ScaledFormParams",
    "VertexMeasure",
    "SingularInteriorError",
    "ProportionalityError",
    "base_form",
    "trace_form",
    "exact_trace",
    "level_one_form",
    "resistance_scale",
    "trace_proportionality",
    "assemble_form",
    "dirichlet_solve",
    "harmonic_extend",
    "cell_energy_measure",
    "vertex_energy_measure",
    "vertex_measure",
]

SOLVER_RTOL = 1e-12


class SingularInteriorError(ValueError):
    """An interior component has no contact with the boundary."""


class ProportionalityError(RuntimeError):
    """A traced level-1 form is not a multiple of the base form."""


@dataclass
class QuadraticForm:
    """``energy(f, g) = f . A . g`` for a symmetric zero-row-sum matrix ``A``."""

    matrix: sparse.csr_matrix

    def __post_init__(self):
        self.matrix = sparse.csr_matrix(self.matrix, dtype=float)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def energy(self, f, g=None) -> float:
        f = np.asarray(f, dtype=float)
        g = f if g is None else np.asarray(g, dtype=float)
        return float(f @ (self.matrix @ g))

    def conductances(self) -> sparse.coo_matrix:
        """Off-diagonal conductances ``c(u, v) = -A[u, v]`` as a symmetric COO matrix."""
        C = -self.matrix.tocoo()
        keep = C.row != C.col
        return sparse.coo_matrix((C.data[keep], (C.row[keep], C.col[keep])), shape=C.shape)

    def check(self, atol: float = 1e-9) -> None:
        """Raise if the matrix is not symmetric with zero row sums."""
        A = self.matrix
        scale = max(1.0, abs(A).max())
        if abs(A - A.T).max() > atol * scale:
            raise ValueError("form matrix is not symmetric")
        if np.abs(np.asarray(A.sum(axis=1))).max() > atol * scale:
            raise ValueError("form matrix rows do not sum to zero")


@dataclass
class VertexMeasure:
    """Nonnegative mass per vertex."""

    mass: np.ndarray

    @property
    def total(self) -> float:
        return float(self.mass.sum())


def vertex_measure(cells: CellMeasure) -> VertexMeasure:
    """Vertex masses obtained by splitting each cell's mass equally among its corners."""
    return VertexMeasure(cells.to_vertices())


def base_form(N: int) -> QuadraticForm:
    """``(N + 1) I - J`` on the N + 1 corners of the simplex."""
    if N < 2:
        raise ValueError("dimension must be >= 2")
    n = N + 1
    return QuadraticForm(sparse.csr_matrix((n) * np.eye(n) - np.ones((n, n))))


def _interior(n: int, boundary) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[np.asarray(boundary, dtype=np.int64)] = False
    return np.flatnonzero(mask)


def _check_reaches_boundary(A: sparse.csr_matrix, interior: np.ndarray) -> None:
    if interior.size == 0:
        return
    n = A.shape[0]
    sub = A[interior][:, interior]
    ncomp, labels = csgraph.connected_components(sub != 0, directed=False)
    bmask = np.ones(n, dtype=bool)
    bmask[interior] = False
    touches = np.asarray((A[interior][:, bmask] != 0).sum(axis=1)).ravel() > 0
    reached = np.zeros(ncomp, dtype=bool)
    np.logical_or.at(reached, labels, touches)
    if not reached.all():
        raise SingularInteriorError(
            f"{int((~reached).sum())} interior component(s) have no boundary contact"
        )


def trace_form(form: QuadraticForm, boundary) -> QuadraticForm:
    """Schur complement of ``form`` onto ``boundary`` (in the given order)."""
    boundary = np.asarray(boundary, dtype=np.int64)
    if boundary.size == 0:
        raise ValueError("boundary must be non-empty")
    A = form.matrix
    interior = _interior(A.shape[0], boundary)
    Abb = A[boundary][:, boundary].toarray()
    if interior.size == 0:
        return QuadraticForm(sparse.csr_matrix(Abb))
    _check_reaches_boundary(A, interior)
    Aii = A[interior][:, interior].tocsc()
    Aib = A[interior][:, boundary].toarray()
    X = splinalg.splu(Aii).solve(Aib)
    T = Abb - Aib.T @ X
    return QuadraticForm(sparse.csr_matrix(0.5 * (T + T.T)))


def exact_trace(matrix: Sequence[Sequence], boundary: Sequence[int]) -> list[list[Fraction]]:
    """Exact Schur complement by rational Gaussian elimination of interior rows.

    ``matrix`` is a dense square array of integers or Fractions.
    """
    n = len(matrix)
    rows = [{j: Fraction(v) for j, v in enumerate(r) if v != 0} for r in matrix]
    bset = set(int(b) for b in boundary)
    for p in range(n - 1, -1, -1):
        if p in bset:
            continue
        row_p = rows[p]
        piv = row_p.get(p, Fraction(0))
        if piv == 0:
            raise SingularInteriorError(f"zero pivot at interior vertex {p}")
        nbrs = [k for k in row_p if k != p]
        for i in nbrs:
            row_i = rows[i]
            factor = row_i.pop(p) / piv
            for j in nbrs:
                v = row_i.get(j, 0) - factor * row_p[j]
                if v == 0:
                    row_i.pop(j, None)
                else:
                    row_i[j] = v
        rows[p] = {}
    b = [int(x) for x in boundary]
    return [[rows[i].get(j, Fraction(0)) for j in b] for i in b]


def level_one_form(N: int, l: int) -> tuple[QuadraticForm, np.ndarray]:
    """Unscaled sum of cell copies of ``E0`` on the level-1 network, and its corner indices."""
    g = build_graph(GasketSpec(N, (l,)), 1)
    L = (g.adjacency.multiply(-1)).tolil()
    L.setdiag(np.asarray(g.adjacency.sum(axis=1)).ravel())
    return QuadraticForm(L.tocsr()), g.boundary


@lru_cache(maxsize=None)
def _exact_r(N: int, l: int) -> Fraction:
    form, corners = level_one_form(N, l)
    M = form.matrix.toarray()
    dense = [[int(round(v)) for v in row] for row in M]
    T = exact_trace(dense, corners)
    r = T[0][0] / N
    for i in range(N + 1):
        for j in range(N + 1):
            want = r * (N if i == j else -1)
            if T[i][j] != want:
                raise ProportionalityError(
                    f"trace of the level-{l} network (N={N}) is not proportional to E0 "
                    f"at entry ({i}, {j}): {T[i][j]} vs {want}"
                )
    return r


def trace_proportionality(N: int, l: int) -> tuple[float, float]:
    """Floating-point route: ``(r, residual)`` with ``residual`` the max-norm
    distance of the traced level-1 form from ``r * base_form(N)``, relative to ``r``."""
    form, corners = level_one_form(N, l)
    T = trace_form(form, corners).matrix.toarray()
    B = base_form(N).matrix.toarray()
    r = float((T * B).sum() / (B * B).sum())
    residual = float(np.abs(T - r * B).max() / abs(r))
    return r, residual


def resistance_scale(N: int, l: int, exact: bool = True, rtol: float = 1e-10):
    """Renormalization factor ``r_l`` of the level-l gasket in dimension N.

    With ``exact=True`` (default) this is a ``Fraction`` certified by rational
    elimination; otherwise a float from sparse factorization, checked for
    proportionality to ``rtol``.

    >>> resistance_scale(2, 2)
    Fraction(3, 5)
    """
    if N < 2 or l < 2:
        raise ValueError("need N >= 2 and l >= 2")
    if exact:
        r = _exact_r(int(N), int(l))
    else:
        r, residual = trace_proportionality(N, l)
        if residual > rtol:
            raise ProportionalityError(f"proportionality residual {residual:.3e} exceeds {rtol}")
    if not 0 < r < 1:
        raise ProportionalityError(f"r_{l} = {r} lies outside (0, 1)")
    return r


@dataclass(frozen=True)
class ScaledFormParams:
    """Per-depth renormalization data ``R_n`` and ``M_n`` of a level sequence."""

    dimension: int
    levels: tuple[int, ...]
    r: tuple[Fraction, ...]

    @classmethod
    def for_spec(cls, spec: GasketSpec, depth: int | None = None) -> "ScaledFormParams":
        depth = spec.max_depth if depth is None else depth
        levels = tuple(spec.levels[:depth])
        return cls(spec.dimension, levels, tuple(resistance_scale(spec.dimension, l) for l in levels))

    @property
    def depth(self) -> int:
        return len(self.levels)

    def R(self, n: int) -> float:
        out = Fraction(1)
        for r in self.r[:n]:
            out *= r
        return float(out)

    def M(self, n: int) -> int:
        out = 1
        for l in self.levels[:n]:
            out *= count_s(l, self.dimension)
        return out


def _check_params(graph: GasketGraph, params: ScaledFormParams) -> None:
    if graph.dimension != params.dimension:
        raise ValueError("graph and params have different dimensions")
    if graph.depth > params.depth:
        raise ValueError(f"params cover depth {params.depth} < graph depth {graph.depth}")
    if tuple(graph.spec.levels[: graph.depth]) != params.levels[: graph.depth]:
        raise ValueError("graph and params have different level sequences")


def assemble_form(graph: GasketGraph, params: ScaledFormParams | None = None) -> QuadraticForm:
    """The depth-n form ``(1/R_n) * sum_w E0(f o F_w)`` as a sparse Laplacian."""
    if params is None:
        params = ScaledFormParams.for_spec(graph.spec, graph.depth)
    _check_params(graph, params)
    W = graph.adjacency / params.R(graph.depth)
    deg = np.asarray(W.sum(axis=1)).ravel()
    return QuadraticForm((sparse.diags(deg) - W).tocsr())


def dirichlet_solve(form: QuadraticForm, boundary, values, method: str = "direct") -> np.ndarray:
    """Energy minimizer agreeing with ``values`` on ``boundary``.

    ``method="cg"`` runs conjugate gradients to relative residual 1e-12 and
    falls back to sparse LU if that fails.
    """
    boundary = np.asarray(boundary, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    if boundary.size == 0:
        raise ValueError("boundary must be non-empty")
    if values.shape != boundary.shape:
        raise ValueError("values must match boundary")
    A = form.matrix
    n = A.shape[0]
    interior = _interior(n, boundary)
    h = np.empty(n)
    h[boundary] = values
    if interior.size == 0:
        return h
    _check_reaches_boundary(A, interior)
    Aii = A[interior][:, interior].tocsc()
    rhs = -(A[interior][:, boundary] @ values)
    x = None
    if method == "cg":
        x, info = splinalg.cg(Aii, rhs, rtol=SOLVER_RTOL, atol=0.0, maxiter=10 * interior.size)
        res = np.linalg.norm(Aii @ x - rhs)
        if info != 0 or res > SOLVER_RTOL * max(np.linalg.norm(rhs), 1e-300) * 10:
            log.warning("CG did not reach rtol %.0e (info=%d); falling back to LU", SOLVER_RTOL, info)
            x = None
    elif method != "direct":
        raise ValueError(f"unknown method {method!r}")
    if x is None:
        x = splinalg.splu(Aii).solve(rhs)
    h[interior] = x
    return h


def harmonic_extend(
    graph_prev: GasketGraph,
    graph_next: GasketGraph,
    f,
    params: ScaledFormParams | None = None,
) -> np.ndarray:
    """Harmonic extension of ``f`` on ``V_{n-1}`` to ``V_n``."""
    if graph_next.depth != graph_prev.depth + 1:
        raise ValueError("graph_next must refine graph_prev by exactly one level")
    f = np.asarray(f, dtype=float)
    if f.shape != (graph_prev.n_vertices,):
        raise ValueError("f must give one value per vertex of graph_prev")
    idx = graph_next.parent_vertex_indices(graph_prev)
    form = assemble_form(graph_next, params)
    return dirichlet_solve(form, idx, f)


def cell_energy_measure(graph: GasketGraph, params: ScaledFormParams | None, f) -> CellMeasure:
    """Cell masses ``(1/R_n) * E0(f on cell w)``; they sum to the depth-n energy."""
    if params is None:
        params = ScaledFormParams.for_spec(graph.spec, graph.depth)
    _check_params(graph, params)
    F = np.asarray(f, dtype=float)[graph.cells]
    k = graph.dimension + 1
    iu, ju = np.triu_indices(k, 1)
    e = ((F[:, iu] - F[:, ju]) ** 2).sum(axis=1)
    return CellMeasure(graph, e / params.R(graph.depth))


def vertex_energy_measure(form: QuadraticForm, f) -> VertexMeasure:
    """``Gamma(v) = 1/2 sum_u c(u, v) (f(u) - f(v))^2``.

    Satisfies ``sum_v g(v) Gamma(v) = E(f, f g) - E(f^2, g) / 2`` for every ``g``.
    """
    f = np.asarray(f, dtype=float)
    C = form.conductances()
    contrib = 0.5 * C.data * (f[C.row] - f[C.col]) ** 2
    return VertexMeasure(np.bincount(C.row, weights=contrib, minlength=form.size))
