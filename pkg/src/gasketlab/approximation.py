"""Tent functions, Lipschitz partitions of unity and the two approximation schemes.

All functions act on vertex vectors of a gasket graph.  Metric quantities come
from a :class:`FiniteMetricSpace`, energies from an assembled :class:`QuadraticForm`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csgraph

from .chainmetric import FiniteMetricSpace, epsilon_net
from .forms import QuadraticForm, ScaledFormParams, cell_energy_measure, dirichlet_solve, vertex_energy_measure
from .geometry import GasketGraph

__all__ = [
    "tent_function",
    "lipschitz_constant",
    "PartitionFamily",
    "partition_of_unity",
    "ball_average_projection",
    "piecewise_harmonic_approx",
    "harmonic_in_ball",
    "reverse_poincare_check",
]


def tent_function(space: FiniteMetricSpace, x: int, r: float) -> np.ndarray:
    """``(1 - d(x, .)/r)^+``."""
    if r <= 0:
        raise ValueError("r must be positive")
    return np.maximum(1.0 - space.dist[x] / r, 0.0)


def lipschitz_constant(graph: GasketGraph, f) -> float:
    """Largest ``|f(u) - f(v)| / d(u, v)`` over edges.

    For the graph metric this is the global Lipschitz constant, since the metric
    is a path metric built from the edges.
    """
    f = np.asarray(f, dtype=float)
    e = graph.edges
    return float(np.max(np.abs(f[e[:, 0]] - f[e[:, 1]]))) * graph.L


@dataclass
class PartitionFamily:
    """Functions ``phi_z`` (rows of ``phi``) attached to net points ``net`` at scale ``eps``."""

    net: np.ndarray
    phi: np.ndarray
    eps: float
    denominator_min: float
    constants: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.net)


def partition_of_unity(
    space: FiniteMetricSpace,
    net,
    eps: float,
    graph: GasketGraph | None = None,
    form: QuadraticForm | None = None,
) -> PartitionFamily:
    """``phi_z = f_{z,2eps} / sum_w f_{w,2eps}`` over the net.

    With ``graph`` (and optionally ``form`` for the energy) the returned family
    carries measured constants in scale-free form:

    * ``sum_error``: max deviation of ``sum_z phi_z`` from 1,
    * ``support_ok``: ``0 <= phi_z <= 1`` and ``phi_z = 0`` off ``B(z, 2eps)``,
    * ``lipschitz``: ``eps * max_z Lip(phi_z)``,
    * ``density``: ``eps^2 * max_z max_cell Gamma(phi_z)(cell) / m(cell)``,
    * ``energy``: ``eps^2 * max_z E(phi_z) / m(B(z, eps))``.
    """
    net = np.asarray(net, dtype=np.int64)
    if net.size == 0:
        raise ValueError("net must be non-empty")
    F = np.maximum(1.0 - space.dist[net] / (2 * eps), 0.0)
    denom = F.sum(axis=0)
    dmin = float(denom.min())
    if dmin < 0.5 - 1e-12:
        raise ValueError(f"sum of tents drops to {dmin:.3g} < 1/2; the net is not maximal at eps={eps}")
    phi = F / denom
    fam = PartitionFamily(net=net, phi=phi, eps=eps, denominator_min=dmin)
    c = {
        "sum_error": float(np.max(np.abs(phi.sum(axis=0) - 1.0))),
        "support_ok": bool(
            np.all(phi >= 0) and np.all(phi <= 1 + 1e-15) and np.all(phi[space.dist[net] >= 2 * eps - space.tol] == 0)
        ),
    }
    if graph is not None:
        c["lipschitz"] = eps * max(lipschitz_constant(graph, p) for p in phi)
        if form is not None:
            params = ScaledFormParams.for_spec(graph.spec, graph.depth)
            dens, energy = 0.0, 0.0
            for z, p in zip(net, phi):
                e = cell_energy_measure(graph, params, p).mass
                dens = max(dens, float(e.max()) * graph.M)
                mb = float(space.mass[space.dist[z] < eps - space.tol].sum())
                energy = max(energy, form.energy(p) / mb)
            c["density"] = eps**2 * dens
            c["energy"] = eps**2 * energy
    fam.constants = c
    return fam


def ball_average_projection(space: FiniteMetricSpace, f, n: float, net=None) -> np.ndarray:
    """``sum_z f_{B(z, 1/n)} phi_z`` over a ``1/n``-net with m-weighted ball averages."""
    f = np.asarray(f, dtype=float)
    eps = 1.0 / n
    if eps >= space.diameter:
        raise ValueError("1/n must be below the diameter")
    if net is None:
        net = epsilon_net(space, eps)
    fam = partition_of_unity(space, net, eps)
    balls = space.dist[fam.net] < eps - space.tol
    w = balls * space.mass
    wm = w.sum(axis=1)
    if np.any(wm <= 0):
        raise ValueError("empty ball in the average")
    avg = (w @ f) / wm
    return avg @ fam.phi


def _free_components(form: QuadraticForm, free: np.ndarray):
    A = form.matrix.tocsr()
    idx = np.flatnonzero(free)
    sub = A[idx][:, idx]
    ncomp, labels = csgraph.connected_components(sub, directed=False)
    return idx, ncomp, labels


def _pinned_projection(form: QuadraticForm, f: np.ndarray, pinned: np.ndarray, weights, lo, hi) -> np.ndarray:
    """Harmonic on the free set with ``f`` on ``pinned``; clipped into ``[lo, hi]`` per vertex."""
    out = f.copy()
    free = ~pinned
    if not free.any():
        return out
    if not pinned.any():
        c = float(np.average(f, weights=weights))
        return np.clip(np.full_like(f, c), lo, hi)
    # components of the free set never touching a pinned vertex would be singular
    A = form.matrix.tocsr()
    idx, ncomp, labels = _free_components(form, free)
    touches = np.zeros(ncomp, dtype=bool)
    nbr_pinned = (abs(A[idx]) @ pinned.astype(float)) > 0
    touches[labels[nbr_pinned]] = True
    detached = idx[~touches[labels]]
    if detached.size:
        for k in np.flatnonzero(~touches):
            comp = idx[labels == k]
            out[comp] = float(np.average(f[comp], weights=weights[comp]))
        pinned = pinned.copy()
        pinned[detached] = True
    b = np.flatnonzero(pinned)
    out = dirichlet_solve(form, b, out[b])
    return np.clip(out, lo, hi)


def piecewise_harmonic_approx(
    form: QuadraticForm,
    f,
    n: int,
    method: str = "pinned",
    split: bool = False,
    weights=None,
) -> np.ndarray:
    """Piecewise harmonic approximation at resolution ``h = 2^-n``.

    ``method="layered"`` sums, over ``k``, the harmonic functions that vanish on
    ``{f <= k h}``, equal ``h`` on ``{f >= (k+1) h}`` and are harmonic between.

    ``method="pinned"`` keeps ``f`` on the vertices whose closed neighbourhood
    does not sit inside one open grid cell ``(k h, (k+1) h)`` (this includes
    every vertex with ``f`` on the grid) and is harmonic elsewhere.  The pinned
    sets grow with ``n``, so ``E(f_n)`` increases to at most ``E(f)`` with
    ``E(f) = E(f_n) + E(f - f_n)``.

    Both satisfy ``|f - f_n| <= h``.  Negative inputs need ``split=True``, which
    approximates the positive and negative parts separately.
    """
    f = np.asarray(f, dtype=float)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if np.any(f < 0):
        if not split:
            raise ValueError("f has negative values; pass split=True to treat f+ and f- separately")
        pos = piecewise_harmonic_approx(form, np.maximum(f, 0), n, method, weights=weights)
        neg = piecewise_harmonic_approx(form, np.maximum(-f, 0), n, method, weights=weights)
        return pos - neg
    w = np.ones_like(f) if weights is None else np.asarray(weights, dtype=float)
    h = 2.0**-n
    if method == "layered":
        return _layered(form, f, h, w)
    if method == "pinned":
        return _pinned(form, f, h, w)
    raise ValueError(f"unknown method {method!r}")


def _grid_cell(f: np.ndarray, h: float):
    # k with k h < f < (k+1) h, or -1 when f is on the grid (up to rounding)
    q = f / h
    k = np.floor(q)
    on_grid = np.isclose(q, np.round(q), rtol=0, atol=1e-12)
    return np.where(on_grid, -1, k).astype(np.int64)


def _pinned(form: QuadraticForm, f: np.ndarray, h: float, w: np.ndarray) -> np.ndarray:
    A = form.matrix.tocoo()
    cell = _grid_cell(f, h)
    pinned = cell < 0
    off = A.row != A.col
    r, c = A.row[off], A.col[off]
    # a neighbour outside [k h, (k+1) h] pins the vertex
    lo_v, hi_v = cell * h, (cell + 1) * h
    bad = (f[c] < lo_v[r] - 1e-12 * h) | (f[c] > hi_v[r] + 1e-12 * h)
    pinned[np.unique(r[bad])] = True
    lo = np.where(pinned, f, cell * h)
    hi = np.where(pinned, f, (cell + 1) * h)
    return _pinned_projection(form, f, pinned, w, lo, hi)


def _layered(form: QuadraticForm, f: np.ndarray, h: float, w: np.ndarray) -> np.ndarray:
    K = int(math.ceil(f.max() / h - 1e-12)) if f.max() > 0 else 0
    out = np.zeros_like(f)
    for k in range(K):
        low = f <= k * h + 1e-12 * h
        high = f >= (k + 1) * h - 1e-12 * h
        data = np.where(high, h, 0.0)
        data = np.where(low | high, data, np.clip(f - k * h, 0, h))
        out += _pinned_projection(form, data, low | high, w, 0.0, h)
    return out


def harmonic_in_ball(form: QuadraticForm, space: FiniteMetricSpace, f, x: int, R: float) -> np.ndarray:
    """Keep ``f`` off the open ball ``B(x, R)`` and replace it by the harmonic interpolant inside."""
    f = np.asarray(f, dtype=float)
    inside = space.dist[x] < R - space.tol
    if inside.all():
        raise ValueError("ball covers the whole space")
    b = np.flatnonzero(~inside)
    return dirichlet_solve(form, b, f[b])


def reverse_poincare_check(
    form: QuadraticForm,
    space: FiniteMetricSpace,
    psi,
    h,
    x: int,
    r: float,
    resolve: bool = False,
    atol: float = 1e-8,
) -> float:
    """``Gamma(h)(B(x,r)) * Psi(r) / inf_a int_{B(x,2r) minus B(x,r)} (h - a)^2 dm``.

    ``h`` must be harmonic on ``B(x, 2r)``; with ``resolve=True`` it is first
    replaced by the harmonic interpolant of its values outside that ball.
    """
    h = np.asarray(h, dtype=float)
    if resolve:
        h = harmonic_in_ball(form, space, h, x, 2 * r)
    big = space.dist[x] < 2 * r - space.tol
    small = space.dist[x] < r - space.tol
    resid = form.matrix @ h
    scale = max(1.0, float(np.abs(h).max())) * float(abs(form.matrix).max())
    if np.max(np.abs(resid[big]), initial=0.0) > atol * scale:
        raise ValueError("h is not harmonic on B(x, 2r)")
    ann = big & ~small
    m = space.mass[ann]
    if m.sum() <= 0:
        raise ValueError("annulus has zero mass")
    a = float(np.average(h[ann], weights=m))
    den = float(np.sum(m * (h[ann] - a) ** 2))
    num = float(vertex_energy_measure(form, h).mass[small].sum())
    if num == 0:
        return 0.0
    if den == 0:
        return math.inf
    return num * float(psi(r)) / den
