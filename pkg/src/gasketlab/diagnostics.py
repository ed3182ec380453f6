"""Measure comparisons: doubling, Poincare constants, differentiation, maximal
function, concentration of energy measures and heat-kernel envelopes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chainmetric import FiniteMetricSpace
from .forms import QuadraticForm, vertex_energy_measure
from .geometry import CellMeasure
from .scaling import phi_eval

__all__ = [
    "vd_constant",
    "poincare_constant",
    "differentiation_ratios",
    "weighted_median",
    "maximal_function",
    "maximal_inequality_check",
    "ConcentrationProfile",
    "concentration_profile",
    "entropy_rate",
    "EnvelopeReport",
    "heat_kernel_envelope_check",
]

MAX_CENTERS = 2000


def _centers(space: FiniteMetricSpace, centers, seed: int):
    if centers is not None:
        return np.asarray(centers, dtype=np.int64)
    if space.size <= MAX_CENTERS:
        return np.arange(space.size)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(space.size, MAX_CENTERS, replace=False))


def vd_constant(space: FiniteMetricSpace, radii, centers=None, seed: int = 0) -> float:
    """``max m(B(x, 2r)) / m(B(x, r))`` over centers and radii."""
    x = _centers(space, centers, seed)
    D = space.dist[x]
    best = 1.0
    for r in np.atleast_1d(radii):
        small = (D < r - space.tol) @ space.mass
        if np.any(small <= 0):
            raise ValueError(f"empty ball at radius {r}")
        big = (D < 2 * r - space.tol) @ space.mass
        best = max(best, float(np.max(big / small)))
    return best


def poincare_constant(
    form: QuadraticForm,
    space: FiniteMetricSpace,
    psi,
    r: float,
    functions,
    A: float = 2.0,
    centers=None,
    seed: int = 0,
) -> float:
    """``max int_B |f - f_B|^2 dm / (Psi(r) Gamma(f)(B(x, A r)))`` over centers and functions.

    Pairs where the energy on ``B(x, A r)`` vanishes are skipped (then the
    function is constant on the smaller ball as well).
    """
    x = _centers(space, centers, seed)
    D = space.dist[x]
    Bs = D < r - space.tol
    BA = D < A * r - space.tol
    pr = float(psi(r))
    best = 0.0
    for f in functions:
        f = np.asarray(f, dtype=float)
        gam = vertex_energy_measure(form, f).mass
        w = Bs * space.mass
        mb = w.sum(axis=1)
        avg = (w @ f) / mb
        var = (w * (f[None, :] - avg[:, None]) ** 2).sum(axis=1)
        en = BA @ gam
        ok = en > 1e-14 * max(gam.sum(), 1e-300)
        if ok.any():
            best = max(best, float(np.max(var[ok] / (pr * en[ok]))))
    return best


def _vertex_masses(measure) -> np.ndarray:
    if isinstance(measure, CellMeasure):
        return measure.to_vertices()
    return np.asarray(getattr(measure, "mass", measure), dtype=float)


def differentiation_ratios(nu, m, space: FiniteMetricSpace, x, radii) -> np.ndarray:
    """``nu(B(x, r)) / m(B(x, r))`` for each radius (rows follow ``x`` if it is an array)."""
    nv, mv = _vertex_masses(nu), _vertex_masses(m)
    xs = np.atleast_1d(x)
    out = np.empty((xs.size, len(radii)))
    for k, r in enumerate(radii):
        ball = space.dist[xs] < r - space.tol
        mb = ball @ mv
        if np.any(mb <= 0):
            raise ValueError(f"empty ball at radius {r}")
        out[:, k] = (ball @ nv) / mb
    return out[0] if np.ndim(x) == 0 else out


def weighted_median(values, weights) -> float:
    """Lower weighted median."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    cw = np.cumsum(weights[order])
    k = int(np.searchsorted(cw, 0.5 * cw[-1]))
    return float(values[order][k])


def maximal_function(nu, m, space: FiniteMetricSpace) -> np.ndarray:
    """``M nu(x) = max_r nu(B(x, r)) / m(B(x, r))`` over the lattice radii ``j * unit``."""
    nv, mv = _vertex_masses(nu), _vertex_masses(m)
    Tn = space.ball_mass_table(nv)[:, 1:]
    Tm = space.ball_mass_table(mv)[:, 1:]
    return np.max(Tn / Tm, axis=1)


def maximal_inequality_check(nu, m, space: FiniteMetricSpace, lambdas=None) -> dict:
    """``max_lambda m{M nu > lambda} * lambda / nu(X)`` and the doubling bound ``C_D^2``."""
    nv, mv = _vertex_masses(nu), _vertex_masses(m)
    total = nv.sum()
    if total <= 0:
        raise ValueError("nu has zero mass")
    Mf = maximal_function(nv, mv, space)
    if lambdas is None:
        avg = total / mv.sum()
        lambdas = avg * np.logspace(-1, np.log10(max(Mf.max() / avg, 10.0)) + 0.5, 60)
    lambdas = np.asarray(lambdas, dtype=float)
    prod = np.array([mv[Mf > lam].sum() * lam / total for lam in lambdas])
    Tm = space.ball_mass_table(mv)
    J = Tm.shape[1] - 1
    j = np.arange(1, J // 2 + 1)
    CD = float(np.max(Tm[:, np.minimum(2 * j, J)] / Tm[:, j]))
    return {
        "constant": float(prod.max()),
        "C_D": CD,
        "bound": CD**2,
        "ok": bool(prod.max() <= CD**2),
        "lambdas": lambdas,
        "products": prod,
    }


def entropy_rate(gamma, m, depth: int) -> float:
    """``(1/n) sum_w G(w) log(G(w) / m(w))`` with both measures normalized."""
    g = np.asarray(gamma, dtype=float)
    mm = np.asarray(m, dtype=float)
    g = g / g.sum()
    mm = mm / mm.sum()
    pos = g > 0
    kl = float(np.sum(g[pos] * np.log(g[pos] / mm[pos])))
    return kl / depth if depth > 0 else kl


@dataclass
class ConcentrationProfile:
    depth: int
    delta: float
    min_mass: float
    entropy_rate: float
    densities: np.ndarray = field(repr=False)
    lorenz_m: np.ndarray = field(repr=False)
    lorenz_gamma: np.ndarray = field(repr=False)


def concentration_profile(gamma: CellMeasure, m: CellMeasure, delta: float = 0.01) -> ConcentrationProfile:
    """Sort cells by density ``Gamma/m`` and report the m-mass carrying ``1 - delta`` of Gamma.

    The Lorenz curve ``(cumulative m, cumulative Gamma)`` is piecewise linear,
    so the minimal mass is read off by linear interpolation inside the cell
    where the ``1 - delta`` level is crossed.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    g = np.asarray(gamma.mass, dtype=float)
    mm = np.asarray(m.mass, dtype=float)
    if g.shape != mm.shape:
        raise ValueError("measures must live on the same cells")
    if g.sum() <= 0:
        raise ValueError("Gamma has zero total mass")
    g = g / g.sum()
    mm = mm / mm.sum()
    dens = g / mm
    order = np.argsort(-dens, kind="stable")
    cg = np.concatenate([[0.0], np.cumsum(g[order])])
    cm = np.concatenate([[0.0], np.cumsum(mm[order])])
    target = 1.0 - delta
    k = int(np.searchsorted(cg, target - 1e-15))
    k = min(max(k, 1), len(cg) - 1)
    frac = (target - cg[k - 1]) / (cg[k] - cg[k - 1]) if cg[k] > cg[k - 1] else 1.0
    min_mass = float(cm[k - 1] + frac * (cm[k] - cm[k - 1]))
    return ConcentrationProfile(
        depth=gamma.depth,
        delta=delta,
        min_mass=min_mass,
        entropy_rate=entropy_rate(g, mm, gamma.depth),
        densities=dens[order],
        lorenz_m=cm,
        lorenz_gamma=cg,
    )


@dataclass
class EnvelopeReport:
    c3: float
    delta: float
    c3_by_group: dict
    C1: float
    c1: float
    c2: float
    upper_violations: int
    lower_violations: int
    tail_correlation: float
    n_samples: int


def heat_kernel_envelope_check(
    samples: dict,
    psi,
    delta: float = 0.5,
    c2_grid=(0.25, 0.5, 1.0),
    safety: float = 0.5,
) -> EnvelopeReport:
    """Fit the near-diagonal lower and the sub-Gaussian upper envelope.

    ``samples`` holds equal-length arrays ``t``, ``d``, ``p`` (kernel density),
    ``V`` (``m(B(x, Psi^{-1}(t)))``) and ``group`` (an id per depth/time scale).

    Lower: ``c3`` is the smallest ``p V`` among samples with ``d <= delta Psi^{-1}(t)``.
    Upper: for each ``c2`` the decay rate ``c1`` is ``safety`` times the least-squares
    slope of ``-log(p V)`` against ``Phi(c2 d, t)``; ``C1`` is then the smallest
    constant with no violations.  The ``c2`` with the largest ``c1 * c2`` wins.
    """
    t = np.asarray(samples["t"], dtype=float)
    d = np.asarray(samples["d"], dtype=float)
    p = np.asarray(samples["p"], dtype=float)
    V = np.asarray(samples["V"], dtype=float)
    grp = np.asarray(samples["group"])
    pv = p * V
    rinv = np.asarray(psi.inverse(t) if hasattr(psi, "inverse") else samples["psi_inv"], dtype=float)

    near = d <= delta * rinv + 1e-12
    if not near.any():
        raise ValueError("no near-diagonal samples")
    c3 = float(pv[near].min())
    c3_by = {str(gk): float(pv[near & (grp == gk)].min()) for gk in np.unique(grp[near])}
    lower_viol = int(np.sum(pv[near] < c3 * (1 - 1e-12)))

    pos = pv > 0
    y = np.log(pv[pos])
    best = None
    for c2 in c2_grid:
        keys = np.stack([np.round(d[pos] * 1e12), np.round(t[pos] * 1e15)], axis=1)
        uniq, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        vals = np.array([phi_eval(psi, c2 * d[pos][i], t[pos][i]) for i in first])
        xs = vals[inv.reshape(-1)]
        tail = xs > np.median(xs)
        if tail.sum() < 3:
            tail = np.ones_like(xs, dtype=bool)
        slope = np.polyfit(xs[tail], y[tail], 1)[0]
        c1 = float(max(-slope, 0.0) * safety)
        logC = float(np.max(y + c1 * xs))
        corr = float(np.corrcoef(xs[tail], y[tail])[0, 1]) if tail.sum() > 2 else float("nan")
        cand = (c1 * c2, c1, c2, logC, corr, xs)
        if best is None or cand[0] > best[0]:
            best = cand
    _, c1, c2, logC, corr, xs = best
    upper_viol = int(np.sum(y > logC - c1 * xs + 1e-12))
    return EnvelopeReport(
        c3=c3,
        delta=delta,
        c3_by_group=c3_by,
        C1=math.exp(logC),
        c1=c1,
        c2=c2,
        upper_violations=upper_viol,
        lower_violations=lower_viol,
        tail_correlation=corr,
        n_samples=int(t.size),
    )
