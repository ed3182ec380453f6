"""Walk dimensions, the space-time scale function and its Legendre-type transform."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .forms import resistance_scale
from .geometry import GasketSpec, count_s

__all__ = [
    "ScalingProfile",
    "walk_dimension",
    "linear_energy_ratio",
    "power_law",
    "psi_eval",
    "psi_inverse",
    "phi_eval",
    "phi_power_law",
    "verify_regularity",
    "RegimeReport",
    "classify_regime",
]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def linear_energy_ratio(N: int, l: int) -> Fraction:
    """``#S_l / r_l / l^2``: the energy gain of the linear coordinate function
    under one renormalized subdivision step.  It exceeds 1 exactly when the
    walk dimension exceeds 2."""
    return Fraction(count_s(l, N)) / resistance_scale(N, l) / (l * l)


def walk_dimension(N: int, l: int) -> float:
    """``beta_l = log_l(#S_l / r_l)``.

    Cross-checked against ``#S_l / r_l > l^2``; a value not above 2 means a
    broken construction and raises.
    """
    r = resistance_scale(N, l)
    ratio = Fraction(count_s(l, N)) / r
    beta = math.log(ratio.numerator / ratio.denominator) / math.log(l)
    if not beta > 2:
        raise ArithmeticError(f"beta_{l} = {beta} <= 2 for N={N}")
    if not linear_energy_ratio(N, l) > 1:
        raise ArithmeticError(f"#S_l/r_l <= l^2 for N={N}, l={l}")
    return beta


@dataclass
class ScalingProfile:
    """Scale data ``L_n, M_n, R_n, T_n`` and the piecewise power law Psi for a level sequence."""

    spec: GasketSpec
    L: list[int] = field(init=False)
    M: list[int] = field(init=False)
    R: list[float] = field(init=False)
    T: list[float] = field(init=False)
    beta: list[float] = field(init=False)

    def __post_init__(self):
        N = self.spec.dimension
        self.L, self.M, self.R, self.T, self.beta = [1], [1], [1.0], [1.0], []
        Rexact = Fraction(1)
        for l in self.spec.levels:
            Rexact *= resistance_scale(N, l)
            self.L.append(self.L[-1] * l)
            self.M.append(self.M[-1] * count_s(l, N))
            self.R.append(float(Rexact))
            self.T.append(float(Fraction(self.M[-1]) / Rexact))
            self.beta.append(walk_dimension(N, l))

    @property
    def depth(self) -> int:
        return len(self.spec.levels)

    @property
    def beta_min(self) -> float:
        return min(self.beta)

    @property
    def beta_max(self) -> float:
        return max(self.beta)

    def __call__(self, s):
        return psi_eval(self, s)

    def inverse(self, t):
        return psi_inverse(self, t)


def power_law(beta: float) -> Callable:
    """``Psi(r) = r ** beta`` as a vectorized callable."""

    def psi(s):
        return np.asarray(s, dtype=float) ** beta

    psi.beta = beta
    psi.inverse = lambda t: np.asarray(t, dtype=float) ** (1.0 / beta)
    return psi


def _branch_index(profile: ScalingProfile, s: np.ndarray) -> np.ndarray:
    # n with 1/L_n <= s <= 1/L_{n-1}; 0 for s >= 1; depth for anything finer
    inv_L = 1.0 / np.asarray(profile.L[1:], dtype=float)
    n = np.searchsorted(-inv_L, -s, side="right") + 1
    n = np.where(s >= 1.0, 0, np.minimum(n, profile.depth))
    return n


def psi_eval(profile: ScalingProfile, s):
    """Piecewise scale function: ``(L_n s)^{beta_{l_n}} / T_n`` on ``[1/L_n, 1/L_{n-1}]``,
    ``s^{beta_min}`` on ``[1, inf)``; below ``1/L_depth`` the last branch continues."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("Psi is defined for s >= 0")
    n = _branch_index(profile, s_arr)
    L = np.asarray(profile.L, dtype=float)
    T = np.asarray(profile.T)
    beta = np.asarray([profile.beta_min] + profile.beta)
    with np.errstate(divide="ignore"):
        out = np.where(n == 0, s_arr ** beta[0], (L[n] * s_arr) ** beta[n] / T[n])
    return out if out.ndim else float(out)


def psi_inverse(profile: ScalingProfile, t):
    """Inverse of :func:`psi_eval`."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("Psi^{-1} is defined for t >= 0")
    inv_T = 1.0 / np.asarray(profile.T[1:])
    n = np.searchsorted(-inv_T, -t_arr, side="right") + 1
    n = np.where(t_arr >= 1.0, 0, np.minimum(n, profile.depth))
    L = np.asarray(profile.L, dtype=float)
    T = np.asarray(profile.T)
    beta = np.asarray([profile.beta_min] + profile.beta)
    out = np.where(n == 0, t_arr ** (1.0 / beta[0]), (t_arr * T[n]) ** (1.0 / beta[n]) / L[n])
    return out if out.ndim else float(out)


def phi_power_law(R, t, beta: float):
    """Closed form of Phi for ``Psi(r) = r^beta``:
    ``(beta - 1) beta^{-beta/(beta-1)} (R^beta / t)^{1/(beta-1)}``."""
    R = np.asarray(R, dtype=float)
    t = np.asarray(t, dtype=float)
    return (beta - 1) * beta ** (-beta / (beta - 1)) * (R**beta / t) ** (1 / (beta - 1))


def phi_eval(psi: Callable, R: float, t: float, max_iter: int = 200) -> float:
    """``sup_{r>0} (R/r - t/Psi(r))``.

    The objective in ``u = log r`` is bracketed by stepping uphill with doubling
    steps from a coarse grid maximum, then refined by golden-section search.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if R < 0:
        raise ValueError("R must be nonnegative")
    if R == 0:
        return 0.0

    def g(u):
        r = math.exp(u)
        p = float(psi(r))
        if p == 0.0:
            return -math.inf
        return R / r - t / p

    # coarse scan around log R, wide enough for any beta in (1, 10)
    base = math.log(R) if R > 0 else 0.0
    grid = base + np.linspace(-40.0, 40.0, 161)
    vals = np.array([g(u) for u in grid])
    k = int(np.argmax(vals))
    lo_u = grid[max(k - 1, 0)]
    hi_u = grid[min(k + 1, len(grid) - 1)]
    step = grid[1] - grid[0]
    # monotone bracketing outwards if the maximum sits on the scan edge
    while g(lo_u) > g(lo_u + step * 0.5) and lo_u > -700:
        lo_u -= step
        step *= 2
    step = grid[1] - grid[0]
    while g(hi_u) > g(hi_u - step * 0.5) and hi_u < 700:
        hi_u += step
        step *= 2

    a, b = lo_u, hi_u
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(max_iter):
        if b - a <= 1e-15 * max(1.0, abs(a)):
            break
        if gc > gd:
            b, d, gd = d, c, gc
            c = b - GOLDEN * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + GOLDEN * (b - a)
            gd = g(d)
    best = max(gc, gd, g(0.5 * (a + b)), float(vals[k]))
    if not math.isfinite(best):
        raise ArithmeticError(f"Phi search failed for R={R}, t={t}")
    return max(best, 0.0)


@dataclass
class RegularityEstimate:
    beta0: float
    beta1: float
    C: float
    violations: int


def verify_regularity(psi, grid) -> RegularityEstimate:
    """Empirical constants in ``C^-1 (R/r)^beta0 <= Psi(R)/Psi(r) <= C (R/r)^beta1``.

    ``beta0`` and ``beta1`` are the extreme log-log slopes between consecutive
    grid radii, and ``C`` the smallest constant that makes every grid pair
    satisfy the two-sided bound with those exponents.
    """
    grid = np.unique(np.asarray(grid, dtype=float))
    if grid[0] <= 0:
        raise ValueError("grid must be positive")
    if math.log10(grid[-1] / grid[0]) < 4:
        raise ValueError("grid must span at least four decades")
    logs = np.log(grid)
    lp = np.log(np.asarray(psi(grid), dtype=float))
    slopes = np.diff(lp) / np.diff(logs)
    beta0, beta1 = float(slopes.min()), float(slopes.max())
    i, j = np.triu_indices(len(grid), 1)
    ratio = lp[j] - lp[i]
    span = logs[j] - logs[i]
    lower_gap = beta0 * span - ratio  # log of C needed on the lower side
    upper_gap = ratio - beta1 * span
    logC = max(0.0, float(lower_gap.max()), float(upper_gap.max()))
    C = math.exp(logC)
    tol = 1e-12 * (1 + np.abs(ratio))
    violations = int(((ratio < beta0 * span - logC - tol) | (ratio > beta1 * span + logC + tol)).sum())
    if violations:
        raise ArithmeticError(f"{violations} grid pairs violate the fitted bounds")
    return RegularityEstimate(beta0, beta1, C, violations)


@dataclass
class RegimeReport:
    regime: str
    zoom_ratio_min: float
    zoom_decay_exponent: float
    zoom_ratios: dict
    ac_ratio_tail: float
    thresholds: dict


def classify_regime(
    psi,
    lambdas=None,
    radii=None,
    zoom_threshold: float = 1e-3,
    decay_threshold: float = 0.05,
    ac_threshold: float = 1e-3,
) -> RegimeReport:
    """Finite-grid reading of the two scale conditions.

    ``zoom(lambda) = min_r lambda^2 Psi(r/lambda) / Psi(r)`` over the finer half
    of the radius grid stands in for the inner liminf.  The outer liminf over
    ``lambda -> inf`` is read as zero when ``zoom`` already falls below
    ``zoom_threshold`` or decays like a power of ``lambda`` with exponent at
    least ``decay_threshold``.  ``Psi(r)/r^2`` over the finest decade stands in
    for the limsup at zero.
    """
    lambdas = 2.0 ** np.arange(1, 11) if lambdas is None else np.asarray(lambdas, dtype=float)
    radii = 2.0 ** -np.arange(1, 65) if radii is None else np.sort(np.asarray(radii, dtype=float))[::-1]
    fine = radii[len(radii) // 2:]
    pr = np.asarray(psi(fine), dtype=float)
    zoom = {}
    for lam in lambdas:
        zoom[float(lam)] = float(np.min(lam**2 * np.asarray(psi(fine / lam), dtype=float) / pr))
    zvals = np.array(list(zoom.values()))
    slope = float(np.polyfit(np.log(lambdas), np.log(zvals), 1)[0])
    finest = radii[radii <= radii[-1] * 10]
    ac = float(np.max(np.asarray(psi(finest), dtype=float) / finest**2))
    zoom_to_zero = zvals.min() < zoom_threshold or -slope >= decay_threshold
    if zoom_to_zero and ac < ac_threshold:
        regime = "singular"
    elif ac >= ac_threshold and not zoom_to_zero:
        regime = "gaussian"
    else:
        regime = "inconclusive"
    return RegimeReport(
        regime=regime,
        zoom_ratio_min=float(zvals.min()),
        zoom_decay_exponent=-slope,
        zoom_ratios=zoom,
        ac_ratio_tail=ac,
        thresholds={"zoom": zoom_threshold, "decay": decay_threshold, "ac": ac_threshold},
    )
