"""Experiment runners used by the command line and the acceptance suite.

Every runner takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentResult`: a JSON-able summary, named invariant checks, CSV
tables and plot series.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import approximation as ap
from . import diagnostics as dg
from . import stochastic as st
from .chainmetric import FiniteMetricSpace, chain_constant, chain_metric_matrix, chain_midpoint, epsilon_net
from .forms import (
    ScaledFormParams,
    assemble_form,
    cell_energy_measure,
    dirichlet_solve,
    harmonic_extend,
    resistance_scale,
    trace_proportionality,
    vertex_energy_measure,
)
from .geometry import GasketSpec, build_graph, count_s, uniform_cell_measure
from .scaling import (
    ScalingProfile,
    classify_regime,
    linear_energy_ratio,
    phi_eval,
    phi_power_law,
    power_law,
    verify_regularity,
    walk_dimension,
)

KINDS = ("build", "scale", "harmonic", "singularity", "walk", "metric", "approx", "hke")

# vertex count above which dense all-pairs tables are refused
MAX_DENSE_VERTICES = 12_000


@dataclass
class ExperimentConfig:
    kind: str
    dimension: int = 2
    levels: tuple = (2,)
    depth_min: int = 1
    depth_max: int = 7
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    @property
    def spec(self) -> GasketSpec:
        levels = tuple(self.levels)
        if len(levels) < self.depth_max:
            # a shorter list is repeated periodically
            levels = tuple(levels[i % len(levels)] for i in range(max(self.depth_max, 1)))
        return GasketSpec(self.dimension, levels)

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))


@dataclass
class Series:
    x: list
    y: list
    xlabel: str
    ylabel: str
    loglog: bool = False
    label: str = ""
    reference_slopes: dict = field(default_factory=dict)
    expected: str = ""
    scatter: bool = False  # unordered or pooled points: markers only


@dataclass
class ExperimentResult:
    kind: str
    summary: dict
    checks: dict
    tables: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _check_depth(graph_vertices: int):
    if graph_vertices > MAX_DENSE_VERTICES:
        raise ResourceWarning(f"{graph_vertices} vertices exceed the dense-table cap {MAX_DENSE_VERTICES}")


def corner_data(N: int, values=None) -> np.ndarray:
    if values is None:
        values = [1.0] + [0.0] * N
    values = np.asarray(values, dtype=float)
    if values.shape != (N + 1,):
        raise ValueError(f"need {N + 1} corner values")
    return values


def harmonic_sequence(spec: GasketSpec, depths, values=None):
    """Yield ``(graph, h)`` for the harmonic function with the given corner values, depth by depth."""
    depths = sorted(depths)
    prev = build_graph(spec, 0)
    h = corner_data(spec.dimension, values)
    if depths and depths[0] == 0:
        yield prev, h
    for n in range(1, depths[-1] + 1):
        g = build_graph(spec, n)
        h = harmonic_extend(prev, g, h)
        prev = g
        if n in depths:
            yield g, h


# ---------------------------------------------------------------- build


def run_build(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.spec
    rows = []
    for n in range(cfg.depth_min, cfg.depth_max + 1):
        g = build_graph(spec, n)
        rows.append([n, g.L, g.M, g.n_vertices, len(g.edges), int(g.edge_multiplicity.max())])
    g = build_graph(spec, cfg.depth_max)
    A = assemble_form(g)
    checks = {
        "cells_equal_M": all(r[2] == spec.M(r[0]) for r in rows),
        "form_symmetric_zero_rows": _form_ok(A),
    }
    return ExperimentResult(
        kind="build",
        summary={"dimension": spec.dimension, "levels": list(spec.levels[: cfg.depth_max]), "graphs": [
            dict(zip(["depth", "L", "M", "vertices", "edges", "max_multiplicity"], r)) for r in rows]},
        checks=checks,
        tables={"graphs": (["depth", "L", "M", "vertices", "edges", "max_multiplicity"], rows),
                "vertices": (["index"] + [f"a{k + 1}" for k in range(spec.dimension)],
                             [[i] + list(map(int, k)) for i, k in enumerate(g.keys)])},
        arrays={"form": A.matrix},
    )


def _form_ok(A) -> bool:
    try:
        A.check()
        return True
    except ValueError:
        return False


# ---------------------------------------------------------------- scale


def run_scale(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.spec
    N = spec.dimension
    depth = cfg.depth_max
    levels = spec.levels[:depth]
    rows, checks = [], {}
    res_tol = cfg.tol("proportionality", 1e-10)
    per_level = {}
    for l in sorted(set(levels)):
        r = resistance_scale(N, l)
        _, resid = trace_proportionality(N, l)
        beta = math.log(count_s(l, N) / float(r)) / math.log(l)
        gain = linear_energy_ratio(N, l)
        rows.append([l, count_s(l, N), str(r), float(r), resid, beta, float(gain)])
        per_level[str(l)] = {"r": float(r), "r_exact": str(r), "beta": beta, "residual": resid,
                             "linear_gain": float(gain)}
        checks[f"proportional_l{l}"] = resid < res_tol
        checks[f"beta_above_2_l{l}"] = beta > 2
        checks[f"inequality_route_l{l}"] = gain > 1
    prof = ScalingProfile(GasketSpec(N, levels))
    # breakpoint continuity: left and right branch formulas at 1/L_{n-1}
    cont = 0.0
    for n in range(1, depth + 1):
        b = 1.0 / prof.L[n - 1]
        left = (prof.L[n] * b) ** prof.beta[n - 1] / prof.T[n]
        right = b ** prof.beta_min if n == 1 else (prof.L[n - 1] * b) ** prof.beta[n - 2] / prof.T[n - 1]
        cont = max(cont, abs(left - right) / right)
    s = np.logspace(math.log10(0.1 / prof.L[-1]), 1, 400)
    ps = prof(s)
    checks["psi_continuous"] = cont < cfg.tol("continuity", 1e-12)
    checks["psi_increasing"] = bool(np.all(np.diff(ps) > 0))
    # four decades at least; below 1/L_depth the last branch is continued
    grid = np.logspace(min(-4.0, math.log10(1.0 / prof.L[-1])), 0, 200)
    reg = verify_regularity(prof, grid)
    regime = classify_regime(prof)
    checks["regime_singular"] = regime.regime == "singular"
    # Phi against closed forms for pure power laws
    phi_rows, phi_err = [], 0.0
    for beta in (2.0, 2.5, math.log2(5)):
        psi = power_law(beta)
        for R in np.logspace(-2, 1, 10):
            for t in np.logspace(-3, 1, 10):
                a = phi_eval(psi, R, t)
                b = float(phi_power_law(R, t, beta))
                err = abs(a - b) / max(1.0, abs(b))
                phi_err = max(phi_err, err)
                phi_rows.append([beta, R, t, a, b])
    checks["phi_closed_form"] = phi_err < cfg.tol("phi", 1e-8)
    checks["gaussian_reference"] = classify_regime(power_law(2.0)).regime == "gaussian"
    summary = {
        "dimension": N,
        "levels": list(levels),
        "per_level": per_level,
        "beta_min": prof.beta_min,
        "beta_max": prof.beta_max,
        "T": prof.T,
        "R": prof.R,
        "breakpoint_mismatch": cont,
        "phi_max_error": phi_err,
        "regime": regime.regime,
        "regime_details": {"zoom_ratio_min": regime.zoom_ratio_min,
                           "zoom_decay_exponent": regime.zoom_decay_exponent,
                           "ac_ratio_tail": regime.ac_ratio_tail, "thresholds": regime.thresholds},
    }
    summary["regularity"] = {"beta0": reg.beta0, "beta1": reg.beta1, "C": reg.C}
    if len(set(levels)) == 1:
        summary["r"] = per_level[str(levels[0])]["r"]
        summary["beta"] = per_level[str(levels[0])]["beta"]
    return ExperimentResult(
        kind="scale",
        summary=summary,
        checks=checks,
        tables={
            "levels": (["l", "count_S", "r_exact", "r", "residual", "beta", "linear_gain"], rows),
            "psi": (["s", "psi"], [[a, b] for a, b in zip(s, ps)]),
            "phi": (["beta", "R", "t", "phi_numeric", "phi_closed"], phi_rows),
        },
        series={"psi": Series(list(s), list(ps), "s", "Psi(s)", loglog=True, label="Psi",
                              reference_slopes={"beta_min": prof.beta_min, "2": 2.0},
                              expected="piecewise power law with slopes between beta_min and beta_max")},
    )


# ---------------------------------------------------------------- harmonic


def run_harmonic(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.spec
    N = spec.dimension
    values = cfg.options.get("corner_values")
    depths = list(range(0, cfg.depth_max + 1))
    energies, totals, rows = [], [], []
    midpoints = None
    for g, h in harmonic_sequence(spec, depths, values):
        params = ScaledFormParams.for_spec(spec, g.depth)
        A = assemble_form(g, params)
        e = A.energy(h)
        tot = cell_energy_measure(g, params, h).total
        energies.append(e)
        totals.append(abs(tot - e))
        rows.append([g.depth, g.n_vertices, e, tot])
        if g.depth == 1:
            mids = [i for i in range(g.n_vertices) if i not in set(g.boundary.tolist())]
            midpoints = {str(tuple(int(a) for a in g.keys[i])): float(h[i]) for i in mids}
    drift = max(abs(e - energies[0]) for e in energies)
    checks = {
        "energy_constant": drift < cfg.tol("energy_drift", 1e-9) * max(1.0, energies[0]),
        "cell_total_is_energy": max(totals) < cfg.tol("total_mass", 1e-10),
    }
    # Leibniz identity for the vertex energy measure on random pairs
    dl = min(cfg.depth_max, int(cfg.options.get("leibniz_depth", 4)))
    g = build_graph(spec, dl)
    A = assemble_form(g)
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(int(cfg.options.get("leibniz_pairs", 100))):
        f = rng.standard_normal(g.n_vertices)
        w = rng.standard_normal(g.n_vertices)
        lhs = float(w @ vertex_energy_measure(A, f).mass)
        rhs = A.energy(f, f * w) - 0.5 * A.energy(f * f, w)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    checks["leibniz_identity"] = worst < cfg.tol("leibniz", 1e-12)
    return ExperimentResult(
        kind="harmonic",
        summary={"energies": energies, "energy_drift": drift, "midpoints_depth1": midpoints,
                 "leibniz_max_error": worst, "leibniz_depth": dl},
        checks=checks,
        tables={"energy": (["depth", "vertices", "energy", "cell_measure_total"], rows)},
        series={"energy": Series(depths, energies, "depth", "energy", label="E(h_n)",
                                 expected="constant in depth")},
    )


# ---------------------------------------------------------------- singularity


def singularity_sweep(spec: GasketSpec, depths, delta: float = 0.01, values=None, ratio_depths=()):
    out = []
    for g, h in harmonic_sequence(spec, depths, values):
        G = cell_energy_measure(g, None, h)
        m = uniform_cell_measure(g)
        prof = dg.concentration_profile(G, m, delta)
        row = {"depth": g.depth, "profile": prof, "cells": g.n_cells}
        if g.depth in ratio_depths:
            _check_depth(g.n_vertices)
            X = FiniteMetricSpace.from_graph(g)
            mv = m.to_vertices()
            ratios = dg.differentiation_ratios(G, m, X, np.arange(X.size), [1.0 / g.L, 2.0 / g.L, 4.0 / g.L])
            row["median_ratios"] = [dg.weighted_median(ratios[:, k], mv) for k in range(ratios.shape[1])]
            mx = dg.maximal_inequality_check(G, m, X)
            row["maximal"] = {k: mx[k] for k in ("constant", "C_D", "bound", "ok")}
        out.append(row)
    return out


def run_singularity(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.spec
    depths = list(range(max(cfg.depth_min, 1), cfg.depth_max + 1))
    delta = cfg.tol("delta", 0.01)
    ratio_depths = [d for d in cfg.options.get("ratio_depths", [4, cfg.depth_max]) if d in depths]
    sweep = singularity_sweep(spec, depths, delta, cfg.options.get("corner_values"), ratio_depths)
    mins = [r["profile"].min_mass for r in sweep]
    ents = [r["profile"].entropy_rate for r in sweep]
    checks = {
        "min_mass_decreasing": bool(np.all(np.diff(mins) < 0)),
        "entropy_nondecreasing": bool(np.all(np.diff(ents) >= -1e-12)),
        "entropy_positive": bool(all(e > 0 for e in ents)),
    }
    target = cfg.tolerances.get("min_mass_target")
    if target is not None:
        checks["min_mass_below_target"] = mins[-1] < float(target)
    rated = [r for r in sweep if "median_ratios" in r]
    if len(rated) >= 2:
        checks["median_ratio_decreasing"] = rated[-1]["median_ratios"][0] < rated[0]["median_ratios"][0]
        checks["maximal_inequality"] = all(r["maximal"]["ok"] for r in rated)
    lorenz_rows = []
    for r in sweep:
        p = r["profile"]
        idx = np.unique(np.linspace(0, len(p.lorenz_m) - 1, min(len(p.lorenz_m), 201)).astype(int))
        lorenz_rows += [[r["depth"], p.lorenz_m[i], p.lorenz_gamma[i]] for i in idx]
    summary = {
        "delta": delta,
        "depths": depths,
        "min_mass": mins,
        "entropy_rate": ents,
        "differentiation": {str(r["depth"]): r["median_ratios"] for r in rated},
        "maximal": {str(r["depth"]): r["maximal"] for r in rated},
    }
    return ExperimentResult(
        kind="singularity",
        summary=summary,
        checks=checks,
        tables={
            "lorenz": (["depth", "min_mass", "entropy_rate", "cells"],
                       [[r["depth"], r["profile"].min_mass, r["profile"].entropy_rate, r["cells"]] for r in sweep]),
            "lorenz_curves": (["depth", "cum_m", "cum_gamma"], lorenz_rows),
        },
        series={
            "min_mass": Series(depths, mins, "depth", f"m-mass carrying {1 - delta:.0%} of Gamma",
                               expected="strictly decreasing"),
            "entropy_rate": Series(depths, ents, "depth", "entropy rate", expected="non-decreasing"),
        },
    )


# ---------------------------------------------------------------- walk


def exit_time_sweep(spec: GasketSpec, depths):
    """``(depth, r, tau_steps, tau / T_n)`` for balls ``B(q0, 2^-j)`` around the corner ``q0``."""
    prof = ScalingProfile(GasketSpec(spec.dimension, spec.levels[: max(depths)]))
    rows = []
    for n in depths:
        g = build_graph(spec, n)
        W = st.build_walk(assemble_form(g), 0.0)
        q0 = int(g.boundary[0])
        row = _bfs_row(g, q0)
        j = 1
        while 2.0**-j * g.L >= 1:
            r = 2.0**-j
            tau = st.exit_time_exact(W, row, q0, r)
            rows.append((n, r, tau, tau / prof.T[n]))
            j += 1
    return rows


def _bfs_row(g, x):
    from scipy.sparse import csgraph

    return csgraph.shortest_path(g.adjacency, unweighted=True, indices=[x])[0] / g.L


def run_walk(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.spec
    depths = list(range(max(cfg.depth_min, 1), cfg.depth_max + 1))
    rows = exit_time_sweep(spec, depths)
    x = np.log([r[1] for r in rows])
    y = np.log([r[3] for r in rows])
    slope = float(np.polyfit(x, y, 1)[0])
    beta = walk_dimension(spec.dimension, spec.levels[0])
    checks = {"exit_slope": abs(slope - beta) < cfg.tol("slope", 0.15) if spec.is_constant else True}
    # Monte Carlo cross-check
    mc_depth = min(int(cfg.options.get("mc_depth", 4)), cfg.depth_max)
    trials = int(cfg.options.get("mc_trials", 100_000))
    g = build_graph(spec, mc_depth)
    W = st.build_walk(assemble_form(g), 0.0)
    q0 = int(g.boundary[0])
    row = _bfs_row(g, q0)
    r = float(cfg.options.get("mc_radius", 0.5))
    exact = st.exit_time_exact(W, row, q0, r)
    mc = st.walk_montecarlo(W, q0, row < r - 1e-12, trials, seed=cfg.seed)
    z = mc.z_score(exact)
    checks["montecarlo_3sigma"] = abs(z) < 3 and mc.censored == 0
    checks["reversible"] = W.detailed_balance_residual() < 1e-14 and W.row_sum_residual() < 1e-14
    summary = {"slope": slope, "beta": beta, "depths": depths,
               "montecarlo": {"depth": mc_depth, "radius": r, "exact": exact, "mean": mc.mean,
                              "stderr": mc.stderr, "z": z, "trials": trials, "seed": cfg.seed}}
    return ExperimentResult(
        kind="walk",
        summary=summary,
        checks=checks,
        tables={"exit_times": (["depth", "r", "tau_steps", "tau_rescaled"], [list(r) for r in rows]),
                "montecarlo": (["r", "exact", "mc_mean", "stderr"], [[r, exact, mc.mean, mc.stderr]])},
        series={"exit_time": Series(list(np.exp(x)), list(np.exp(y)), "r", "E[tau] / T_n", loglog=True,
                                    label="exact exit times", reference_slopes={"beta": beta, "2": 2.0},
                                    expected=f"slope close to {beta:.4f}", scatter=True)},
    )


# ---------------------------------------------------------------- metric


def run_metric(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.spec
    n = cfg.depth_max
    g = build_graph(spec, n)
    _check_depth(g.n_vertices)
    X = FiniteMetricSpace.from_graph(g)
    eps = float(cfg.options.get("eps", 1.0 / 8))
    n_pairs = int(cfg.options.get("pairs", 200))
    rng = np.random.default_rng(cfg.seed)
    D = chain_metric_matrix(X, eps)
    rows, viol, slack = [], 0, 0.0
    for _ in range(n_pairs):
        x, y = (int(v) for v in rng.choice(X.size, 2, replace=False))
        z, _ = chain_midpoint(X, eps, x, y)
        a = abs(2 * D[x, z] - D[x, y])
        b = abs(2 * D[z, y] - D[x, y])
        viol += int(a > 5 * eps + X.tol) + int(b > 5 * eps + X.tol)
        slack = max(slack, a, b)
        rows.append([x, y, z, eps, X.dist[x, y], D[x, y], a, b])
    eps_list = [e for e in (1 / 4, 1 / 8, 1 / 16) if e > 1.0 / g.L]
    cc = chain_constant(X, eps_list, seed=cfg.seed)
    net = epsilon_net(X, 0.25)
    covered = bool(np.all(X.dist[:, net].min(axis=1) < 0.25 - X.tol))
    sep = bool(np.all(X.dist[np.ix_(net, net)][~np.eye(len(net), dtype=bool)] >= 0.25 - X.tol))
    checks = {"midpoint_bounds": viol == 0, "chain_constant_one": abs(cc["C"] - 1) < 1e-12,
              "net_covers": covered, "net_separated": sep}
    # Euclidean comparison at a shallower depth
    de = min(n, 4)
    ge = build_graph(spec, de)
    E = FiniteMetricSpace.from_graph(ge, "euclidean")
    ce = chain_constant(E, [1.0 / 4, 1.0 / 8], seed=cfg.seed)
    return ExperimentResult(
        kind="metric",
        summary={"depth": n, "eps": eps, "pairs": n_pairs, "violations": viol, "max_deviation": slack,
                 "bound": 5 * eps, "chain_constant": cc["C"], "chain_constant_per_eps": cc["per_eps"],
                 "euclidean_chain_constant": ce["per_eps"], "net_size": int(len(net))},
        checks=checks,
        tables={"midpoints": (["x", "y", "z", "eps", "d", "d_eps", "dev_xz", "dev_zy"], rows),
                "net": (["vertex"], [[int(v)] for v in net])},
        series={"midpoint_deviation": Series([r[5] for r in rows], [max(r[6], r[7]) for r in rows], "d_eps(x,y)",
                                             "midpoint deviation", label="pairs",
                                             expected=f"below 5 eps = {5 * eps}", scatter=True)},
    )


# ---------------------------------------------------------------- approx


def run_approx(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.spec
    n = cfg.depth_max
    g = build_graph(spec, n)
    _check_depth(g.n_vertices)
    A = assemble_form(g)
    X = FiniteMetricSpace.from_graph(g)
    checks, summary = {}, {"depth": n}
    # partition of unity at three scales
    prow = []
    for eps in cfg.options.get("eps", [1 / 4, 1 / 8, 1 / 16]):
        fam = ap.partition_of_unity(X, epsilon_net(X, eps), eps, graph=g, form=A)
        c = fam.constants
        prow.append([eps, len(fam), fam.denominator_min, c["sum_error"], c["support_ok"],
                     c["lipschitz"], c["density"], c["energy"]])
    arr = np.array([[r[5], r[6], r[7]] for r in prow])
    spread = (arr.max(axis=0) / arr.min(axis=0)).tolist()
    checks["partition_sum"] = all(r[3] < 1e-12 for r in prow)
    checks["partition_support"] = all(r[4] for r in prow)
    checks["partition_constants_stable"] = max(spread) <= cfg.tol("stability", 2.0)
    summary["partition_spread"] = dict(zip(["lipschitz", "density", "energy"], spread))
    # piecewise harmonic approximation
    h = dirichlet_solve(A, g.boundary, corner_data(spec.dimension))
    tent = ap.tent_function(X, int(g.boundary[1]), 0.5)
    arow = []
    ok_err, ok_mono = True, True
    for name, f in (("harmonic", h), ("tent", tent)):
        ef = A.energy(f)
        prev = -np.inf
        for k in range(1, int(cfg.options.get("levels", 6)) + 1):
            fk = ap.piecewise_harmonic_approx(A, f, k)
            err = float(np.abs(f - fk).max())
            e = A.energy(fk)
            ok_err &= err <= 2.0**-k
            ok_mono &= e >= prev - 1e-12 and e <= ef + 1e-10
            prev = e
            arow.append([name, k, err, 2.0**-k, e, ef])
    checks["approx_sup_error"] = bool(ok_err)
    checks["approx_energy_monotone"] = bool(ok_mono)
    # ball-average projection
    brow = []
    for k in (4, 8, 16):
        fk = ap.ball_average_projection(X, h, k)
        brow.append([k, float(np.abs(fk - h).max()), A.energy(fk) / A.energy(h)])
    summary["ball_average_energy_ratio_max"] = max(r[2] for r in brow)
    # reverse Poincare ratios at a sample of centers
    prof = ScalingProfile(GasketSpec(spec.dimension, spec.levels[:n]))
    rng = np.random.default_rng(cfg.seed)
    centers = rng.choice(X.size, min(20, X.size), replace=False)
    rp = [ap.reverse_poincare_check(A, X, prof, h, int(x), 0.25, resolve=True) for x in centers]
    summary["reverse_poincare"] = {"max": max(rp), "min": min(rp)}
    checks["reverse_poincare_finite"] = bool(np.all(np.isfinite(rp)))
    summary["partition"] = [dict(zip(["eps", "size", "denominator_min", "sum_error", "support_ok", "lipschitz",
                                      "density", "energy"], r)) for r in prow]
    return ExperimentResult(
        kind="approx",
        summary=summary,
        checks=checks,
        tables={
            "partition": (["eps", "size", "denominator_min", "sum_error", "support_ok", "lipschitz", "density",
                           "energy"], prow),
            "piecewise": (["function", "n", "sup_error", "bound", "energy_fn", "energy_f"], arow),
            "ball_average": (["n", "sup_error", "energy_ratio"], brow),
            "reverse_poincare": (["center", "ratio"], [[int(c), r] for c, r in zip(centers, rp)]),
        },
        series={"piecewise_energy_" + nm: Series([r[1] for r in arow if r[0] == nm],
                                                 [r[4] for r in arow if r[0] == nm], "n", "E(f_n)",
                                                 label=nm, expected="non-decreasing, below E(f)")
                for nm in ("harmonic", "tent")},
    )


# ---------------------------------------------------------------- hke


def heat_kernel_samples(spec: GasketSpec, depths, scales=(1 / 2, 1 / 4, 1 / 8), theta: float = 0.5):
    prof = ScalingProfile(GasketSpec(spec.dimension, spec.levels[: max(depths)]))
    S = {"t": [], "d": [], "p": [], "V": [], "group": []}
    steps_used = []
    for n in depths:
        g = build_graph(spec, n)
        _check_depth(g.n_vertices)
        X = FiniteMetricSpace.from_graph(g)
        W = st.build_walk(assemble_form(g), theta)
        ks = {s: max(1, int(round(prof(s) * prof.T[n] / (1 - theta)))) for s in scales}
        kernels = st.heat_kernel_matrix(W, sorted(set(ks.values())), measure=X.mass)
        for s, k in ks.items():
            t = k * (1 - theta) / prof.T[n]
            P = kernels[k]
            V = X.ball_masses(float(prof.inverse(t)))
            size = X.size * X.size
            S["t"].append(np.full(size, t))
            S["d"].append(X.dist.reshape(-1))
            S["p"].append(P.reshape(-1))
            S["V"].append(np.repeat(V, X.size))
            S["group"].append(np.full(size, f"depth{n}_s{s:g}"))
            steps_used.append((n, s, k, t))
    return {k: np.concatenate(v) for k, v in S.items()}, prof, steps_used


def run_hke(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.spec
    depths = list(range(max(cfg.depth_min, 1), cfg.depth_max + 1))
    t0 = time.perf_counter()
    S, prof, steps = heat_kernel_samples(spec, depths)
    elapsed = time.perf_counter() - t0
    rep = dg.heat_kernel_envelope_check(S, prof, delta=cfg.tol("delta", 0.5))
    c3v = list(rep.c3_by_group.values())
    checks = {
        "lower_envelope": rep.lower_violations == 0 and rep.c3 > 0,
        "lower_uniform": max(c3v) / min(c3v) <= cfg.tol("c3_spread", 10.0),
        "upper_envelope": rep.upper_violations == 0 and rep.c1 > 0,
    }
    # doubling and Poincare constants at the deepest level
    g = build_graph(spec, depths[-1])
    X = FiniteMetricSpace.from_graph(g)
    A = assemble_form(g)
    radii = [r for r in (1 / 16, 1 / 8, 1 / 4) if r > 1.0 / g.L]
    vd = dg.vd_constant(X, radii)
    h = dirichlet_solve(A, g.boundary, corner_data(spec.dimension))
    pis = {r: dg.poincare_constant(A, X, prof, r, [h]) for r in radii[:2]}
    summary = {
        "depths": depths, "steps": [list(s) for s in steps],
        "c3": rep.c3, "delta": rep.delta, "c3_by_group": rep.c3_by_group,
        "C1": rep.C1, "c1": rep.c1, "c2": rep.c2, "upper_violations": rep.upper_violations,
        "lower_violations": rep.lower_violations, "tail_correlation": rep.tail_correlation,
        "samples": rep.n_samples, "vd_constant": vd, "poincare": {str(k): v for k, v in pis.items()},
    }
    near = S["d"] <= rep.delta * prof.inverse(S["t"]) + 1e-12
    grp_rows = [[k, v] for k, v in rep.c3_by_group.items()]
    ts = sorted({s[3] for s in steps})
    mins = [float((S["p"] * S["V"])[near & (S["t"] == t)].min()) for t in ts]
    return ExperimentResult(
        timings={"matrix_power_seconds": elapsed},
        kind="hke",
        summary=summary,
        checks=checks,
        tables={"c3_by_group": (["group", "c3"], grp_rows),
                "steps": (["depth", "scale", "steps", "t"], [list(s) for s in steps])},
        series={"near_diagonal": Series(ts, mins, "t", "min p_t V(x, Psi^-1(t))", loglog=True,
                                        label="near-diagonal", expected="bounded below uniformly")},
    )


RUNNERS = {
    "build": run_build,
    "scale": run_scale,
    "harmonic": run_harmonic,
    "singularity": run_singularity,
    "walk": run_walk,
    "metric": run_metric,
    "approx": run_approx,
    "hke": run_hke,
}

# the default suite mirrors the acceptance criteria
DEFAULT_SUITE = {
    "build": dict(depth_min=0, depth_max=5),
    "scale": dict(levels=(2, 3, 4, 2), depth_max=4),
    "harmonic": dict(depth_max=6),
    "singularity": dict(depth_min=1, depth_max=7, tolerances={"min_mass_target": 0.5}),
    "walk": dict(depth_min=3, depth_max=7),
    "metric": dict(depth_max=5),
    "approx": dict(depth_max=5),
    "hke": dict(depth_min=4, depth_max=5),
}


def run(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.kind not in RUNNERS:
        raise ValueError(f"unknown experiment kind {cfg.kind!r}")
    return RUNNERS[cfg.kind](cfg)
