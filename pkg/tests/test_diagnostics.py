import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasketlab import GasketSpec, ScalingProfile, assemble_form, cell_energy_measure, dirichlet_solve
from gasketlab import uniform_cell_measure
from gasketlab.chainmetric import FiniteMetricSpace
from gasketlab.diagnostics import (
    concentration_profile,
    differentiation_ratios,
    entropy_rate,
    heat_kernel_envelope_check,
    maximal_function,
    maximal_inequality_check,
    poincare_constant,
    vd_constant,
    weighted_median,
)
from gasketlab.geometry import CellMeasure
from gasketlab.scaling import power_law


def test_weighted_median():
    assert weighted_median([3, 1, 2], [1, 1, 1]) == 2
    assert weighted_median([1, 2, 3], [10, 1, 1]) == 1


def test_uniform_concentration(sg2):
    g = sg2[3]
    m = uniform_cell_measure(g)
    prof = concentration_profile(m, m, delta=0.01)
    assert prof.min_mass == pytest.approx(0.99, abs=1e-12)
    assert prof.entropy_rate == pytest.approx(0.0, abs=1e-15)


def test_concentration_on_point_mass(sg2):
    g = sg2[2]
    m = uniform_cell_measure(g)
    G = np.zeros(g.n_cells)
    G[4] = 1.0
    prof = concentration_profile(CellMeasure(g, G), m, delta=0.01)
    assert prof.min_mass == pytest.approx(0.99 / g.n_cells)
    assert prof.entropy_rate == pytest.approx(math.log(g.n_cells) / 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.001, 0.5))
def test_concentration_properties(seed, delta):
    from gasketlab import build_graph

    g = build_graph(GasketSpec.constant(2, 2, 3), 3)
    m = uniform_cell_measure(g)
    G = CellMeasure(g, np.random.default_rng(seed).random(g.n_cells) ** 4)
    prof = concentration_profile(G, m, delta)
    assert 0 < prof.min_mass <= 1 - delta + 1e-12
    assert prof.entropy_rate >= -1e-15
    assert np.all(np.diff(prof.densities) <= 0)


def test_entropy_rate_depth_normalization():
    assert entropy_rate([1, 0], [0.5, 0.5], 2) == pytest.approx(math.log(2) / 2)


def test_vd_constant_uniform_path():
    x = np.arange(41, dtype=float)
    X = FiniteMetricSpace(np.abs(x[:, None] - x[None, :]), np.ones(41))
    # interior balls of radius r hold 2r-1 points, so doubling is below 3 at the edge effects
    C = vd_constant(X, [2, 4, 8])
    assert 1 < C <= 4


def test_vd_constant_gasket(sg2):
    X = FiniteMetricSpace.from_graph(sg2[5])
    C = vd_constant(X, [1 / 16, 1 / 8, 1 / 4])
    assert 1 < C < 10


def test_poincare_constant_zero_for_constants(sg2):
    g = sg2[4]
    X = FiniteMetricSpace.from_graph(g)
    A = assemble_form(g)
    prof = ScalingProfile(GasketSpec.constant(2, 2, 4))
    assert poincare_constant(A, X, prof, 1 / 4, [np.ones(g.n_vertices)]) == 0.0
    h = dirichlet_solve(A, g.boundary, [1.0, 0.0, 0.0])
    c1 = poincare_constant(A, X, prof, 1 / 4, [h])
    c2 = poincare_constant(A, X, prof, 1 / 4, [3 * h + 7])
    assert 0 < c1 == pytest.approx(c2, rel=1e-9)


def test_differentiation_ratios_identity(sg2):
    g = sg2[3]
    X = FiniteMetricSpace.from_graph(g)
    m = uniform_cell_measure(g)
    r = differentiation_ratios(m, m, X, np.arange(X.size), [1 / 8, 1 / 4])
    assert np.allclose(r, 1.0)


def test_maximal_function_dominates(sg2):
    g = sg2[4]
    X = FiniteMetricSpace.from_graph(g)
    m = uniform_cell_measure(g)
    h = dirichlet_solve(assemble_form(g), g.boundary, [1.0, 0.0, 0.0])
    G = cell_energy_measure(g, None, h)
    Mf = maximal_function(G, m, X)
    ratios = differentiation_ratios(G, m, X, np.arange(X.size), [1 / 16, 1 / 4])
    assert np.all(Mf[:, None] >= ratios - 1e-12)
    out = maximal_inequality_check(G, m, X)
    assert out["ok"] and out["constant"] <= out["bound"]


def test_envelope_on_gaussian_kernel():
    # exact Gaussian kernel on the line sampled at a few times: Psi = r^2
    t = np.repeat([0.01, 0.04, 0.16], 200)
    d = np.tile(np.linspace(0, 1.5, 200), 3)
    p = np.exp(-d**2 / (4 * t)) / np.sqrt(4 * np.pi * t)
    V = 2 * np.sqrt(t)
    rep = heat_kernel_envelope_check(
        {"t": t, "d": d, "p": p, "V": V, "group": np.repeat(["a", "b", "c"], 200)}, power_law(2.0)
    )
    assert rep.lower_violations == 0 and rep.upper_violations == 0
    assert rep.c3 == pytest.approx(2 * math.exp(-1 / 16) / math.sqrt(4 * math.pi), rel=1e-2)
    assert rep.c1 > 0 and rep.C1 > 0
    assert rep.tail_correlation < -0.99
