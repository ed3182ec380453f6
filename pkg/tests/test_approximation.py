import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasketlab import GasketSpec, ScalingProfile, assemble_form, build_graph, dirichlet_solve
from gasketlab.approximation import (
    ball_average_projection,
    harmonic_in_ball,
    lipschitz_constant,
    partition_of_unity,
    piecewise_harmonic_approx,
    reverse_poincare_check,
    tent_function,
)
from gasketlab.chainmetric import FiniteMetricSpace, epsilon_net

SPEC = GasketSpec.constant(2, 2, 4)
G4 = build_graph(SPEC, 4)
A4 = assemble_form(G4)
X4 = FiniteMetricSpace.from_graph(G4)


def test_tent_lipschitz():
    f = tent_function(X4, int(G4.boundary[0]), 0.5)
    assert f.max() == 1.0 and f.min() == 0.0
    assert lipschitz_constant(G4, f) == pytest.approx(2.0)


@pytest.mark.parametrize("eps", [1 / 4, 1 / 8])
def test_partition_of_unity_exact(eps):
    net = epsilon_net(X4, eps)
    fam = partition_of_unity(X4, net, eps, graph=G4, form=A4)
    assert fam.constants["sum_error"] < 1e-12
    assert fam.constants["support_ok"]
    assert fam.denominator_min >= 1.0
    assert np.allclose(fam.phi.sum(axis=0), 1.0)


def test_partition_rejects_sparse_net():
    with pytest.raises(ValueError):
        partition_of_unity(X4, [0], 1 / 8)


def test_ball_average_preserves_constants():
    f = np.full(X4.size, 3.25)
    assert np.allclose(ball_average_projection(X4, f, 8), 3.25)


def test_piecewise_returns_harmonic_input():
    h = dirichlet_solve(A4, G4.boundary, [1.0, 0.0, 0.0])
    for n in range(1, 5):
        assert np.max(np.abs(piecewise_harmonic_approx(A4, h, n) - h)) < 1e-12


def test_piecewise_needs_split_for_negative():
    f = np.linspace(-1, 1, X4.size)
    with pytest.raises(ValueError):
        piecewise_harmonic_approx(A4, f, 2)
    fn = piecewise_harmonic_approx(A4, f, 2, split=True)
    assert np.max(np.abs(fn - f)) <= 2 * 0.25 + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6))
def test_piecewise_contract_random(seed, n):
    r = np.random.default_rng(seed)
    # smooth-ish data: harmonic plus a small random perturbation
    f = dirichlet_solve(A4, G4.boundary, r.random(3)) + 0.05 * r.random(X4.size)
    fn = piecewise_harmonic_approx(A4, f, n)
    assert np.max(np.abs(fn - f)) <= 2.0**-n + 1e-12
    assert A4.energy(fn) <= A4.energy(f) + 1e-10
    # orthogonal splitting of the energy
    assert A4.energy(f) == pytest.approx(A4.energy(fn) + A4.energy(f - fn), rel=1e-9, abs=1e-12)


def test_piecewise_energy_monotone_on_tent():
    f = tent_function(X4, int(G4.boundary[1]), 0.5)
    energies = [A4.energy(piecewise_harmonic_approx(A4, f, n)) for n in range(1, 7)]
    assert all(b >= a - 1e-12 for a, b in zip(energies, energies[1:]))
    assert energies[-1] <= A4.energy(f) + 1e-10


def test_harmonic_in_ball_keeps_outside():
    f = np.random.default_rng(0).random(X4.size)
    x = int(G4.boundary[0])
    g = harmonic_in_ball(A4, X4, f, x, 0.25)
    out = X4.dist[x] >= 0.25 - X4.tol
    assert np.array_equal(g[out], f[out])
    resid = (A4.matrix @ g)[~out]
    assert np.max(np.abs(resid)) < 1e-8 * abs(A4.matrix).max()


def test_reverse_poincare_affine_invariance():
    prof = ScalingProfile(SPEC)
    h = dirichlet_solve(A4, G4.boundary, [1.0, 0.0, 0.0])
    x = 40
    a = reverse_poincare_check(A4, X4, prof, h, x, 0.25, resolve=True)
    b = reverse_poincare_check(A4, X4, prof, 3 * h + 2, x, 0.25, resolve=True)
    assert 0 < a < 10
    assert a == pytest.approx(b, rel=1e-9)


def test_reverse_poincare_requires_harmonic():
    prof = ScalingProfile(SPEC)
    f = np.random.default_rng(1).random(X4.size)
    with pytest.raises(ValueError):
        reverse_poincare_check(A4, X4, prof, f, 40, 0.25)
