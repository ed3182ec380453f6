import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasketlab import GasketSpec, ScalingProfile, classify_regime, phi_eval, verify_regularity, walk_dimension
from gasketlab.scaling import linear_energy_ratio, phi_power_law, power_law

PROFILE = ScalingProfile(GasketSpec(2, (2, 3, 4, 2)))


def test_walk_dimension_sg2():
    assert walk_dimension(2, 2) == pytest.approx(math.log2(5), abs=1e-12)


@pytest.mark.parametrize("N", [2, 3])
def test_beta_above_two_grid(N):
    for l in range(2, 7):
        assert walk_dimension(N, l) > 2
        assert linear_energy_ratio(N, l) > 1


def test_profile_tables():
    assert PROFILE.L == [1, 2, 6, 24, 48]
    assert PROFILE.M == [1, 3, 18, 180, 540]
    assert PROFILE.T[1] == pytest.approx(5.0)
    assert PROFILE.T[2] == pytest.approx(450 / 7)  # 18 / (3/5 * 7/15)


def test_psi_breakpoints_continuous():
    for n in range(1, PROFILE.depth + 1):
        b = 1.0 / PROFILE.L[n]
        left = PROFILE(b * (1 - 1e-13))
        right = PROFILE(b * (1 + 1e-13))
        assert left == pytest.approx(right, rel=1e-10)
    # at s = 1/L_n the value is 1/T_n
    for n in range(PROFILE.depth + 1):
        assert PROFILE(1.0 / PROFILE.L[n]) == pytest.approx(1.0 / PROFILE.T[n], rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 1e3))
def test_psi_inverse_roundtrip(s):
    t = PROFILE(s)
    assert float(PROFILE.inverse(t)) == pytest.approx(s, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 10.0), st.floats(1.0001, 3.0))
def test_psi_strictly_increasing(s, k):
    assert PROFILE(s * k) > PROFILE(s)


@pytest.mark.parametrize("beta", [2.0, 2.5, math.log2(5)])
def test_phi_matches_closed_form(beta):
    psi = power_law(beta)
    for R in np.logspace(-2, 1, 10):
        for t in np.logspace(-3, 1, 10):
            a = phi_eval(psi, R, t)
            b = float(phi_power_law(R, t, beta))
            assert abs(a - b) <= 1e-8 * max(1.0, b)


def test_phi_gaussian_case():
    # beta = 2 reduces to R^2 / (4 t)
    assert phi_eval(power_law(2.0), 3.0, 0.5) == pytest.approx(9 / 2, rel=1e-9)


def test_phi_monotone_in_R():
    vals = [phi_eval(PROFILE, R, 0.01) for R in (0.05, 0.1, 0.2, 0.4)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_regularity_constants():
    reg = verify_regularity(PROFILE, np.logspace(-4, 0, 100))
    assert PROFILE.beta_min - 1e-9 <= reg.beta0 <= reg.beta1 <= PROFILE.beta_max + 1e-9
    assert reg.C >= 1
    with pytest.raises(ValueError):
        verify_regularity(PROFILE, np.logspace(-2, 0, 10))


def test_regime_classification():
    assert classify_regime(PROFILE).regime == "singular"
    assert classify_regime(power_law(2.5)).regime == "singular"
    assert classify_regime(power_law(2.0)).regime == "gaussian"
