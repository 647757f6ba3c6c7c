import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sci

from liouville_lab.energy import (EnergyLedger, GrowthSeries, InsufficientSpan,
                                  deficit_bound_check, energy_ledger,
                                  energy_ledgers, fit_exponent, geometric_radii,
                                  growth_series, holder_constant, holder_replay,
                                  lower_bound_check, modica_check,
                                  monotonicity_check, ratio_envelope, ratio_series)
from liouville_lab.fields import constant_field, counterexample, lift_1d, scaled
from liouville_lab.profile import Profile, allen_cahn_potential, kink
from liouville_lab.quadrature import DimensionError, ball_volume

KINK_ENERGY = 2 * math.sqrt(2) / 3
G = allen_cahn_potential()


@pytest.fixture(scope="module")
def p4():
    return Profile.build(4.0)


@pytest.fixture(scope="module")
def p3():
    return Profile.build(3.0)


def kink_field(N):
    return lift_1d(*kink(), N)


def test_geometric_radii_defaults():
    r = geometric_radii()
    assert r[0] == 1.0 and r[-1] == 128.0 and len(r) == 15


def test_slab_tail_contribution(p4):
    phi, sigma = counterexample(5, p4)
    s = growth_series(phi, sigma, [1.0, 2.0], mode="slab")
    assert abs(s.values[1] - s.values[0] - 15.0) <= 1e-10


def test_slab_value_at_one(p3):
    phi, sigma = counterexample(4, p3)
    s = growth_series(phi, sigma, [1.0], mode="slab")
    ref = 8 * sci.quad(p3.inv_g_prime, 0, 1, epsabs=1e-13, epsrel=1e-13)[0]
    assert s.values[0] > 0 and abs(s.values[0] - ref) <= 1e-10


@pytest.mark.parametrize("N", [1, 2, 3])
def test_ball_below_slab(p3, N):
    phi, sigma = counterexample(N, p3)
    radii = geometric_radii(1, 16)
    ball = growth_series(phi, sigma, radii, mode="ball")
    slab = growth_series(phi, sigma, radii, mode="slab")
    assert np.all(ball.values <= slab.values + 10 * ball.errors)
    assert np.all(np.diff(ball.values) > 0)
    assert np.all(ball.bound_violations() <= 0)


def test_ball_mode_dimension_cap(p3):
    phi, sigma = counterexample(4, p3)
    with pytest.raises(DimensionError):
        growth_series(phi, sigma, [1.0, 2.0], mode="ball")


def test_growth_rejects_small_radii(p3):
    phi, sigma = counterexample(1, p3)
    with pytest.raises(ValueError):
        growth_series(phi, sigma, [0.5, 2.0])


def test_fit_exact_power():
    r = geometric_radii(1, 128)
    assert abs(fit_exponent(GrowthSeries(r, r ** 3)) - 3) <= 1e-12


def test_fit_with_offset_approaches_exponent():
    small = geometric_radii(1, 16)
    large = geometric_radii(64, 1024)
    s1 = fit_exponent(GrowthSeries(small, small ** 3 + 100))
    s2 = fit_exponent(GrowthSeries(large, large ** 3 + 100))
    assert s1 < s2 < 3


def test_fit_needs_a_decade():
    r = geometric_radii(1, 8)
    with pytest.raises(InsufficientSpan):
        fit_exponent(GrowthSeries(r, r ** 2))


def test_fit_counterexample_n1_k3(p3):
    phi, sigma = counterexample(1, p3)
    s = growth_series(phi, sigma, geometric_radii(8, 128))
    assert abs(s.fitted_slope - 3) <= 0.05


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 6), st.floats(1e-3, 1e3))
def test_fit_recovers_power_law(a, c):
    r = geometric_radii(2, 200)
    assert abs(fit_exponent(GrowthSeries(r, c * r ** a)) - a) <= 1e-9


@pytest.mark.parametrize("N", [1, 2, 3])
def test_modica_on_kink(N):
    pts = np.random.default_rng(N).uniform(-10, 10, (1000, N))
    assert modica_check(kink_field(N), G, pts) <= 1e-10


def test_modica_constant():
    pts = np.random.default_rng(0).normal(size=(10, 2))
    assert abs(modica_check(constant_field(2, 0.5), G, pts) + 0.140625) <= 1e-15


def test_modica_flags_scaled_kink():
    pts = np.random.default_rng(0).uniform(-3, 3, (1000, 2))
    assert modica_check(scaled(kink_field(2), 2.0), G, pts) > 0.1


def test_kink_energy_one_dimension():
    L = energy_ledger(kink_field(1), G, 10.0)
    assert abs(L.energy - KINK_ENERGY) <= 1e-6
    assert abs(L.dirichlet - KINK_ENERGY / 2) <= 1e-6


@pytest.mark.parametrize("N", [1, 2, 3])
def test_kink_deficits_vanish(N):
    for L in energy_ledgers(kink_field(N), G, [1.0, 3.0, 7.5]):
        assert abs(L.deficit) <= 1e-9 and abs(L.weighted_deficit) <= 1e-9
        assert abs(L.ratio - 1) <= 1e-8
        assert abs(L.energy - L.phi_R * L.R ** (N - 1)) <= 1e-12 * L.energy


def test_kink_dirichlet_against_scipy():
    # disk of radius R: chord length 2 sqrt(R^2 - t^2)
    u, du = kink()
    R = 6.0
    ref = sci.quad(lambda t: 0.5 * du(t) ** 2 * 2 * math.sqrt(R * R - t * t), -R, R,
                   epsabs=1e-13, epsrel=1e-13)[0]
    assert abs(energy_ledger(kink_field(2), G, R).dirichlet - ref) <= 1e-9


def test_constant_ledger():
    c, R = 0.5, 3.0
    L = energy_ledger(constant_field(2, c), G, R)
    assert L.ratio == 0.0
    assert abs(L.phi_R - G.G(c) * math.pi * R) <= 1e-12


def test_ratio_needs_positive_potential():
    L = EnergyLedger(1.0, 1, 0.0, 0.0, 0.0, 0.0)
    with pytest.raises(ZeroDivisionError):
        L.ratio


def test_monotonicity_kink():
    assert monotonicity_check(kink_field(2), G, np.linspace(1, 20, 20)) >= -1e-8


def test_monotonicity_kink_one_dimension():
    radii = np.linspace(1, 20, 20)
    ledgers = energy_ledgers(kink_field(1), G, radii)
    phis = np.array([L.phi_R for L in ledgers])
    assert np.all(np.diff(phis) >= 0) and phis[-1] <= KINK_ENERGY + 1e-12


def test_monotonicity_constant():
    radii = np.linspace(1, 10, 10)
    ledgers = energy_ledgers(constant_field(2, 0.3), G, radii)
    phis = np.array([L.phi_R for L in ledgers])
    assert np.allclose(phis, G.G(0.3) * math.pi * radii, rtol=1e-12)


def test_ratio_series_kink():
    for R, q in ratio_series(kink_field(3), G, [1.0, 2.0, 5.0]):
        assert abs(q - 1) <= 1e-8


def test_ratio_series_constant():
    assert all(q == 0 for _, q in ratio_series(constant_field(1, 0.2), G, [1.0, 2.0]))


def synthetic_ledgers(N, radii, C2, c0):
    """Ledgers with deficit C2 R^(N-4/3) and Dirichlet energy c0 R^(N-1) / 2."""
    out = []
    for R in radii:
        dirichlet = 0.5 * c0 * R ** (N - 1)
        deficit = C2 * R ** (N - 4 / 3)
        out.append(EnergyLedger(R, N, dirichlet, dirichlet + deficit, deficit, 0.0))
    return out


@pytest.mark.parametrize("N", [1, 2, 3])
def test_ratio_envelope_on_synthetic_ledgers(N):
    radii = geometric_radii(1, 1000)
    C2, c0 = 0.7, 2.0
    gaps = np.array([1 - L.ratio for L in synthetic_ledgers(N, radii, C2, c0)])
    env = ratio_envelope(C2, c0, radii)
    assert np.all(gaps <= env * (1 + 1e-12))
    assert np.all(np.diff(gaps) < 0)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_deficit_bounds_on_kink(N):
    ledgers = energy_ledgers(kink_field(N), G, geometric_radii(1, 32))
    b = deficit_bound_check(ledgers, N, K=1.0, M=0.25)
    assert b.pass_i and b.pass_ii
    assert b.C1_measured <= 1e-9 and b.C2_measured <= 1e-9


def test_deficit_bound_flags_violation():
    N = 2
    radii = geometric_radii(1, 64)
    ledgers = [EnergyLedger(R, N, 1.0, 1.0 + R ** N, R ** N, R ** N) for R in radii]
    b = deficit_bound_check(ledgers, N, K=1.0)
    assert not b.pass_i and not b.pass_ii


def test_deficit_bound_needs_five_radii():
    with pytest.raises(ValueError):
        deficit_bound_check(energy_ledgers(kink_field(1), G, [1.0, 2.0]), 1, 1.0)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_holder_replay_exact_power(N):
    C1 = 0.83
    ledgers = [EnergyLedger(R, N, 1.0, 1.0, 0.0, C1 * R ** (N - 2))
               for R in geometric_radii(1, 64)]
    assert abs(holder_replay(ledgers, N) - C1 ** (2 / 3) * ball_volume(N) ** (1 / 3)) <= 1e-10
    assert holder_constant(C1, N) == pytest.approx(C1 ** (2 / 3) * ball_volume(N) ** (1 / 3),
                                                   rel=1e-14)


def test_lower_bound_one_dimension():
    lb = lower_bound_check(kink_field(1), geometric_radii(8, 128))
    assert lb.passed and abs(lb.c_measured - KINK_ENERGY) <= 1e-4


def test_lower_bound_two_dimensions_against_scipy():
    u, du = kink()
    radii = [10.0, 20.0, 40.0]
    lb = lower_bound_check(kink_field(2), radii)
    for R, q in zip(radii, lb.quotients):
        ref = sci.quad(lambda t: du(t) ** 2 * 2 * math.sqrt(R * R - t * t), -R, R,
                       epsabs=1e-12, epsrel=1e-12)[0]
        assert abs(q - ref / R) <= 1e-9
    assert lb.passed
    # quotient tends to twice the 1-D Dirichlet integral
    assert abs(lb.quotients[-1] - 2 * KINK_ENERGY) <= 0.01


def test_lower_bound_constant_fails():
    assert not lower_bound_check(constant_field(2, 0.4), [1.0, 2.0, 4.0]).passed


def test_lower_bound_span():
    with pytest.raises(ValueError):
        lower_bound_check(kink_field(1), [1.0, 2.0])
