import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dplab.functionals import (
    WeightSpec,
    conserved,
    default_K,
    e_plus_gamma_m,
    energy,
    energy_density,
    h_distance_to_peakon,
    h_distance_to_train,
    h_norm,
    j_functional,
    localized_pair,
    peakon_field,
    periodized_rho,
    phi,
    psi,
    psi_k,
    psi_k_prime,
    psi_prime,
    psi_second,
    psi_third,
    train_spectral_tail,
    v_and_derivatives,
)
from dplab.grid import make_grid, quadrature, upsample
from dplab.profiles import TrainSpec, mollified_peakon, mollified_train

from conftest import band_limited


def brute_h_distance(u, c, r, m_factor=8):
    """||u - phi_c(. - r)||_H by direct quadrature of 4w^2 + 5w_x^2 + w_xx^2 on a refined grid."""
    g = u.grid
    m = m_factor * g.n
    v, vx, vxx = v_and_derivatives(u.values, g.length, m)
    x = g.x_min + np.arange(m) * g.length / m
    s = g.wrap(x - r)
    a = np.abs(s)
    rho = c / 3 * np.exp(-a) - c / 6 * np.exp(-2 * a)
    rho_x = np.sign(s) * (-c / 3 * np.exp(-a) + c / 3 * np.exp(-2 * a))
    rho_xx = 4 * rho - c * np.exp(-a)
    dens = 4 * (v - rho) ** 2 + 5 * (vx - rho_x) ** 2 + (vxx - rho_xx) ** 2
    return math.sqrt(np.sum(dens) * g.length / m)


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_peakon_conserved_values(grid60, c):
    ct = conserved(mollified_peakon(c, 0.0, grid60, 64))
    assert ct.E == pytest.approx(c * c / 3, rel=1e-3)
    assert ct.F == pytest.approx(2 * c**3 / 3, rel=1e-3)
    assert ct.M == pytest.approx(2 * c, rel=1e-3)


def test_conserved_zero():
    ct = conserved(make_grid(10.0, 64).zeros())
    assert (ct.M, ct.E, ct.F) == (0.0, 0.0, 0.0)


def test_energy_two_ways(rng):
    g = make_grid(20.0, 512)
    u = band_limited(rng, g)
    ct = conserved(u)
    assert energy(u) == pytest.approx(ct.E, rel=1e-12)
    assert ct.E_residual < 1e-12 * ct.E
    assert ct.F_residual < 1e-11 * max(abs(ct.F), 1.0)
    assert h_norm(u) == pytest.approx(math.sqrt(ct.E))


def test_energy_density_integrates_to_energy(peakon64):
    g = peakon64.grid
    m = 2 * g.n
    assert np.sum(energy_density(peakon64, m)) * g.length / m == pytest.approx(energy(peakon64), rel=1e-12)


def test_periodized_rho_image_sum():
    L = 7.0
    x = np.linspace(-3.5, 3.5, 11)
    direct = sum(
        1.3 / 3 * np.exp(-np.abs(x + m * L)) - 1.3 / 6 * np.exp(-2 * np.abs(x + m * L)) for m in range(-40, 41)
    )
    assert np.allclose(periodized_rho(1.3, x, L), direct, atol=1e-15)


def test_spectral_tail_leading_order(grid60):
    # H-energy of phi_c above Nyquist: 4c^2 / (3 pi k_N^3) to leading order
    kN = math.pi / grid60.spacing
    tail = train_spectral_tail((1.0,), (0.3,), grid60)
    assert tail == pytest.approx(4 / (3 * math.pi * kN**3), rel=1e-4)


def test_peakon_energy_resolved_plus_tail(grid60):
    c = 1.7
    resolved = energy(peakon_field(c, 0.0, grid60))
    assert resolved + train_spectral_tail((c,), (0.0,), grid60) == pytest.approx(c * c / 3, rel=1e-12)


@pytest.mark.parametrize("r", [0.0, 1 / 16, 0.3])
def test_h_distance_against_brute_force(r):
    g = make_grid(30.0, 4096)
    u = mollified_peakon(1.0, 0.0, g, 16)
    assert h_distance_to_peakon(u, 1.0, r) == pytest.approx(brute_h_distance(u, 1.0, r), rel=1e-4)


def test_h_distance_train_reduces_to_peakon(peakon64):
    assert h_distance_to_train(peakon64, (1.0,), (0.1,)) == h_distance_to_peakon(peakon64, 1.0, 0.1)


def test_h_distance_of_train_to_itself_is_tiny():
    g = make_grid(120.0, 16384)
    spec = TrainSpec((-1.0, 1.0), (-15.0, 15.0), 30.0)
    u = mollified_train(spec, g, 64)
    d = h_distance_to_train(u, spec.velocities, (-15.0 - 1 / 64, 15.0 + 1 / 64))
    assert d < 1e-3


def test_psi_values():
    assert psi(0.0) == 0.5
    expected = (1 / (3 * math.pi)) * math.exp(1 / 3) / (1 + math.exp(2 / 3))
    assert psi_prime(2.0) == pytest.approx(expected, rel=1e-14)
    assert psi(-200.0) == pytest.approx(0.0, abs=1e-14) and psi(200.0) == pytest.approx(1.0, abs=1e-14)


def test_phi_values():
    assert (phi(0.0), phi(1.0), phi(3.0)) == (0.0, 0.5, 1.0)
    assert phi(-5.0) == 0.0


@given(x=st.floats(-60, 60))
@settings(max_examples=50, deadline=None)
def test_psi_derivatives_by_differences(x):
    h = 1e-4
    assert psi_prime(x) == pytest.approx((psi(x + h) - psi(x - h)) / (2 * h), rel=1e-6, abs=1e-12)
    assert psi_second(x) == pytest.approx((psi_prime(x + h) - psi_prime(x - h)) / (2 * h), rel=1e-6, abs=1e-12)
    assert psi_third(x) == pytest.approx((psi_second(x + h) - psi_second(x - h)) / (2 * h), rel=1e-6, abs=1e-12)


def test_psi_k_scaling():
    assert psi_k(2.0, 0.5) == psi(4.0)
    assert psi_k_prime(2.0, 0.5) == pytest.approx(2 * psi_prime(4.0))


def test_weight_spec_validation():
    with pytest.raises(ValueError):
        WeightSpec(0.0, (0.0,))
    with pytest.raises(ValueError):
        WeightSpec(1.0, (1.0, 0.0))
    with pytest.raises(ValueError):
        WeightSpec(1.0, (0.0,), lam=-1.0)
    with pytest.raises(ValueError):
        WeightSpec(1.0, (0.0,), lam=0.6).check_lambda(1.0)
    assert default_K(64.0) == 1.0


def test_windows_telescope():
    ws = WeightSpec(1.5, (-10.0, 0.0, 7.0))
    x = np.linspace(-30, 30, 101)
    total = sum(ws.window(x, i) for i in (1, 2, 3))
    assert np.allclose(total, psi_k(x + 10.0, 1.5), atol=1e-15)


def big_box_peakon():
    g = make_grid(200.0, 16384)
    return mollified_peakon(1.0, 0.0, g, 32)


def test_localized_pair_whole_box():
    u = big_box_peakon()
    ct = conserved(u)
    E1, F1 = localized_pair(u, WeightSpec(1.0, (-99.0,)), 1)
    assert E1 == pytest.approx(ct.E, rel=1e-6)
    assert F1 == pytest.approx(ct.F, rel=1e-6)


def test_localized_pair_zero():
    g = make_grid(20.0, 256)
    assert localized_pair(g.zeros(), WeightSpec(1.0, (0.0,)), 1) == (0.0, 0.0)


def test_localized_pair_isolates_bump():
    L = 100.0
    g = make_grid(256.0, 8192)
    spec = TrainSpec((0.5, 1.0), (-L / 2, L / 2), L)
    u = mollified_train(spec, g, 16)
    K = default_K(L)
    ws = WeightSpec(K, (-L / 2 - L / 4, 0.0))
    # each window edge sits L/4 from its bump
    tail = 2 * (1 - psi_k(L / 4, K))
    for i, c in enumerate(spec.velocities, start=1):
        assert localized_pair(u, ws, i)[0] == pytest.approx(c * c / 3, rel=tail + 1e-3)


def test_j_functional_limits():
    u = big_box_peakon()
    ws = WeightSpec(1.0, (-99.0,))
    assert j_functional(u, ws, 1) == pytest.approx(energy(u), rel=1e-6)
    lam = 0.4
    ws = WeightSpec(1.0, (-60.0,), lam)
    assert j_functional(u, ws, 1) == pytest.approx(1 / 3 - lam * 2 / 3, rel=2e-3)
    assert j_functional(u.grid.zeros(), ws, 1) == 0.0
    with pytest.raises(IndexError):
        j_functional(u, ws, 2)


def test_e_plus_gamma_m_far_left():
    u = big_box_peakon()
    gamma = 1 / 2**9
    ct = conserved(u)
    assert e_plus_gamma_m(u, -99.0, gamma) == pytest.approx(ct.E + gamma * ct.M, rel=1e-6)
