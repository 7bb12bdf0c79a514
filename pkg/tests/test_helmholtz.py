import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dplab.grid import make_grid, quadrature
from dplab.helmholtz import (
    apply_helmholtz,
    dealiased_square,
    derived_fields,
    invert_helmholtz,
    resolvent_identity_residual,
)
from dplab.profiles import mollified_peakon

from conftest import band_limited


def spectral_d2_matrix(n, length):
    """Periodic Fourier second-derivative matrix from the cardinal-function formula."""
    h = 2 * np.pi / n
    j = np.arange(n)
    diff = j[:, None] - j[None, :]
    with np.errstate(divide="ignore"):
        off = -((-1.0) ** diff) / (2 * np.sin(diff * h / 2) ** 2)
    d2 = np.where(diff == 0, -np.pi**2 / (3 * h * h) - 1 / 6, off)
    return d2 * (2 * np.pi / length) ** 2


@pytest.mark.parametrize("a", [1.0, 4.0])
def test_cosine_eigenfunction(a):
    g = make_grid(2 * np.pi, 64)
    k = 5
    f = g.sample(lambda x: np.cos(k * x))
    out = invert_helmholtz(f, a)
    assert np.max(np.abs(out.values - np.cos(k * g.nodes) / (a + k * k))) < 1e-15


def test_rejects_other_shift():
    g = make_grid(10.0, 32)
    with pytest.raises(ValueError):
        invert_helmholtz(g.zeros(), 2.0)


@pytest.mark.parametrize("a", [1.0, 4.0])
def test_dense_solve_oracle(rng, a):
    g = make_grid(10.0, 128)
    f = band_limited(rng, g)
    dense = np.linalg.solve(a * np.eye(g.n) - spectral_d2_matrix(g.n, g.length), f.values)
    assert np.max(np.abs(invert_helmholtz(f, a).values - dense)) < 1e-10


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_mollified_peakon_to_smooth_peakon(grid60, c):
    u = mollified_peakon(c, 0.0, grid60, 64)
    v = invert_helmholtz(u, 4.0)
    # the mollifier pushes positive momentum 1/n to the right
    x = np.abs(grid60.nodes - 1 / 64)
    rho = c / 3 * np.exp(-x) - c / 6 * np.exp(-2 * x)
    assert np.max(np.abs(v.values - rho)) <= 1e-4 * np.max(rho)


def test_resolvent_identity_cosines():
    g = make_grid(2 * np.pi, 256)
    for k in (0, 1, 7, 60):
        assert resolvent_identity_residual(g.sample(lambda x: np.cos(k * x))) <= 1e-13


def test_resolvent_identity_random(rng):
    g = make_grid(30.0, 256)
    for _ in range(5):
        f = band_limited(rng, g)
        assert resolvent_identity_residual(f) <= 1e-12 * f.max_abs()


def test_resolvent_identity_zero():
    assert resolvent_identity_residual(make_grid(10.0, 64).zeros()) == 0.0


@given(seed=st.integers(0, 2**32 - 1), a=st.sampled_from([1.0, 4.0]))
@settings(max_examples=30, deadline=None)
def test_apply_inverts(seed, a):
    g = make_grid(20.0, 128)
    f = band_limited(np.random.default_rng(seed), g)
    back = apply_helmholtz(invert_helmholtz(f, a), a)
    assert np.max(np.abs(back.values - f.values)) < 1e-12


def test_derived_fields_peakon(grid60):
    c = 1.5
    u = mollified_peakon(c, 0.0, grid60, 64)
    d = derived_fields(u)
    x = np.abs(grid60.nodes - 1 / 64)
    rho = c / 3 * np.exp(-x) - c / 6 * np.exp(-2 * x)
    assert np.max(np.abs(d.v.values - rho)) < 1e-4 * c
    assert quadrature(d.y) == pytest.approx(2 * c, rel=1e-3)


def test_derived_fields_zero():
    d = derived_fields(make_grid(10.0, 64).zeros())
    for f in (d.y, d.v, d.h):
        assert not np.any(f.values)


def test_derived_fields_cosine():
    g = make_grid(2 * np.pi, 64)
    k = 3
    d = derived_fields(g.sample(lambda x: np.cos(k * x)))
    assert np.allclose(d.y.values, (1 + k * k) * np.cos(k * g.nodes), atol=1e-12)
    # u^2 = (1 + cos 2kx)/2, so h = 1/2 + cos(2kx) / (2 (1 + 4k^2))
    h = 0.5 + np.cos(2 * k * g.nodes) / (2 * (1 + 4 * k * k))
    assert np.allclose(d.h.values, h, atol=1e-13)


def test_dealiased_square_exact_for_low_modes(rng):
    g = make_grid(10.0, 128)
    f = band_limited(rng, g, modes=g.n // 4 - 1)
    assert np.max(np.abs(dealiased_square(f.values) - f.values**2)) < 1e-13


def test_dealiased_square_drops_aliases():
    g = make_grid(2 * np.pi, 32)
    k = 12  # 2k = 24 aliases onto mode 8 in a plain product
    f = np.cos(k * g.nodes)
    sq = dealiased_square(f)
    assert np.allclose(sq, 0.5, atol=1e-13)
