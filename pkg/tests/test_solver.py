import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dplab.diagnostics import v_of
from dplab.experiments import run_shock
from dplab.functionals import conserved
from dplab.grid import differentiate, make_grid
from dplab.identities import locate_crest
from dplab.profiles import mollified_peakon
from dplab.solver import (
    NO_FILTER,
    BlowUp,
    Filter,
    History,
    Trajectory,
    constant_weight,
    evolve,
    fit_order,
    flow_map,
    initial_state,
    rhs,
    shifted_psi_weight,
    smooth_variable_rhs_check,
    stable_dt,
    step,
    virial_residuals,
)


@pytest.fixture(scope="module")
def grid40():
    return make_grid(40.0, 4096)


@pytest.fixture(scope="module")
def peakon40(grid40):
    return mollified_peakon(1.0, 0.0, grid40, 16)


def test_rhs_zero_and_constant():
    g = make_grid(10.0, 64)
    assert not np.any(rhs(g.zeros()).values)
    assert np.max(np.abs(rhs(g.field(np.full(64, 0.7))).values)) < 1e-14


def test_rhs_traveling_wave(peakon40):
    # u_t = -c u_x for the translate; the mollified profile is close to it
    r = rhs(peakon40).values
    ux = differentiate(peakon40, 1).values
    assert np.linalg.norm(r + ux) <= 0.05 * np.linalg.norm(ux)


def test_filter_factors(grid40):
    f = Filter().factors(grid40)
    assert f[0] == 1.0 and f[-1] == pytest.approx(np.exp(-36.0))
    assert np.all(NO_FILTER.factors(grid40) == 1.0)


def test_stable_dt(peakon40):
    assert stable_dt(peakon40, 0.3) == pytest.approx(0.3 * peakon40.grid.spacing)
    with pytest.raises(ValueError):
        initial_state(peakon40, cfl=0.0)


def test_step_zero_dt(peakon40):
    s = initial_state(peakon40)
    assert step(s, 0.0) is s


def test_step_zero_field():
    g = make_grid(10.0, 64)
    s = step(initial_state(g.zeros()))
    assert not np.any(s.u.values)


def test_step_advects_crest(peakon40):
    s = initial_state(peakon40)
    x0 = locate_crest(peakon40)
    n = 20
    for _ in range(n):
        s = step(s, flt=NO_FILTER)
    shift = locate_crest(s.u) - x0
    assert shift == pytest.approx(n * s.dt, rel=2e-2)


def test_blowup_detected():
    g = make_grid(10.0, 64)
    s = initial_state(g.sample(lambda x: 2e6 * np.exp(-x * x)))
    with pytest.raises(BlowUp):
        step(s, 1e-3)


def test_evolve_no_op(peakon40):
    s = initial_state(peakon40)
    res = evolve(s, 0.0, [lambda st: st.t])
    assert res.state is s and res.samples == [(0.0,)]
    with pytest.raises(ValueError):
        evolve(s, -1.0)


def test_evolve_conservation_short(peakon40):
    c0 = conserved(peakon40)
    res = evolve(initial_state(peakon40), 1.0)
    c1 = conserved(res.state.u)
    assert res.state.t == pytest.approx(1.0)
    assert abs(c1.M - c0.M) <= 1e-10 * abs(c0.M)
    assert abs(c1.E - c0.E) <= 1e-6 * c0.E
    assert abs(c1.F - c0.F) <= 1e-6 * c0.F


def test_shock_amplitude_tracks_exact_decay():
    run = run_shock(1.0, 40.0, 4096, 2.0)
    assert np.max(run.rel_error) <= 0.05


def test_smooth_variable_half_form(peakon40):
    s = initial_state(peakon40)
    chk = smooth_variable_rhs_check(s)
    assert chk.verdict == "half" and chk.passed
    assert chk.ratio == pytest.approx(0.5, abs=1e-3)
    assert chk.residual_full >= 2 * chk.residual_half


def test_smooth_variable_refinement(peakon40):
    s = initial_state(peakon40)
    a = smooth_variable_rhs_check(s, s.dt).residual_half
    b = smooth_variable_rhs_check(s, s.dt / 2).residual_half
    assert a / b == pytest.approx(4.0, rel=0.15)


def test_smooth_variable_zero():
    g = make_grid(10.0, 64)
    chk = smooth_variable_rhs_check(initial_state(g.zeros(), dt=0.01))
    assert chk.residual_half == 0.0 and chk.residual_full == 0.0


def test_flow_map_constant():
    g = make_grid(10.0, 64)
    hist = History(g)
    for t in np.linspace(0, 1, 6):
        hist.append(initial_state(g.field(np.full(64, 0.4)), t=t))
    tr = flow_map(hist, 1.0)
    assert np.allclose(tr.positions, 1.0 + 0.4 * tr.times, atol=1e-13)


def test_flow_map_follows_crest(grid60):
    # the crest particle moves at u(crest) < c and lags; sharper data lags less
    slopes = []
    for n_moll in (16, 64):
        u = mollified_peakon(1.0, 0.0, grid60, n_moll)
        res = evolve(initial_state(u), 2.0, out_every=20, keep_history=True)
        slopes.append(flow_map(res.history, locate_crest(u)).slope())
    assert slopes[0] < slopes[1] < 1.0
    assert slopes[1] == pytest.approx(1.0, abs=3e-2)


@given(a=st.floats(-15, 14), gap=st.floats(1e-3, 5))
@settings(max_examples=15, deadline=None)
def test_flow_map_order_preserving(a, gap):
    hist = _short_history()
    lo, hi = flow_map(hist, [a, a + gap])
    assert np.all(lo.positions < hi.positions)


_HIST = {}


def _short_history():
    if "h" not in _HIST:
        g = make_grid(40.0, 1024)
        u = mollified_peakon(1.0, 0.0, g, 8) + g.sample(lambda x: -0.3 * np.exp(-((x + 5) ** 2)))
        _HIST["h"] = evolve(initial_state(u), 1.0, out_every=10, keep_history=True).history
    return _HIST["h"]


def test_history_rejects_repeated_time(peakon40):
    h = History(peakon40.grid)
    s = initial_state(peakon40)
    h.append(s)
    h.append(s)
    assert len(h) == 1


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory("x", [0.0, 0.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        Trajectory("x", [0.0, 1.0], [1.0])


def test_fit_order():
    assert fit_order([1, 0.5, 0.25], [1, 0.25, 0.0625]) == pytest.approx(2.0)
    assert np.isnan(fit_order([1, 0.5], [0.0, 1.0]))


def test_virial_constant_weight(peakon40):
    s = initial_state(peakon40)
    for r in virial_residuals(s, constant_weight()):
        assert r.rate == pytest.approx(0.0, abs=1e-12)
        assert max(r.residuals) < 1e-9


@pytest.fixture(scope="module")
def virial_state():
    g = make_grid(60.0, 8192)
    return initial_state(mollified_peakon(1.0, 0.0, g, 16))


def test_virial_order_two(virial_state):
    dt = virial_state.dt
    for r in virial_residuals(virial_state, shifted_psi_weight(1.0), (2 * dt, dt, dt / 2)):
        assert r.order == pytest.approx(2.0, abs=0.2), r.name


@pytest.mark.parametrize("coeffs", [{"energy_vh": 5.0}, {"momentum": 1.5}])
def test_printed_coefficients_plateau(virial_state, coeffs):
    dt = virial_state.dt
    name = "energy" if "energy_vh" in coeffs else "momentum"
    res = {r.name: r for r in virial_residuals(virial_state, shifted_psi_weight(1.0), (2 * dt, dt, dt / 2), **coeffs)}
    assert abs(res[name].order) < 0.5
    assert min(res[name].rel_residuals) > 1e-4
