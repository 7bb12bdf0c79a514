import json
import math
import warnings

import numpy as np
import pytest

from dplab.diagnostics import (
    DegenerateField,
    Tracker,
    TrackingError,
    argmax_refined,
    decay_window_report,
    diagnostics_row,
    momentum,
    monotonicity_series,
    orbital_distance,
    orthogonality_residual,
    polish_extremum,
    speed_band_violation,
    train_track,
    u_minus_6v_envelope,
    v_of,
    y_mass_split,
)
from dplab.functionals import WeightSpec, energy, h_distance_to_peakon
from dplab.grid import make_grid
from dplab.helmholtz import invert_helmholtz
from dplab.profiles import TrainSpec, bump, mollified_peakon, mollified_train, smooth_peakon
from dplab.solver import evolve, initial_state


def test_argmax_smooth_peakon(grid60):
    dx = grid60.spacing
    x0 = 0.3 * dx
    assert abs(argmax_refined(smooth_peakon(1.0, x0, grid60)) - x0) <= dx * dx
    assert argmax_refined(smooth_peakon(1.0, 0.0, grid60)) == 0.0


def test_argmax_cosine(grid60):
    v = grid60.sample(lambda x: np.cos(2 * np.pi * x / 60))
    assert abs(argmax_refined(v)) <= grid60.spacing**2


def test_argmin_and_window(grid60):
    v = smooth_peakon(-1.0, 10.0, grid60) + smooth_peakon(2.0, -10.0, grid60)
    dx2 = grid60.spacing**2
    assert argmax_refined(v, (0.0, 20.0), "min") == pytest.approx(10.0, abs=dx2)
    assert argmax_refined(v, (-20.0, 0.0)) == pytest.approx(-10.0, abs=dx2)


def test_argmax_window_across_seam(grid60):
    v = smooth_peakon(1.0, 29.0, grid60)
    assert argmax_refined(v, (25.0, 35.0)) == pytest.approx(29.0, abs=grid60.spacing**2)


def test_argmax_leftmost_tie():
    g = make_grid(10.0, 64)
    vals = np.zeros(64)
    vals[[10, 40]] = 1.0
    x = argmax_refined(g.field(vals))
    assert abs(x - g.nodes[10]) < g.spacing


def test_argmax_flat_field_warns():
    g = make_grid(10.0, 64)
    with pytest.warns(DegenerateField):
        assert argmax_refined(g.zeros()) == 0.0


def test_polish_extremum_reaches_peak(grid60):
    v = v_of(mollified_peakon(1.0, 0.0, grid60, 64))
    xi = polish_extremum(v, argmax_refined(v))
    assert xi == pytest.approx(1 / 64, abs=1e-6)


def test_orbital_distance_self_and_translate(grid60):
    u = mollified_peakon(1.0, 0.0, grid60, 64)
    od = orbital_distance(u, 1.0)
    assert od.distance < 1e-3 and od.shift == pytest.approx(1 / 64, abs=1e-3)
    od3 = orbital_distance(mollified_peakon(1.0, 3.0, grid60, 64), 1.0)
    assert od3.shift == pytest.approx(3 + 1 / 64, abs=1e-3)


def test_orbital_distance_brute_force(grid60):
    base = mollified_peakon(1.0, 0.0, grid60, 64)
    pert = invert_helmholtz(bump(grid60, 2.0, 0.6, 1.0), 1.0)
    u = base + pert * (0.01 / math.sqrt(energy(pert)))
    od = orbital_distance(u, 1.0)
    assert 0.005 <= od.distance <= 0.02
    # scan shifts on a grid ten times finer than the nodes
    rs = od.shift + np.arange(-30, 31) * grid60.spacing / 10
    brute = min(h_distance_to_peakon(u, 1.0, r) for r in rs)
    assert od.distance <= brute + 1e-12
    assert od.distance == pytest.approx(brute, rel=1e-3)


def test_orthogonality_residual(grid60):
    v = smooth_peakon(1.0, 0.0, grid60)
    assert abs(orthogonality_residual(v, 0.0, 1.0)) < 1e-15
    for off in (-0.5, -0.1, 0.1, 0.5):
        assert np.sign(orthogonality_residual(v, off, 1.0)) == np.sign(off)
    assert orthogonality_residual(grid60.zeros(), 0.3, 1.0) == 0.0


def test_y_mass_split_nonnegative(grid60):
    pos, neg, tot = y_mass_split(bump(grid60, 0.0, 1.0, 2.0))
    assert neg == 0.0 and pos == pytest.approx(2.0) and tot == pos


def test_y_mass_split_train():
    g = make_grid(120.0, 16384)
    u = mollified_train(TrainSpec((-1.0, 1.5), (-15.0, 15.0), 30.0), g, 16)
    pos, neg, _ = y_mass_split(momentum(u))
    assert pos == pytest.approx(3.0, rel=1e-6) and neg == pytest.approx(2.0, rel=1e-6)
    assert y_mass_split(momentum(u), 30.0, 50.0)[2] < 1e-12


def test_decay_window_pure_peakon(grid60):
    u = mollified_peakon(1.0, 0.0, grid60, 64)
    rep = decay_window_report(u, 0.0, 1 / 64, 1.0, y_mass_split(momentum(u))[2])
    assert rep.mass < 1e-12
    assert rep.bound == pytest.approx(2.0, rel=1e-6)
    # u - 6v vanishes at the crest and stays small nearby
    assert abs(rep.u_minus_6v) < 0.05


def test_u_minus_6v_of_exact_peakon_at_crest(grid60):
    from dplab.functionals import peakon_field

    u = peakon_field(1.0, 0.0, grid60)
    mid = grid60.n // 2
    assert abs(u.values[mid] - 6 * v_of(u).values[mid]) < 2e-2


def test_u_minus_6v_envelope():
    from dplab.diagnostics import DecayWindowReport

    reps = [DecayWindowReport(t, 0.0, 0.0, 1.0, 0.1 * math.exp(-t / 32)) for t in (0.0, 1.0, 2.0)]
    C, ok = u_minus_6v_envelope(reps, 1.0)
    assert C == 0.1 and ok


def _train_history(T=1.0):
    g = make_grid(120.0, 8192)
    spec = TrainSpec((-1.0, 1.0), (-15.0, 15.0), 30.0)
    u = mollified_train(spec, g, 16)
    return spec, evolve(initial_state(u), T, out_every=50, keep_history=True).history


def test_train_track_rigid_motion():
    spec, hist = _train_history()
    track = train_track(hist, spec)
    t = track.times
    for col, (c, z) in enumerate(zip(spec.velocities, spec.shifts)):
        expected = z + np.sign(c) / 16 + c * t
        assert np.max(np.abs(track.xi[:, col] - expected)) < 2e-2
    assert np.all(np.diff(track.gaps()[:, 0]) > 0)
    assert speed_band_violation(track, spec.velocities, spec.sigma) <= 0


def test_tracker_collision():
    g = make_grid(40.0, 1024)
    u = smooth_peakon(1.0, 0.0, g)

    class S:
        t = 0.0

    S.u = u
    tr = Tracker((0.5, 1.0), (0.0, 0.0), 5.0)
    with pytest.raises(TrackingError):
        tr(S)


def test_monotonicity_single_peakon():
    g = make_grid(120.0, 8192)
    spec = TrainSpec((1.0,), (0.0,), 30.0)
    u = mollified_peakon(1.0, 0.0, g, 16)
    hist = evolve(initial_state(u), 1.0, out_every=50, keep_history=True).history
    track = train_track(hist, spec)
    # y_1 sits L/4 behind the crest; a narrow transition leaves no tail
    series = monotonicity_series(hist, track, spec, K=0.05)
    assert series.J[0, 0] == pytest.approx(energy(u), rel=1e-6)
    assert abs(series.max_increment) < 1e-6
    # a wide transition starts below E and can only gain its initial deficit
    wide = monotonicity_series(hist, track, spec, K=1.0)
    assert 0 < wide.max_increment <= energy(u) - wide.J[0, 0]


def test_diagnostics_row_json(grid60):
    u = mollified_peakon(1.0, 0.0, grid60, 64)
    row = diagnostics_row(0.5, u, xi=(0.0156,), J=(0.3,))
    d = json.loads(row.to_json())
    assert d["t"] == 0.5 and d["xi"] == [0.0156] and d["x0"] is None
    assert d["E"] == pytest.approx(1 / 3, rel=1e-3)
