"""
Stability measurements: modulation points, orbital distances, momentum
mass splits, decay windows, train tracking and monotonicity series.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .functionals import (
    WeightSpec,
    e_plus_gamma_m,
    h_distance_to_peakon,
    h_distance_to_train,
    j_functional,
    peakon_spectrum,
)
from .grid import Field, interpolate, spectral_derivative
from .helmholtz import helmholtz_values
from .profiles import TrainSpec, regularized_momentum, smooth_peakon


class DegenerateField(RuntimeWarning):
    pass


def _window_mask(x: np.ndarray, window, length: float) -> np.ndarray:
    if window is None:
        return np.ones_like(x, dtype=bool)
    lo, hi = window
    if hi <= lo:
        raise ValueError("empty window")
    if hi - lo >= length:
        return np.ones_like(x, dtype=bool)
    # windows may straddle the periodic seam
    rel = (x - lo) % length
    return rel <= (hi - lo)


def argmax_refined(v: Field, window=None, kind: str = "max") -> float:
    """
    Location of the extremum of ``v`` inside ``window`` (an interval or
    None for the whole box), refined by a three-point parabola.

    Exact ties go to the leftmost node. A flat field returns the window
    centre with a :class:`DegenerateField` warning.
    """
    if kind not in ("max", "min"):
        raise ValueError("kind must be 'max' or 'min'")
    g = v.grid
    vals = v.values if kind == "max" else -v.values
    mask = _window_mask(g.nodes, window, g.length)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("window contains no grid node")
    if window is not None and g.length > window[1] - window[0]:
        # order the window nodes from its left end so ties resolve leftmost
        order = np.argsort((g.nodes[idx] - window[0]) % g.length, kind="stable")
        idx = idx[order]
    sub = vals[idx]
    if np.ptp(sub) == 0:
        warnings.warn("flat field: extremum is degenerate", DegenerateField, stacklevel=2)
        if window is None:
            return 0.0
        return float(g.wrap(0.5 * (window[0] + window[1])))
    j = int(idx[int(np.argmax(sub))])
    n = g.n
    fm, f0, fp = vals[(j - 1) % n], vals[j], vals[(j + 1) % n]
    denom = fm - 2 * f0 + fp
    shift = 0.0 if denom == 0 else 0.5 * (fm - fp) / denom
    shift = max(-0.5, min(0.5, shift))
    return float(g.wrap(g.nodes[j] + shift * g.spacing))


def polish_extremum(v: Field, x: float, steps: int = 3) -> float:
    """Newton iterations on the spectral interpolant of v_x starting at x."""
    g = v.grid
    vx = spectral_derivative(v.values, g.length, 1)
    vxx = spectral_derivative(v.values, g.length, 2)
    for _ in range(steps):
        d1 = interpolate(vx, g.length, x)[0]
        d2 = interpolate(vxx, g.length, x)[0]
        if d2 == 0:
            break
        step = -d1 / d2
        if abs(step) > g.spacing:
            break
        x = x + step
    return float(g.wrap(x))


def v_of(u: Field) -> Field:
    return Field(u.grid, helmholtz_values(u.values, u.grid.length, 4.0))


def value_at(f: Field, x) -> np.ndarray:
    return interpolate(f.values, f.grid.length, x)


def linf_distance_to_peakon(u: Field, c: float, r: float) -> float:
    """max over nodes of |u - c e^{-|x - r|}| (min-image distance)."""
    g = u.grid
    d = np.abs(g.wrap(g.nodes - r))
    return float(np.max(np.abs(u.values - c * np.exp(-d))))


# orbital distance --------------------------------------------------------------

@dataclass(frozen=True)
class OrbitalDistance:
    distance: float
    shift: float
    #: distance at the argmax of v
    distance_at_xi: float
    xi: float


def orbital_distance(u: Field, c: float, window=None) -> OrbitalDistance:
    """
    inf over r of ||u - phi_c(. - r)||_H: a scan over node shifts followed
    by bounded scalar refinement around the best node.
    """
    from scipy.optimize import minimize_scalar

    g = u.grid
    v = v_of(u)
    mask = _window_mask(g.nodes, window, g.length)
    # ||u - phi_c(.-r)||^2 = E(u) + E(phi_c) - 4c v(r) on node shifts
    vals = np.where(mask, v.values, -np.inf) if c > 0 else np.where(mask, -v.values, -np.inf)
    j = int(np.argmax(vals))
    x0 = g.nodes[j]
    res = minimize_scalar(
        lambda r: h_distance_to_peakon(u, c, r),
        bounds=(x0 - g.spacing, x0 + g.spacing),
        method="bounded",
        options={"xatol": 1e-10 * max(1.0, g.length)},
    )
    best_r, best_d = float(res.x), float(res.fun)
    d_node = h_distance_to_peakon(u, c, x0)
    if d_node < best_d:
        best_r, best_d = float(x0), d_node
    kind = "max" if c > 0 else "min"
    xi = polish_extremum(v, argmax_refined(v, window, kind))
    d_xi = h_distance_to_peakon(u, c, xi)
    return OrbitalDistance(best_d, float(g.wrap(best_r)), d_xi, xi)


def orthogonality_residual(v: Field, xi: float, c: float) -> float:
    """int v(x) rho_c'(x - xi) dx with rho_c the smooth peakon."""
    g = v.grid
    s = g.wrap(g.nodes - xi)
    a = np.abs(s)
    rho_p = np.sign(s) * (-c / 3 * np.exp(-a) + c / 3 * np.exp(-2 * a))
    return float(g.spacing * np.sum(v.values * rho_p))


# momentum masses ------------------------------------------------------------------

def y_mass_split(y: Field, window_left: float | None = None, window_right: float | None = None):
    """(positive mass, negative mass, L1 mass) of y, optionally on [window_left, window_right]."""
    g = y.grid
    vals = y.values
    if window_left is not None:
        right = g.x_min + g.length if window_right is None else window_right
        sel = _window_mask(g.nodes, (window_left, right), g.length) if right > window_left else np.zeros(g.n, bool)
        vals = np.where(sel, vals, 0.0)
    pos = float(g.spacing * np.sum(np.clip(vals, 0, None)))
    neg = float(g.spacing * np.sum(np.clip(-vals, 0, None)))
    return pos, neg, pos + neg


def momentum(u: Field, regularize: bool = True) -> Field:
    """y = (1 - d^2)u, Gaussian-regularized by default (see profiles)."""
    if regularize:
        return regularized_momentum(u)
    k = u.grid.wavenumbers
    return Field(u.grid, np.fft.irfft(np.fft.rfft(u.values) * (1 + k * k), n=u.grid.n))


# tracking -------------------------------------------------------------------------

class TrackingError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


@dataclass(frozen=True)
class ModulationTrack:
    """Windowed extrema of v for every bump of a train."""

    labels: tuple
    kinds: tuple
    times: np.ndarray
    #: shape (samples, bumps), unwrapped positions
    xi: np.ndarray

    def trajectory(self, j: int):
        from .solver import Trajectory

        col = self.labels.index(j)
        return Trajectory(f"modulation({j})", self.times, self.xi[:, col])

    def speeds(self, t_from: float = 0.0) -> np.ndarray:
        sel = self.times >= t_from
        return np.array([np.polyfit(self.times[sel], self.xi[sel, i], 1)[0] for i in range(len(self.labels))])

    def gaps(self) -> np.ndarray:
        return np.diff(self.xi, axis=1)


class Tracker:
    """
    Incremental windowed argmax/argmin of v, one window per bump, each
    re-centred on the previous position predicted forward by c_i dt.
    """

    def __init__(self, velocities: Sequence[float], positions: Sequence[float], half_width: float):
        self.c = tuple(float(c) for c in velocities)
        self.kinds = tuple("max" if c > 0 else "min" for c in self.c)
        self.half_width = half_width
        self.last = np.array(positions, dtype=float)
        self.last_t = None
        self.times: list = []
        self.rows: list = []

    def __call__(self, state) -> np.ndarray:
        u = state.u
        g = u.grid
        v = v_of(u)
        t = state.t
        dt = 0.0 if self.last_t is None else t - self.last_t
        out = []
        for c, kind, prev in zip(self.c, self.kinds, self.last):
            centre = prev + c * dt
            win = (centre - self.half_width, centre + self.half_width)
            x = polish_extremum(v, argmax_refined(v, win, kind))
            # unwrap next to the predicted centre
            x = centre + float(g.wrap(x - centre))
            out.append(x)
        out = np.array(out)
        if np.any(np.diff(out) <= 0):
            raise TrackingError(f"modulation windows collided at t={t:g}: {out.tolist()}", t)
        self.last = out
        self.last_t = t
        self.times.append(t)
        self.rows.append(out)
        return out

    def track(self, labels: Sequence[int]) -> ModulationTrack:
        return ModulationTrack(tuple(labels), self.kinds, np.array(self.times), np.array(self.rows))


def train_track(history, spec: TrainSpec, half_width: float | None = None) -> ModulationTrack:
    """Track every bump of ``spec`` through a stored history."""
    hw = spec.separation / 4 if half_width is None else half_width
    tr = Tracker(spec.velocities, spec.shifts, hw)

    class _S:
        pass

    for t, u in history.fields():
        s = _S()
        s.t, s.u = t, u
        tr(s)
    return tr.track(spec.labels)


def speed_band_violation(track: ModulationTrack, velocities: Sequence[float], sigma: float,
                         t_from: float = 0.0) -> float:
    """max_i |fitted speed_i - c_i| - sigma/8 (nonpositive when inside the band)."""
    sp = track.speeds(t_from)
    return float(np.max(np.abs(sp - np.asarray(velocities)) - sigma / 8))


# decay window -----------------------------------------------------------------------

@dataclass(frozen=True)
class DecayWindowReport:
    t: float
    window_left: float
    mass: float
    bound: float
    #: max of u - 6v on ]xi - 8, box right]
    u_minus_6v: float


def decay_window_report(u: Field, t: float, xi: float, c: float, y0_l1: float) -> DecayWindowReport:
    g = u.grid
    left = xi - c * t / 16
    y = momentum(u)
    _, neg, _ = y_mass_split(y, left, xi + g.length / 2 - g.spacing)
    v = v_of(u)
    sel = _window_mask(g.nodes, (xi - 8, xi + g.length / 2 - g.spacing), g.length)
    gap = float(np.max((u.values - 6 * v.values)[sel]))
    return DecayWindowReport(t, left, neg, math.exp(-c * t / 8) * y0_l1, gap)


def decay_window_series(history, c: float, xi_series: Sequence[float]) -> list[DecayWindowReport]:
    """Reports along a history given the tracked crest positions."""
    y0 = momentum(history.field(0))
    y0_l1 = y_mass_split(y0)[2]
    return [
        decay_window_report(u, t, float(x), c, y0_l1)
        for (t, u), x in zip(history.fields(), xi_series)
    ]


def u_minus_6v_envelope(reports: Sequence[DecayWindowReport], c: float) -> tuple[float, bool]:
    """Fit C in max(u - 6v) <= C e^{-ct/32} at t=0 and check every sample."""
    C = max(reports[0].u_minus_6v, 0.0)
    ok = all(r.u_minus_6v <= C * math.exp(-c * r.t / 32) + 1e-8 for r in reports)
    return C, ok


# monotonicity -------------------------------------------------------------------------

def weight_centers(track: ModulationTrack, velocities: Sequence[float], L: float, t_index: int) -> tuple:
    """y_1 = x_1(0) + c_1 t/2 - L/4 and y_i = (x_{i-1} + x_i)/2 for right-moving bumps."""
    pos_cols = [k for k, c in enumerate(velocities) if c > 0]
    c1 = velocities[pos_cols[0]]
    t = track.times[t_index]
    x = track.xi[t_index]
    y1 = track.xi[0, pos_cols[0]] + c1 * t / 2 - L / 4
    rest = [(x[a] + x[b]) / 2 for a, b in zip(pos_cols, pos_cols[1:])]
    return (y1, *rest)


@dataclass(frozen=True)
class MonotonicitySeries:
    times: np.ndarray
    #: shape (samples, N_+)
    J: np.ndarray
    e_gamma_m: np.ndarray
    K: float
    lam: float

    @property
    def increments(self) -> np.ndarray:
        """max_t (J_j(t) - J_j(0)) for each j."""
        return np.max(self.J - self.J[0], axis=0)

    @property
    def max_increment(self) -> float:
        return float(np.max(self.increments))


def monotonicity_series(history, track: ModulationTrack, spec: TrainSpec, K: float, lam: float = 0.0,
                        gamma: float | None = None) -> MonotonicitySeries:
    """J_{j,lam,K}(t) along a history, with centres built from the track."""
    if len(track.times) != len(history):
        raise ValueError("track and history have different sample counts")
    c_pos = [c for c in spec.velocities if c > 0]
    if not c_pos:
        raise ValueError("monotonicity needs a right-moving bump")
    gamma = c_pos[0] / 2**9 if gamma is None else gamma
    Js, Eg = [], []
    for k, (t, u) in enumerate(history.fields()):
        centres = weight_centers(track, spec.velocities, spec.separation, k)
        ws = WeightSpec(K, centres, lam)
        Js.append([j_functional(u, ws, j) for j in range(1, len(centres) + 1)])
        Eg.append(e_plus_gamma_m(u, centres[0], gamma))
    return MonotonicitySeries(np.array(history.times), np.array(Js), np.array(Eg), K, lam)


# rows --------------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    M: float
    E: float
    F: float
    Hnorm: float
    maxu: float
    minu: float
    xi: tuple = ()
    x0: float | None = None
    ymass_pos: float = 0.0
    ymass_neg: float = 0.0
    J: tuple = ()

    def to_json(self) -> str:
        import json

        d = {
            "t": self.t, "M": self.M, "E": self.E, "F": self.F, "Hnorm": self.Hnorm,
            "maxu": self.maxu, "minu": self.minu, "xi": list(self.xi), "x0": self.x0,
            "ymass_pos": self.ymass_pos, "ymass_neg": self.ymass_neg, "J": list(self.J),
        }
        return json.dumps(d, sort_keys=False, allow_nan=False)


def diagnostics_row(t: float, u: Field, xi=(), x0=None, J=()) -> DiagnosticsRow:
    from .functionals import conserved

    ct = conserved(u)
    pos, neg, _ = y_mass_split(momentum(u))
    return DiagnosticsRow(
        t=float(t), M=ct.M, E=ct.E, F=ct.F, Hnorm=math.sqrt(max(ct.E, 0.0)),
        maxu=float(np.max(u.values)), minu=float(np.min(u.values)),
        xi=tuple(float(x) for x in xi), x0=None if x0 is None else float(x0),
        ymass_pos=pos, ymass_neg=neg, J=tuple(float(j) for j in J),
    )
