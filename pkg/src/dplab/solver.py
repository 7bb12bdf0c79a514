"""
Pseudospectral time stepping of the nonlocal DP equation

    u_t + (u^2/2)_x + (3/2) d_x (1 - d^2)^-1 u^2 = 0

with classical RK4, 3/2-rule dealiasing, and an optional exponential
filter. Also: the smooth-variable check, characteristics, and the weighted
virial identities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .grid import Field, Grid, interpolate, spectral_derivative, upsample
from .helmholtz import DerivedFields, dealiased_square, derived_fields

DEFAULT_CFL = 0.3
BLOWUP_THRESHOLD = 1e6


class BlowUp(RuntimeError):
    """Raised when the solution leaves the finite range."""

    def __init__(self, message: str, step: int, t: float):
        super().__init__(message)
        self.step = step
        self.t = t


@dataclass(frozen=True)
class Filter:
    """exp(-strength (k/k_N)^order); ``strength=0`` disables it."""

    order: int = 36
    strength: float = 36.0

    def factors(self, grid: Grid) -> np.ndarray:
        k = grid.wavenumbers
        return np.exp(-self.strength * (k / k[-1]) ** self.order)


NO_FILTER = Filter(strength=0.0)


@dataclass(frozen=True)
class SimState:
    t: float
    u: Field
    dt: float
    step_count: int = 0
    cfl: float = DEFAULT_CFL

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @property
    def derived(self) -> DerivedFields:
        return derived_fields(self.u)


def stable_dt(u: Field, cfl: float = DEFAULT_CFL) -> float:
    return cfl * u.grid.spacing / max(1.0, float(np.max(np.abs(u.values))))


def initial_state(u: Field, cfl: float = DEFAULT_CFL, dt: float | None = None, t: float = 0.0) -> SimState:
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    limit = stable_dt(u, cfl)
    if dt is None:
        dt = limit
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    return SimState(t=t, u=u, dt=min(dt, limit) if dt > 0 else 0.0, cfl=cfl)


class _Operator:
    """Cached multipliers for one grid."""

    _cache: dict = {}

    def __init__(self, grid: Grid):
        k = grid.wavenumbers
        ik = 1j * k
        ik[-1] = 0.0
        self.n = grid.n
        self.mult = -ik * (0.5 + 1.5 / (1.0 + k * k))

    @classmethod
    def get(cls, grid: Grid) -> "_Operator":
        key = (grid.length, grid.n)
        op = cls._cache.get(key)
        if op is None:
            op = cls._cache[key] = cls(grid)
        return op


def rhs_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    op = _Operator.get(grid)
    sq = np.fft.rfft(dealiased_square(values))
    return np.fft.irfft(op.mult * sq, n=op.n)


def rhs(u: Field) -> Field:
    """-(u^2/2)_x - (3/2) d_x (1 - d^2)^-1 u^2 with a dealiased square."""
    return Field(u.grid, rhs_values(u.values, u.grid))


def _rk4(values: np.ndarray, grid: Grid, dt: float) -> np.ndarray:
    k1 = rhs_values(values, grid)
    k2 = rhs_values(values + 0.5 * dt * k1, grid)
    k3 = rhs_values(values + 0.5 * dt * k2, grid)
    k4 = rhs_values(values + dt * k3, grid)
    return values + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def step(state: SimState, dt: float | None = None, flt: Filter = Filter()) -> SimState:
    """One RK4 step (of ``state.dt`` unless overridden) followed by the filter."""
    dt = state.dt if dt is None else dt
    if dt == 0:
        return state
    g = state.grid
    new = _rk4(state.u.values, g, dt)
    if flt.strength:
        new = np.fft.irfft(np.fft.rfft(new) * flt.factors(g), n=g.n)
    t = state.t + dt
    count = state.step_count + 1
    if not np.all(np.isfinite(new)):
        raise BlowUp(f"non-finite values at step {count}", count, t)
    peak = float(np.max(np.abs(new)))
    if peak > BLOWUP_THRESHOLD:
        raise BlowUp(f"max|u| = {peak:.3g} at step {count}", count, t)
    return SimState(t=t, u=Field(g, new), dt=state.dt, step_count=count, cfl=state.cfl)


@dataclass
class History:
    """Stored snapshots u(t_k) on a common grid."""

    grid: Grid
    times: list = field(default_factory=list)
    values: list = field(default_factory=list)

    def append(self, state: SimState) -> None:
        if self.times and state.t <= self.times[-1]:
            return
        self.times.append(state.t)
        self.values.append(state.u.values)

    def __len__(self) -> int:
        return len(self.times)

    def field(self, i: int) -> Field:
        return Field(self.grid, self.values[i])

    def fields(self):
        for t, vals in zip(self.times, self.values):
            yield t, Field(self.grid, vals)


Observer = Callable[[SimState], object]


@dataclass
class EvolveResult:
    state: SimState
    samples: list
    history: History | None


def evolve(
    state: SimState,
    T: float,
    observers: Sequence[Observer] = (),
    out_every: int = 1,
    flt: Filter = Filter(),
    keep_history: bool = False,
    adapt: bool = True,
) -> EvolveResult:
    """
    Step from ``state.t`` to ``T``. Observers are called on the initial
    state, every ``out_every`` steps and on the final state; their return
    values are collected (one tuple per sample) in ``samples``.

    With ``adapt`` the step is re-limited by the CFL rule as max|u| changes.
    """
    if T < state.t:
        raise ValueError("final time precedes the current time")
    if out_every < 1:
        raise ValueError("out_every must be >= 1")
    history = History(state.grid) if keep_history else None
    samples = []

    def sample(s):
        samples.append(tuple(obs(s) for obs in observers))
        if history is not None:
            history.append(s)

    sample(state)
    if T == state.t or state.dt == 0:
        return EvolveResult(state, samples, history)
    base = state.dt
    n_since = 0
    eps = 1e-12 * max(1.0, T)
    while state.t < T - eps:
        dt = min(base, stable_dt(state.u, state.cfl)) if adapt else base
        dt = min(dt, T - state.t)
        state = step(state, dt, flt)
        n_since += 1
        if n_since == out_every or state.t >= T - eps:
            sample(state)
            n_since = 0
    return EvolveResult(state, samples, history)


# smooth variable ------------------------------------------------------------

@dataclass(frozen=True)
class SmoothVariableCheck:
    """Time-differenced v_t against -h_x/2 and against -h_x."""

    residual_half: float
    residual_full: float
    scale: float
    ratio: float
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict == "half"


def smooth_variable_rhs_check(state: SimState, dt: float | None = None) -> SmoothVariableCheck:
    """
    Centered difference (v(t+dt) - v(t-dt)) / 2dt, obtained by unfiltered
    RK4 steps of +-dt, compared with both candidate right-hand sides.
    ``ratio`` is the least-squares factor a in v_t = -a h_x.
    """
    dt = state.dt if dt is None else dt
    g = state.grid
    u = state.u.values
    plus = _rk4(u, g, dt)
    minus = _rk4(u, g, -dt)
    k = g.wavenumbers
    to_v = lambda w: np.fft.irfft(np.fft.rfft(w) / (4 + k * k), n=g.n)
    vt = (to_v(plus) - to_v(minus)) / (2 * dt)
    hx = spectral_derivative(state.derived.h.values, g.length, 1)
    scale = float(np.max(np.abs(hx)))
    if scale == 0:
        return SmoothVariableCheck(float(np.max(np.abs(vt))), float(np.max(np.abs(vt))), 0.0, 0.0, "half")
    r_half = float(np.max(np.abs(vt + 0.5 * hx)))
    r_full = float(np.max(np.abs(vt + hx)))
    ratio = float(-np.dot(vt, hx) / np.dot(hx, hx))
    verdict = "half" if r_half < r_full else "full"
    return SmoothVariableCheck(r_half, r_full, scale, ratio, verdict)


# characteristics --------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    label: str
    times: np.ndarray
    positions: np.ndarray
    #: number of times the path crossed the right box edge (negative: left)
    winding: np.ndarray | None = None

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.positions, dtype=float)
        if t.shape != p.shape:
            raise ValueError("times and positions differ in length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(p)):
            raise ValueError("positions must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", p)

    def wrapped(self, grid: Grid) -> np.ndarray:
        return grid.wrap(self.positions)

    def slope(self, t_from: float = 0.0) -> float:
        sel = self.times >= t_from
        return float(np.polyfit(self.times[sel], self.positions[sel], 1)[0])


def flow_map(history: History, x_init: float | Sequence[float], label: str | None = None):
    """
    Integrate q' = u(t, q) through the stored snapshots with RK4; u is
    trigonometrically interpolated in space and linearly in time.

    Positions are unwrapped; ``winding`` counts box crossings.
    """
    if len(history) < 2:
        raise ValueError("need at least two snapshots")
    g = history.grid
    scalar = np.ndim(x_init) == 0
    q = np.atleast_1d(np.asarray(x_init, dtype=float)).copy()
    times = np.asarray(history.times)
    out = [q.copy()]

    def vel(i, theta, x):
        a = interpolate(history.values[i], g.length, x)
        if theta == 0:
            return a
        b = interpolate(history.values[i + 1], g.length, x)
        return (1 - theta) * a + theta * b

    for i in range(len(times) - 1):
        h = times[i + 1] - times[i]
        k1 = vel(i, 0.0, q)
        k2 = vel(i, 0.5, q + 0.5 * h * k1)
        k3 = vel(i, 0.5, q + 0.5 * h * k2)
        k4 = interpolate(history.values[i + 1], g.length, q + h * k3)
        q = q + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(q.copy())
    pos = np.array(out)
    winding = np.floor((pos - g.x_min) / g.length).astype(int)
    if scalar:
        return Trajectory(label or f"flow({float(x_init):g})", times, pos[:, 0], winding[:, 0])
    return [
        Trajectory(label or f"flow({x:g})", times, pos[:, j], winding[:, j])
        for j, x in enumerate(np.atleast_1d(x_init))
    ]


# virial identities ------------------------------------------------------------

#: coefficients of the weighted energy rate:
#: (2/3) u^3 g' - 4 u^2 v g' + a vh g' + v_x h_x g'
ENERGY_VH_COEFF = 4.0
#: coefficient of (u^2 - u_x^2) g' in the momentum rate
MOMENTUM_COEFF = 1.0


@dataclass(frozen=True)
class Weight:
    """
    A fixed smooth weight g with derivatives as callables.

    When ``g_second`` is given, the momentum functional is evaluated as
    int u (g - g''), which equals int y g on the line but does not feel the
    jump of a non-periodic weight (e.g. a step) across the box seam.
    """

    g: Callable
    g_prime: Callable
    g_second: Callable | None = None
    name: str = "g"


def constant_weight() -> Weight:
    zero = lambda x: np.zeros_like(x)
    return Weight(lambda x: np.ones_like(x), zero, zero, "1")


def shifted_psi_weight(center: float, K: float = 1.0) -> Weight:
    """g = Psi_K(. - center)."""
    from .functionals import psi_k, psi_k_prime, psi_k_second

    return Weight(
        lambda x: psi_k(x - center, K),
        lambda x: psi_k_prime(x - center, K),
        lambda x: psi_k_second(x - center, K),
        f"Psi_K(.-{center:g})",
    )


def _fine(u: Field, m: int):
    g = u.grid
    x = g.x_min + np.arange(m) * (g.length / m)
    k = g.wavenumbers
    uh = np.fft.rfft(u.values)
    hh = np.fft.rfft(dealiased_square(u.values)) / (1 + k * k)

    def up(spec):
        return upsample(np.fft.irfft(spec, n=g.n), m)

    ik = 1j * k
    ik[-1] = 0.0
    fields = {
        "u": up(uh),
        "u_x": up(ik * uh),
        "y": up(uh * (1 + k * k)),
        "v": up(uh / (4 + k * k)),
        "v_x": up(ik * uh / (4 + k * k)),
        "v_xx": up(-k * k * uh / (4 + k * k)),
        "h": up(hh),
        "h_x": up(ik * hh),
    }
    return x, fields


def virial_functionals(u: Field, weight: Weight, pad: int = 4) -> dict:
    """The three weighted functionals: energy, cubic, momentum."""
    m = pad * u.grid.n
    x, f = _fine(u, m)
    dxm = u.grid.length / m
    gw = weight.g(x)
    return {
        "energy": float(dxm * np.sum((4 * f["v"] ** 2 + 5 * f["v_x"] ** 2 + f["v_xx"] ** 2) * gw)),
        "cubic": float(dxm * np.sum(f["u"] ** 3 * gw)),
        "momentum": float(dxm * np.sum(
            f["u"] * (gw - weight.g_second(x)) if weight.g_second is not None else f["y"] * gw
        )),
    }


def virial_rates(u: Field, weight: Weight, pad: int = 4, energy_vh: float = ENERGY_VH_COEFF,
                 momentum: float = MOMENTUM_COEFF) -> dict:
    """Right-hand sides of the three virial identities."""
    m = pad * u.grid.n
    x, f = _fine(u, m)
    dxm = u.grid.length / m
    gp = weight.g_prime(x)
    uu, v, vx, h, hx = f["u"], f["v"], f["v_x"], f["h"], f["h_x"]
    e = (2.0 / 3.0) * uu**3 - 4 * uu**2 * v + energy_vh * v * h + vx * hx
    c = 0.75 * uu**4 + 2.25 * (h * h - hx * hx)
    p = f["y"] * uu + momentum * (uu**2 - f["u_x"] ** 2)
    return {
        "energy": float(dxm * np.sum(e * gp)),
        "cubic": float(dxm * np.sum(c * gp)),
        "momentum": float(dxm * np.sum(p * gp)),
    }


@dataclass(frozen=True)
class VirialResult:
    name: str
    dts: tuple
    residuals: tuple
    order: float
    rate: float

    @property
    def rel_residuals(self) -> tuple:
        scale = max(abs(self.rate), 1e-300)
        return tuple(r / scale for r in self.residuals)


def fit_order(dts: Sequence[float], residuals: Sequence[float]) -> float:
    dts = np.asarray(dts, dtype=float)
    res = np.asarray(residuals, dtype=float)
    if np.any(res <= 0):
        return math.nan
    return float(np.polyfit(np.log(dts), np.log(res), 1)[0])


def virial_residuals(state: SimState, weight: Weight, dts: Sequence[float] | None = None,
                     pad: int = 4, **coeffs) -> list[VirialResult]:
    """
    Centered differences of the weighted functionals over +-dt (unfiltered
    RK4) against the right-hand sides at the midpoint, for each dt in
    ``dts`` (default: state.dt halved twice), with the fitted order.
    """
    if dts is None:
        dts = (state.dt, state.dt / 2, state.dt / 4)
    if len(dts) < 2:
        raise ValueError("need at least two step sizes for an order fit")
    g = state.grid
    rates = virial_rates(state.u, weight, pad, **coeffs)
    res = {k: [] for k in rates}
    for dt in dts:
        fp = virial_functionals(Field(g, _rk4(state.u.values, g, dt)), weight, pad)
        fm = virial_functionals(Field(g, _rk4(state.u.values, g, -dt)), weight, pad)
        for k in rates:
            res[k].append(abs((fp[k] - fm[k]) / (2 * dt) - rates[k]))
    return [VirialResult(k, tuple(dts), tuple(res[k]), fit_order(dts, res[k]), rates[k]) for k in rates]


def history_virial_residuals(history: History, weight: Weight, pad: int = 4, **coeffs) -> list[dict]:
    """Centered differences along a stored history (uniform or not)."""
    if len(history) < 3:
        raise ValueError("need at least three snapshots")
    out = []
    t = history.times
    for i in range(1, len(history) - 1):
        fp = virial_functionals(history.field(i + 1), weight, pad)
        fm = virial_functionals(history.field(i - 1), weight, pad)
        rates = virial_rates(history.field(i), weight, pad, **coeffs)
        dt = t[i + 1] - t[i - 1]
        out.append({k: (fp[k] - fm[k]) / dt - rates[k] for k in rates} | {"t": t[i]})
    return out
