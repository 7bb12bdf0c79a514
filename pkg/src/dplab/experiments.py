"""
Scenario drivers shared by the command line and the acceptance suite.

Each driver builds sign-structured initial data, evolves it and records a
per-sample series of the stability diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .diagnostics import (
    Tracker,
    decay_window_report,
    linf_distance_to_peakon,
    momentum,
    v_of,
    value_at,
    y_mass_split,
)
from .functionals import (
    WeightSpec,
    conserved,
    default_K,
    e_plus_gamma_m,
    energy,
    h_distance_to_peakon,
    h_distance_to_train,
    j_functional,
    l2_norm,
)
from .grid import Field, Grid, make_grid
from .helmholtz import invert_helmholtz
from .identities import (
    cubic_bound,
    energy_distance_bounds,
    gg2_identity,
    hh2_identity,
    improvement_identity,
    locate_crest,
    localized_identity_suite,
    quadratic_identity,
)
from .profiles import (
    HypothesisViolation,
    TrainSpec,
    bump,
    check_hypothesis1,
    mollified_peakon,
    mollified_train,
    regularized_momentum,
    shock_peakon,
)
from .solver import NO_FILTER, Filter, evolve, flow_map, initial_state

#: relative sign tolerance for Hypothesis-1 certification
SIGN_TOL = 1e-6

PERTURBATION_SHAPES = ("bump", "left_negative_momentum")


@dataclass(frozen=True)
class Perturbation:
    """
    Momentum-space bump added to the peakon: ``bump`` puts positive
    momentum right of the crest, ``left_negative_momentum`` negative
    momentum left of it. ``amplitude`` is the momentum mass (its sign is
    fixed by the shape).
    """

    shape: str = "bump"
    amplitude: float = 0.01
    center: float = 2.0
    width: float = 0.5

    def __post_init__(self) -> None:
        if self.shape not in PERTURBATION_SHAPES:
            raise ValueError(f"unknown perturbation shape {self.shape!r}")
        if self.width <= 0:
            raise ValueError("perturbation width must be positive")

    def momentum(self, grid: Grid) -> Field:
        sign = 1.0 if self.shape == "bump" else -1.0
        return bump(grid, self.center, self.width, sign * abs(self.amplitude))

    def field(self, grid: Grid) -> Field:
        return invert_helmholtz(self.momentum(grid), 1.0)


def scale_to_distance(base: Field, pert: Field, c: float, r: float, delta: float) -> float:
    """
    The a >= 0 with ||base + a pert - phi_c(. - r)||_H = delta, from the
    quadratic a -> d(a)^2.
    """
    A = h_distance_to_peakon(base, c, r) ** 2
    C = energy(pert)
    B = 0.5 * (h_distance_to_peakon(base + pert, c, r) ** 2 - A - C)
    disc = B * B - C * (A - delta * delta)
    if C == 0 or disc < 0:
        raise ValueError(f"distance {delta} not reachable along this perturbation")
    a = (-B + math.sqrt(disc)) / C
    if a < 0:
        raise ValueError(f"distance {delta} is below the unperturbed distance {math.sqrt(A):.3g}")
    return a


def perturbed_peakon(c: float, grid: Grid, n_moll: int, pert: Perturbation | None,
                     delta: float | None = None, x0: float = 0.0) -> Field:
    base = mollified_peakon(c, x0, grid, n_moll)
    if pert is None:
        return base
    pf = pert.field(grid)
    if delta is not None:
        # distances are measured at the crest, as along the run
        r = locate_crest(base, (x0 - grid.length / 4, x0 + grid.length / 4), "max" if c > 0 else "min")
        pf = pf * scale_to_distance(base, pf, c, r, delta)
    return base + pf


def certify(u: Field, rel_tol: float = SIGN_TOL, width_cells: float = 16.0):
    """Sign certificate of the regularized momentum, or None on violation."""
    y = regularized_momentum(u, width_cells)
    try:
        return check_hypothesis1(y, rel_tol * y.max_abs())
    except HypothesisViolation:
        return None


# single peakon ----------------------------------------------------------------

@dataclass
class PeakonRun:
    c: float
    grid: Grid
    times: np.ndarray
    xi: np.ndarray
    h_distance: np.ndarray
    linf_distance: np.ndarray
    max_abs_u: np.ndarray
    y_l1: np.ndarray
    certified: np.ndarray
    x0: np.ndarray
    window_mass: np.ndarray
    window_bound: np.ndarray
    u_minus_6v: np.ndarray
    M: np.ndarray
    E: np.ndarray
    F: np.ndarray
    u0_l2: float
    u0_linf: float
    u0_h: float
    y0_l1: float
    x0_flow: np.ndarray | None = None
    u_final: Field | None = None

    @property
    def initial_distance(self) -> float:
        return float(self.h_distance[0])

    def drift(self, name: str) -> float:
        s = getattr(self, name)
        return float(np.max(np.abs(s - s[0])) / abs(s[0]))

    def speed(self, t_from: float = 0.0) -> float:
        sel = self.times >= t_from
        return float(np.polyfit(self.times[sel], self.xi[sel], 1)[0])


def run_single_peakon(c: float = 1.0, length: float = 60.0, n: int = 8192, n_moll: int = 32,
                      pert: Perturbation | None = None, delta: float | None = None, T: float = 20.0,
                      out_every: int = 100, flt: Filter = Filter(), x0: float = 0.0,
                      track_flow: bool = False, cfl: float = 0.3, sign_width: float = 32.0) -> PeakonRun:
    grid = make_grid(length, n)
    u0 = perturbed_peakon(c, grid, n_moll, pert, delta, x0)
    return evolve_peakon(u0, c, T, out_every, flt, x0, track_flow, cfl, sign_width)


def evolve_peakon(u0: Field, c: float, T: float, out_every: int = 100, flt: Filter = Filter(),
                  x0: float = 0.0, track_flow: bool = False, cfl: float = 0.3,
                  sign_width: float = 32.0) -> PeakonRun:
    grid = u0.grid
    y0_l1 = y_mass_split(momentum(u0))[2]
    tracker = Tracker([c], [x0], grid.length / 4)
    rows = []

    def observe(s):
        xi = float(tracker(s)[0])
        u = s.u
        ct = conserved(u)
        cert = certify(u, width_cells=sign_width)
        rep = decay_window_report(u, s.t, xi, c, y0_l1)
        rows.append((
            s.t, xi, h_distance_to_peakon(u, c, xi), linf_distance_to_peakon(u, c, xi),
            float(np.max(np.abs(u.values))), y_mass_split(momentum(u))[2],
            cert is not None, math.nan if cert is None else cert.x0,
            rep.mass, rep.bound, rep.u_minus_6v, ct.M, ct.E, ct.F,
        ))

    res = evolve(initial_state(u0, cfl), T, [observe], out_every=out_every, flt=flt,
                 keep_history=track_flow)
    cols = list(zip(*rows))
    arr = [np.array(col, dtype=float) for col in cols]
    run = PeakonRun(
        c=c, grid=grid, times=arr[0], xi=arr[1], h_distance=arr[2], linf_distance=arr[3],
        max_abs_u=arr[4], y_l1=arr[5], certified=arr[6].astype(bool), x0=arr[7],
        window_mass=arr[8], window_bound=arr[9], u_minus_6v=arr[10], M=arr[11], E=arr[12], F=arr[13],
        u0_l2=l2_norm(u0), u0_linf=float(np.max(np.abs(u0.values))), u0_h=math.sqrt(energy(u0)),
        y0_l1=y0_l1, u_final=res.state.u,
    )
    if track_flow and np.isfinite(run.x0[0]):
        run.x0_flow = flow_map(res.history, float(run.x0[0])).positions
    return run


def linf_envelope_constant(run: PeakonRun) -> float:
    """Smallest C with linf_distance <= C h_distance^(2/3) along the run."""
    return float(np.max(run.linf_distance / run.h_distance ** (2.0 / 3.0)))


def a_priori_checks(run, slack: float = 1e-2) -> dict:
    """L-inf bound 2(1+sqrt 2)||u0||_H and the y-mass growth bound, with slack."""
    linf_bound = 2 * (1 + math.sqrt(2)) * run.u0_h * (1 + slack)
    t = run.times
    with np.errstate(over="ignore"):
        y_bound = np.exp(3 * t**2 * run.u0_l2 + 2 * t * run.u0_linf) * run.y0_l1 * (1 + slack)
    return {
        "linf_ok": bool(np.all(run.max_abs_u <= linf_bound)),
        "linf_margin": float(np.max(run.max_abs_u) / linf_bound),
        "ymass_ok": bool(np.all(run.y_l1 <= y_bound)),
        "ymass_margin": float(np.max(run.y_l1 / y_bound)),
    }


# antipeakon-peakon ----------------------------------------------------------------

@dataclass
class TrainRun:
    spec: TrainSpec
    grid: Grid
    times: np.ndarray
    #: (samples, bumps)
    xi: np.ndarray
    h_distance: np.ndarray
    max_abs_u: np.ndarray
    y_l1: np.ndarray
    certified: np.ndarray
    u0_l2: float
    u0_linf: float
    u0_h: float
    y0_l1: float
    J: np.ndarray | None = None
    e_gamma_m: np.ndarray | None = None
    u_final: Field | None = None

    def gap_slope(self, t_from: float = 0.0) -> float:
        sel = self.times >= t_from
        gap = self.xi[sel, -1] - self.xi[sel, 0]
        return float(np.polyfit(self.times[sel], gap, 1)[0])

    @property
    def ordered(self) -> bool:
        return bool(np.all(np.diff(self.xi, axis=1) > 0))


def train_crests(u: Field, spec: TrainSpec) -> list[float]:
    L = spec.separation
    return [
        locate_crest(u, (z - L / 4, z + L / 4), "max" if c > 0 else "min")
        for c, z in zip(spec.velocities, spec.shifts)
    ]


def train_initial(spec: TrainSpec, grid: Grid, n_moll: int, pert: Perturbation | None = None,
                  delta: float | None = None) -> Field:
    base = mollified_train(spec, grid, n_moll)
    if pert is None:
        return base
    pf = pert.field(grid)
    if delta is not None:
        q = train_crests(base, spec)
        A = h_distance_to_train(base, spec.velocities, q) ** 2
        C = energy(pf)
        B = 0.5 * (h_distance_to_train(base + pf, spec.velocities, q) ** 2 - A - C)
        disc = B * B - C * (A - delta * delta)
        if disc < 0 or (-B + math.sqrt(disc)) < 0:
            raise ValueError(
                f"train distance {delta} not reachable: the mollified train already sits at "
                f"{math.sqrt(A):.3g} (raise n_moll)"
            )
        pf = pf * ((-B + math.sqrt(disc)) / C)
    return base + pf


def run_train(spec: TrainSpec, length: float, n: int, n_moll: int = 16, pert: Perturbation | None = None,
              delta: float | None = None, T: float = 10.0, out_every: int = 100, flt: Filter = Filter(),
              weights_K: float | None = None, lam: float = 0.0, certify_sign: bool = True,
              cfl: float = 0.3, sign_width: float = 64.0) -> TrainRun:
    """
    Evolve a mollified train; with ``weights_K`` the J functionals (and
    the E + gamma M functional) are recorded along the way, with centres
    y_1 = x_1(0) + c_1 t/2 - L/4 and y_i the midpoints of tracked crests.
    """
    grid = make_grid(length, n)
    u0 = train_initial(spec, grid, n_moll, pert, delta)
    y0_l1 = y_mass_split(momentum(u0))[2]
    tracker = Tracker(spec.velocities, spec.shifts, spec.separation / 4)
    pos_cols = [k for k, c in enumerate(spec.velocities) if c > 0]
    rows, js, eg = [], [], []
    x1_0 = spec.shifts[pos_cols[0]] if pos_cols else 0.0
    c1 = spec.velocities[pos_cols[0]] if pos_cols else 0.0

    def observe(s):
        xi = tracker(s)
        u = s.u
        cert = certify(u, width_cells=sign_width) if certify_sign else None
        rows.append((s.t, *xi, h_distance_to_train(u, spec.velocities, xi),
                     float(np.max(np.abs(u.values))), y_mass_split(momentum(u))[2], cert is not None))
        if weights_K is not None and pos_cols:
            y1 = x1_0 + c1 * s.t / 2 - spec.separation / 4
            centres = (y1, *[(xi[a] + xi[b]) / 2 for a, b in zip(pos_cols, pos_cols[1:])])
            ws = WeightSpec(weights_K, centres, lam)
            js.append([j_functional(u, ws, j) for j in range(1, len(centres) + 1)])
            eg.append(e_plus_gamma_m(u, y1, c1 / 2**9))

    res = evolve(initial_state(u0, cfl), T, [observe], out_every=out_every, flt=flt)
    nb = spec.size
    arr = np.array(rows, dtype=float)
    return TrainRun(
        spec=spec, grid=grid, times=arr[:, 0], xi=arr[:, 1:1 + nb], h_distance=arr[:, 1 + nb],
        max_abs_u=arr[:, 2 + nb], y_l1=arr[:, 3 + nb], certified=arr[:, 4 + nb].astype(bool),
        u0_l2=l2_norm(u0), u0_linf=float(np.max(np.abs(u0.values))), u0_h=math.sqrt(energy(u0)),
        y0_l1=y0_l1, J=np.array(js) if js else None, e_gamma_m=np.array(eg) if eg else None,
        u_final=res.state.u,
    )


# J monotonicity across L ---------------------------------------------------------

def monotonicity_box(L: float, spacing: float = 1.0 / 32) -> tuple[float, int]:
    """Box length and power-of-two size for an antipeakon-peakon train at separation L."""
    n = 16
    # room for the spread, the motion over a run and decaying tails
    while n * spacing < L + 48:
        n *= 2
    return n * spacing, n


def monotonicity_increment(L: float, T: float = 10.0, lam: float = 0.0, n_moll: int = 16,
                           c: tuple = (-1.0, 1.0)) -> tuple[float, TrainRun]:
    spec = TrainSpec(c, (-L / 2, L / 2), L)
    length, n = monotonicity_box(L)
    K = default_K(L)
    run = run_train(spec, length, n, n_moll=n_moll, T=T, weights_K=K, lam=lam, certify_sign=False)
    inc = float(np.max(run.J[:, 0] - run.J[0, 0]))
    return inc, run


def fit_exponential(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Least-squares (slope, intercept) of log y against x."""
    slope, intercept = np.polyfit(np.asarray(xs, float), np.log(np.asarray(ys, float)), 1)
    return float(slope), float(intercept)


# localized identities across L ---------------------------------------------------

def localized_scaling_field(L: float, velocities=(0.5, 1.0), bump_mass: float = 4.0, bump_width: float = 3.0,
                            n_moll: int = 16, spacing: float = 1.0 / 32):
    """
    Two-peakon train at separation L plus a fixed positive bump sitting on
    the weight transition y_2 = (x_1 + x_2)/2. Returns the field, spec,
    weights and crest positions.
    """
    spec = TrainSpec(velocities, (-L / 2, L / 2), L)
    length, n = monotonicity_box(L, spacing)
    grid = make_grid(length, n)
    u = mollified_train(spec, grid, n_moll) + bump(grid, 0.0, bump_width, bump_mass)
    xi = train_crests(u, spec)
    K = default_K(L)
    weights = WeightSpec(K, (xi[0] - L / 4, 0.5 * (xi[0] + xi[1])))
    return u, spec, weights, xi


def localized_residuals(L: float, **kw) -> dict:
    u, spec, weights, xi = localized_scaling_field(L, **kw)
    reps = localized_identity_suite(u, spec, weights, xi, L)
    out = {}
    for r in reps:
        out[r.name] = r
    return out


# randomized identity suite --------------------------------------------------------

def random_hypothesis_field(rng: np.random.Generator, grid: Grid, c: float = 1.0, n_moll: int = 64,
                            max_bumps: int = 3, max_mass: float = 0.05) -> Field:
    """
    Mollified phi_c plus random momentum bumps: negative ones left of the
    crest, positive ones right of it, so the single sign change survives.
    """
    u = mollified_peakon(c, 0.0, grid, n_moll)
    k = int(rng.integers(1, max_bumps + 1))
    for _ in range(k):
        width = float(rng.uniform(0.3, 1.5))
        gap = float(rng.uniform(0.1, 4.0))
        mass = float(rng.uniform(0.0, max_mass))
        if rng.random() < 0.5:
            y = bump(grid, -(gap + width), width, -mass)
        else:
            y = bump(grid, gap + width, width, mass)
        u = u + invert_helmholtz(y, 1.0)
    return u


def identity_suite(seed: int = 7, count: int = 100, length: float = 60.0, n: int = 8192, c: float = 1.0,
                   n_moll: int = 64) -> list[list]:
    """Per field: quadratic, GG2, HH2, improvement, E/F distance bounds and the cubic bound."""
    rng = np.random.default_rng(seed)
    grid = make_grid(length, n)
    out = []
    for _ in range(count):
        u = random_hypothesis_field(rng, grid, c, n_moll)
        xi = locate_crest(u)
        reports = [
            quadratic_identity(u, c, xi=xi),
            gg2_identity(u, xi, tol=1e-5),
            hh2_identity(u, xi, tol=1e-5),
            improvement_identity(u, c, xi),
            *energy_distance_bounds(u, c, xi),
        ]
        out.append(reports)
    return out


# shock peakon ---------------------------------------------------------------------

@dataclass
class ShockRun:
    k: float
    grid: Grid
    times: np.ndarray
    amplitude: np.ndarray
    max_abs_u: np.ndarray
    u_final: Field | None = None

    @property
    def exact(self) -> np.ndarray:
        return 1.0 / (self.times + self.k)

    @property
    def rel_error(self) -> np.ndarray:
        return np.abs(self.amplitude - self.exact) / self.exact


def shock_amplitude(u: Field, band: tuple[float, float] = (1.0, 4.0)) -> float:
    """
    Least-squares A in u ~ -A sgn(x) e^{-|x|} over band <= |x| <= band[1].
    The jump itself rings under any spectral projection, so it is excluded.
    """
    x = u.grid.nodes
    sel = (np.abs(x) >= band[0]) & (np.abs(x) <= band[1])
    prof = -np.sign(x[sel]) * np.exp(-np.abs(x[sel]))
    return float(np.dot(u.values[sel], prof) / np.dot(prof, prof))


def run_shock(k: float = 1.0, length: float = 40.0, n: int = 4096, T: float = 2.0,
              out_every: int = 100, flt: Filter = Filter(), cfl: float = 0.3) -> ShockRun:
    grid = make_grid(length, n)
    rows = []

    def observe(s):
        rows.append((s.t, shock_amplitude(s.u), float(np.max(np.abs(s.u.values)))))

    res = evolve(initial_state(shock_peakon(k, 0.0, grid), cfl), T, [observe], out_every=out_every, flt=flt)
    arr = np.array(rows, dtype=float)
    return ShockRun(k=k, grid=grid, times=arr[:, 0], amplitude=arr[:, 1], max_abs_u=arr[:, 2],
                    u_final=res.state.u)
