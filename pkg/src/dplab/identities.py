"""
The g/h profile identity chain around a peaked profile: the quadratic
identity, the integral identities for g^2 and h g^2, the cubic bound, and
their train and localized versions.

Every check evaluates both sides independently and returns an
:class:`IdentityReport`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .diagnostics import argmax_refined, polish_extremum, v_of, value_at
from .functionals import (
    WeightSpec,
    energy,
    h_distance_to_peakon,
    h_distance_to_train,
    peakon_cubic,
    peakon_energy,
    v_and_derivatives,
)
from .grid import Field, upsample
from .profiles import TrainSpec

#: refinement factors for quadratic and cubic integrands
PAD2 = 2
PAD3 = 4


@dataclass(frozen=True)
class IdentityReport:
    """
    One identity (lhs == rhs) or inequality (lhs <= rhs) check.

    ``rel_residual`` is the residual divided by ``scale``, the magnitude
    of the largest term entering the identity, falling back to the
    absolute residual when that magnitude vanishes.
    """

    name: str
    lhs: float
    rhs: float
    residual: float
    rel_residual: float
    tolerance: float
    passed: bool
    kind: str = "identity"
    scale: float = 1.0

    def row(self) -> dict:
        return {
            "name": self.name,
            "lhs": repr(self.lhs),
            "rhs": repr(self.rhs),
            "residual": repr(self.residual),
            "rel_residual": repr(self.rel_residual),
            "tolerance": repr(self.tolerance),
            "pass": self.passed,
        }


def report(name: str, lhs: float, rhs: float, tolerance: float, scale: float | None = None,
           kind: str = "identity") -> IdentityReport:
    lhs, rhs = float(lhs), float(rhs)
    if kind == "identity":
        residual = abs(lhs - rhs)
    elif kind == "inequality":
        residual = max(lhs - rhs, 0.0)
    else:
        raise ValueError(f"unknown report kind {kind!r}")
    if scale is None:
        scale = max(abs(lhs), abs(rhs))
    rel = residual / scale if scale > 0 else residual
    return IdentityReport(name, lhs, rhs, residual, rel, tolerance, bool(rel <= tolerance), kind,
                          float(scale))


CSV_FIELDS = ["name", "lhs", "rhs", "residual", "rel_residual", "tolerance", "pass"]


def write_csv(reports: Iterable[IdentityReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerow(r.row())


# profiles -------------------------------------------------------------------

def _branches(u: Field, m: int):
    v, vx, vxx = v_and_derivatives(u.values, u.grid.length, m)
    g_left = 2 * v + vxx - 3 * vx
    g_right = 2 * v + vxx + 3 * vx
    h_left = -vxx - 6 * vx + 16 * v
    h_right = -vxx + 6 * vx + 16 * v
    return v, (g_left, g_right), (h_left, h_right)


def _split_mask(x: np.ndarray, xi: float, boundary: str) -> np.ndarray:
    left = x <= xi
    j = int(np.argmin(np.abs(x - xi)))
    left[j] = boundary == "left"
    if boundary == "right":
        left[j] = False
    return left


def _assemble(grid, m, xi, pair, boundary):
    x = grid.x_min + np.arange(m) * (grid.length / m)
    left = _split_mask(x, xi, boundary)
    return np.where(left, pair[0], pair[1]), x


def g_profile(u: Field, xi: float, boundary: str = "left") -> Field:
    """g = 2v + v_xx - 3v_x left of xi and 2v + v_xx + 3v_x right of it."""
    _, g_pair, _ = _branches(u, u.grid.n)
    vals, _ = _assemble(u.grid, u.grid.n, xi, g_pair, boundary)
    return Field(u.grid, vals)


def h_profile(u: Field, xi: float, boundary: str = "left") -> Field:
    """h = -v_xx - 6v_x + 16v left of xi and -v_xx + 6v_x + 16v right of it."""
    _, _, h_pair = _branches(u, u.grid.n)
    vals, _ = _assemble(u.grid, u.grid.n, xi, h_pair, boundary)
    return Field(u.grid, vals)


def split_integral(left: np.ndarray, right: np.ndarray, xi: float, x_min: float, length: float) -> float:
    """
    int_{x_min}^{xi} left + int_{xi}^{x_min+length} right for periodic
    band-limited samples, via the exact spectral antiderivative.
    """
    return _antiderivative(left, xi, x_min, length) + (
        length * float(np.mean(right)) - _antiderivative(right, xi, x_min, length)
    )


def _antiderivative(vals: np.ndarray, x: float, x_min: float, length: float) -> float:
    m = vals.shape[-1]
    fh = np.fft.rfft(vals) / m
    k = 2.0 * np.pi * np.fft.rfftfreq(m, d=length / m)
    s = (x - x_min) % length
    mean = fh[0].real
    kk = k[1:-1]
    c = fh[1:-1]
    # int_0^s 2 Re(c e^{ikt}) dt
    inner = 2.0 * np.sum((c * (np.exp(1j * kk * s) - 1.0) / (1j * kk)).real)
    nyq = fh[-1].real * np.sin(k[-1] * s) / k[-1]
    return float(mean * s + inner + nyq)


def piecewise_integral(left: np.ndarray, right: np.ndarray, xi: float, grid, method: str = "split",
                       boundary: str = "left") -> float:
    m = left.shape[-1]
    if method == "split":
        return split_integral(left, right, xi, grid.x_min, grid.length)
    if method == "nodal":
        vals, _ = _assemble(grid, m, xi, (left, right), boundary)
        return float(np.sum(vals) * grid.length / m)
    raise ValueError(f"unknown integration method {method!r}")


# identities -------------------------------------------------------------------

def locate_crest(u: Field, window=None, kind: str = "max", polish: bool = True) -> float:
    v = v_of(u)
    xi = argmax_refined(v, window, kind)
    return polish_extremum(v, xi) if polish else xi


def quadratic_identity(u: Field, c: float, tol: float = 1e-6, xi: float | None = None) -> IdentityReport:
    """E(u) - E(phi_c) against ||u - phi_c(. - xi)||_H^2 + 4c(v(xi) - c/6)."""
    if xi is None:
        xi = locate_crest(u)
    E = energy(u)
    lhs = E - peakon_energy(c)
    d = h_distance_to_peakon(u, c, xi)
    M = float(value_at(v_of(u), xi)[0])
    rhs = d * d + 4 * c * (M - c / 6)
    scale = max(E, peakon_energy(c))
    return report("quadratic_identity", lhs, rhs, tol, scale)


def gg2_identity(u: Field, xi: float | None = None, tol: float = 1e-6, method: str = "split",
                 boundary: str = "left") -> IdentityReport:
    """int g^2 against E(u) - 12 M^2 with M = v(xi)."""
    if xi is None:
        xi = locate_crest(u)
    m = PAD2 * u.grid.n
    v, (gl, gr), _ = _branches(u, m)
    lhs = piecewise_integral(gl * gl, gr * gr, xi, u.grid, method, boundary)
    E = energy(u)
    M = float(value_at(v_of(u), xi)[0])
    return report("gg2_identity", lhs, E - 12 * M * M, tol, scale=E)


def improvement_identity(u: Field, c: float, xi: float | None = None, tol: float = 1e-6,
                         method: str = "split") -> IdentityReport:
    """int g^2 against ||u - phi_c(. - xi)||_H^2 - 12(c/6 - M)^2."""
    if xi is None:
        xi = locate_crest(u)
    m = PAD2 * u.grid.n
    _, (gl, gr), _ = _branches(u, m)
    lhs = piecewise_integral(gl * gl, gr * gr, xi, u.grid, method)
    d = h_distance_to_peakon(u, c, xi)
    M = float(value_at(v_of(u), xi)[0])
    return report("improvement_identity", lhs, d * d - 12 * (c / 6 - M) ** 2, tol,
                  scale=max(energy(u), d * d))


def hh2_identity(u: Field, xi: float | None = None, tol: float = 1e-6, method: str = "split",
                 boundary: str = "left") -> IdentityReport:
    """int h g^2 against F(u) - 144 M^3."""
    if xi is None:
        xi = locate_crest(u)
    m = PAD3 * u.grid.n
    _, (gl, gr), (hl, hr) = _branches(u, m)
    lhs = piecewise_integral(hl * gl * gl, hr * gr * gr, xi, u.grid, method, boundary)
    uu = upsample(u.values, m)
    F = float(np.sum(uu**3) * u.grid.length / m)
    M = float(value_at(v_of(u), xi)[0])
    scale = max(abs(F), 144 * abs(M) ** 3)
    return report("hh2_identity", lhs, F - 144 * M**3, tol, scale=scale)


def energy_distance_bounds(u: Field, c: float, r: float = 0.0) -> list[IdentityReport]:
    """|E(u) - E(phi_c)| <= 2 gamma (2+c) and |F(u) - F(phi_c)| <= 6 gamma (2+c)^2."""
    gamma = h_distance_to_peakon(u, c, r)
    m = PAD3 * u.grid.n
    uu = upsample(u.values, m)
    F = float(np.sum(uu**3) * u.grid.length / m)
    E = energy(u)
    return [
        report("E_distance_bound", abs(E - peakon_energy(c)), 2 * gamma * (2 + c), 0.0, kind="inequality"),
        report("F_distance_bound", abs(F - peakon_cubic(c)), 6 * gamma * (2 + c) ** 2, 0.0, kind="inequality"),
    ]


def cubic_polynomial(M: float, E: float, F: float) -> float:
    return M**3 - 0.25 * E * M + F / 72.0


def cubic_factorized(M: float, c: float) -> float:
    """(c/6 - M)^2 (M + c/3): the cubic with peakon values of E and F."""
    return (c / 6 - M) ** 2 * (M + c / 3)


@dataclass(frozen=True)
class CubicBoundResult:
    report: IdentityReport
    polynomial: float
    factorized: float
    bound: float
    hypotheses_ok: bool
    h_distance: float
    linf_distance: float
    max_u_minus_6v: float


def cubic_bound(u: Field, c: float, alpha2: float) -> CubicBoundResult:
    """
    P(M) = M^3 - E M/4 + F/72 against (2+c)^2 alpha2^2 / 8 with M = max v.

    ``alpha2`` plays the role of eps^2 in the hypotheses: the H and L-inf
    distances and u - 6v <= alpha2 on [xi - 6.7, xi + 6.7] are checked and
    reported, but evaluation proceeds either way.
    """
    xi = locate_crest(u)
    v = v_of(u)
    M = float(value_at(v, xi)[0])
    E = energy(u)
    m = PAD3 * u.grid.n
    F = float(np.sum(upsample(u.values, m) ** 3) * u.grid.length / m)
    P = cubic_polynomial(M, E, F)
    bound = (2 + c) ** 2 / 8.0 * alpha2**2
    eps = math.sqrt(alpha2)
    d = h_distance_to_peakon(u, c, xi)
    from .diagnostics import linf_distance_to_peakon

    dinf = linf_distance_to_peakon(u, c, xi)
    x = u.grid.nodes
    theta = np.abs(u.grid.wrap(x - xi)) <= 6.7
    gap = float(np.max((u.values - 6 * v.values)[theta]))
    ok = d <= 3 * (2 + eps) * eps and dinf <= 1e-5 * c and gap <= alpha2
    rep = report("cubic_bound", P, bound, 0.0, scale=max(abs(M) ** 3, 1e-300), kind="inequality")
    return CubicBoundResult(rep, P, cubic_factorized(M, c), bound, ok, d, dinf, gap)


def h_upper_bound(u: Field, xi: float | None = None) -> float:
    """max(h) - 18 M: nonpositive up to the u - 6v excess near the crest."""
    if xi is None:
        xi = locate_crest(u)
    hp = h_profile(u, xi)
    M = float(value_at(v_of(u), xi)[0])
    return float(np.max(hp.values) - 18 * M)


# trains ---------------------------------------------------------------------

def cross_term(spec: TrainSpec, xi: Sequence[float]) -> float:
    """2 sum_i c_i sum_{j != i} rho_{c_j}(xi_i - xi_j)."""
    total = 0.0
    for i, (ci, xi_i) in enumerate(zip(spec.velocities, xi)):
        for j, (cj, xi_j) in enumerate(zip(spec.velocities, xi)):
            if i == j:
                continue
            a = abs(xi_i - xi_j)
            total += 2 * ci * (cj / 3 * math.exp(-a) - cj / 6 * math.exp(-2 * a))
    return total


def train_quadratic_identity(u: Field, spec: TrainSpec, xi: Sequence[float], tol: float = 1e-6):
    """
    E(u) - sum E(phi_ci) against ||u - sum phi_ci(. - xi_i)||_H^2
    + 4 sum c_i (v(xi_i) - c_i/6).

    The two sides differ by the exponentially small cross term; the report
    compares them up to that term, and the envelope check uses
    C = (2/3) ||c||_1^2 in front of e^{-L/2}.
    """
    xi = list(xi)
    if len(xi) != spec.size:
        raise ValueError("need one modulation point per bump")
    gaps = np.diff(xi)
    if np.any(gaps < spec.separation / 2):
        raise ValueError(f"modulation points closer than L/2: gaps {gaps.tolist()}")
    E = energy(u)
    lhs = E - sum(peakon_energy(c) for c in spec.velocities)
    d = h_distance_to_train(u, spec.velocities, xi)
    vv = value_at(v_of(u), xi)
    rhs = d * d + 4 * sum(c * (float(vi) - c / 6) for c, vi in zip(spec.velocities, vv))
    cross = cross_term(spec, xi)
    C = 2.0 / 3.0 * spec.l1**2
    envelope = C * math.exp(-spec.separation / 2)
    scale = max(E, sum(peakon_energy(c) for c in spec.velocities))
    exact = report("train_quadratic_identity", lhs, rhs - cross, tol, scale)
    bound = report("train_quadratic_envelope", abs(lhs - rhs), envelope, 0.0, kind="inequality")
    cross_bound = report("train_cross_term", abs(cross), spec.l1 * math.exp(-2 * min(gaps) / 3), 0.0,
                         kind="inequality") if len(gaps) else None
    return [r for r in (exact, bound, cross_bound) if r is not None]


def localized_identity_suite(u: Field, spec: TrainSpec, weights: WeightSpec, xi: Sequence[float],
                             L: float | None = None) -> list[IdentityReport]:
    """
    Windowed identities for each right-moving bump i = 1..N_+:
    int g_i^2 Phi_i ~ E_i - 12 M_i^2 and int h_i g_i^2 Phi_i ~ F_i - 144 M_i^3 Phi_i(xi_i),
    plus the margin of F_i <= 18 M_i E_i - 72 M_i^3.

    Residuals are reported against ||u||_H^2 L^{-1/2} (resp. ||u||_H^3 L^{-1/2});
    ``rel_residual`` is that ratio, i.e. the fitted envelope constant.
    """
    L = spec.separation if L is None else L
    xi_pos = [x for c, x in zip(spec.velocities, xi) if c > 0]
    if len(weights.centers) != len(xi_pos):
        raise ValueError("one weight center per right-moving bump is required")
    for i, x in enumerate(xi_pos):
        if x <= weights.centers[i] or (i + 1 < len(weights.centers) and x >= weights.centers[i + 1]):
            raise ValueError(f"modulation point {x} outside its window")
    g = u.grid
    m = PAD3 * g.n
    x = g.x_min + np.arange(m) * (g.length / m)
    dxm = g.length / m
    v, vx, vxx = v_and_derivatives(u.values, g.length, m)
    dens = 4 * v * v + 5 * vx * vx + vxx * vxx
    uu = upsample(u.values, m)
    vfield = v_of(u)
    H2 = energy(u)
    out = []
    for i, xc in enumerate(xi_pos, start=1):
        w = weights.window(x, i)
        gl, gr = 2 * v + vxx - 3 * vx, 2 * v + vxx + 3 * vx
        hl, hr = -vxx - 6 * vx + 16 * v, -vxx + 6 * vx + 16 * v
        Ei = float(dxm * np.sum(dens * w))
        Fi = float(dxm * np.sum(uu**3 * w))
        Mi = float(value_at(vfield, xc)[0])
        wi = float(weights.window(np.array([xc]), i)[0])
        lg = split_integral(gl * gl * w, gr * gr * w, xc, g.x_min, g.length)
        lh = split_integral(hl * gl * gl * w, hr * gr * gr * w, xc, g.x_min, g.length)
        env2 = H2 / math.sqrt(L)
        env3 = H2**1.5 / math.sqrt(L)
        out.append(report(f"GG22[{i}]", lg, Ei - 12 * Mi * Mi, math.inf, scale=env2))
        out.append(report(f"HH22[{i}]", lh, Fi - 144 * Mi**3 * wi, math.inf, scale=env3))
        out.append(report(f"cubic_margin[{i}]", Fi, 18 * Mi * Ei - 72 * Mi**3, math.inf, scale=env3,
                          kind="inequality"))
    return out
