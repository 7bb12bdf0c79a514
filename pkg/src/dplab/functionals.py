"""
Conserved functionals M, E, F, the energy norm, the weights Psi and Phi,
and their localized versions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import Field, Grid, upsample

#: upsampling factor used when integrating cubic and quartic products
PRODUCT_PAD = 2


@dataclass(frozen=True)
class ConservedTriple:
    M: float
    E: float
    F: float
    #: |int y v - int (4v^2 + 5v_x^2 + v_xx^2)|
    E_residual: float = 0.0
    #: |int u^3 - int (-v_xx^3 + 12 v v_xx^2 - 48 v^2 v_xx + 64 v^3)|
    F_residual: float = 0.0


def v_and_derivatives(values: np.ndarray, length: float, m: int | None = None):
    """
    v = (4 - d^2)^-1 u with v_x and v_xx, optionally on a refined grid.
    """
    n = values.shape[-1]
    m = n if m is None else m
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    vh = np.fft.rfft(values) / (4.0 + k * k)
    vh[-1] = vh[-1].real

    def out(mult):
        spec = vh * mult
        if m == n:
            return np.fft.irfft(spec, n=n)
        pad = np.zeros(m // 2 + 1, dtype=complex)
        pad[: n // 2] = spec[: n // 2]
        pad[n // 2] = 0.5 * spec[n // 2].real
        return np.fft.irfft(pad, n=m) * (m / n)

    ik = 1j * k
    ik_odd = ik.copy()
    ik_odd[-1] = 0.0
    return out(1.0), out(ik_odd), out(ik * ik)


def energy_density(u: Field, m: int | None = None) -> np.ndarray:
    """4v^2 + 5v_x^2 + v_xx^2 (on ``m`` points if given)."""
    v, vx, vxx = v_and_derivatives(u.values, u.grid.length, m)
    return 4 * v * v + 5 * vx * vx + vxx * vxx


def energy(u: Field) -> float:
    """E(u) through Parseval: sum |u_k|^2 (1 + k^2)/(4 + k^2)."""
    return _energy_values(u.values, u.grid.length)


def _energy_values(values: np.ndarray, length: float) -> float:
    n = values.shape[-1]
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    uh = np.fft.rfft(values)
    w = np.full(k.shape, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return float(length / n**2 * np.sum(w * np.abs(uh) ** 2 * (1 + k * k) / (4 + k * k)))


def conserved(u: Field) -> ConservedTriple:
    g = u.grid
    dx = g.spacing
    M = float(dx * np.sum(u.values))
    m = PRODUCT_PAD * g.n
    dxm = g.length / m
    v, vx, vxx = v_and_derivatives(u.values, g.length, m)
    E = float(dxm * np.sum(4 * v * v + 5 * vx * vx + vxx * vxx))
    uu = upsample(u.values, m)
    y = upsample(_apply(u.values, g.length, lambda k2: 1 + k2), m)
    E_yv = float(dxm * np.sum(y * v))
    F = float(dxm * np.sum(uu**3))
    F_v = float(dxm * np.sum(-vxx**3 + 12 * v * vxx**2 - 48 * v * v * vxx + 64 * v**3))
    return ConservedTriple(M=M, E=E, F=F, E_residual=abs(E - E_yv), F_residual=abs(F - F_v))


def _apply(values, length, mult):
    n = values.shape[-1]
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    return np.fft.irfft(np.fft.rfft(values) * mult(k * k), n=n)


def h_norm(u: Field) -> float:
    return math.sqrt(max(energy(u), 0.0))


def l2_norm(u: Field) -> float:
    return math.sqrt(u.grid.spacing * float(np.sum(u.values**2)))


def peakon_spectrum(c: float, r: float, grid: Grid) -> np.ndarray:
    """
    rfft coefficients of the periodized peakon c e^{-|x - r|} on the box,
    computed from its exact Fourier series (no sampling of the corner).
    """
    k = grid.wavenumbers
    mode = np.arange(k.size)
    tail = 1.0 - np.where(mode % 2 == 0, 1.0, -1.0) * math.exp(-grid.length / 2)
    hat = 2.0 * c * tail / (1.0 + k * k) * np.exp(-1j * k * (r - grid.x_min))
    hat[-1] = hat[-1].real
    return hat / grid.spacing


def peakon_field(c: float, r: float, grid: Grid) -> Field:
    """Band-limited projection of the peakon (see :func:`peakon_spectrum`)."""
    return Field(grid, np.fft.irfft(peakon_spectrum(c, r, grid), n=grid.n))


def periodized_rho(c: float, x, length: float):
    """sum_m rho_c(x + m length): the smooth peakon on the periodic box."""
    s = np.abs(np.asarray(x, dtype=float))
    s = np.minimum(s % length, length - s % length)

    def per(a):
        return (np.exp(-a * s) + np.exp(-a * (length - s))) / (1.0 - math.exp(-a * length))

    return c / 3.0 * per(1.0) - c / 6.0 * per(2.0)


def _h_weights(grid: Grid) -> np.ndarray:
    k = grid.wavenumbers
    w = np.full(k.shape, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return grid.length / grid.n**2 * w * (1 + k * k) / (4 + k * k)


def train_spectral_tail(velocities: Sequence[float], positions: Sequence[float], grid: Grid) -> float:
    """
    H-energy of the periodized peakon sum above the grid's Nyquist mode:
    the exact E = sum_ij 2 c_i rho_{c_j}(z_i - z_j) minus its resolved part.
    """
    total = 0.0
    for ci, zi in zip(velocities, positions):
        for cj, zj in zip(velocities, positions):
            total += 2 * ci * float(periodized_rho(cj, zi - zj, grid.length))
    hat = np.zeros(grid.wavenumbers.shape, dtype=complex)
    for c, r in zip(velocities, positions):
        hat += peakon_spectrum(c, r, grid)
    return max(total - float(np.sum(_h_weights(grid) * np.abs(hat) ** 2)), 0.0)


def h_distance_to_peakon(u: Field, c: float, r: float) -> float:
    """||u - phi_c(. - r)||_H with the peakon's exact Fourier series."""
    return h_distance_to_train(u, (c,), (r,))


def h_distance_to_train(u: Field, velocities: Sequence[float], positions: Sequence[float]) -> float:
    """
    ||u - sum phi_cj(. - z_j)||_H for band-limited u, including the peakon
    energy above the Nyquist mode in closed form.
    """
    g = u.grid
    diff = np.fft.rfft(u.values)
    for c, r in zip(velocities, positions):
        diff = diff - peakon_spectrum(c, r, g)
    e = float(np.sum(_h_weights(g) * np.abs(diff) ** 2))
    e += train_spectral_tail(velocities, positions, g)
    return math.sqrt(max(e, 0.0))


# weights -------------------------------------------------------------------

def psi(x):
    """Psi(x) = (2/pi) arctan(exp(x/6)); computed stably for large |x|."""
    x = np.asarray(x, dtype=float)
    # arctan(e^s) = pi/2 - arctan(e^-s) keeps precision on both tails
    s = x / 6.0
    out = np.where(
        s <= 0,
        (2 / np.pi) * np.arctan(np.exp(np.minimum(s, 0.0))),
        1.0 - (2 / np.pi) * np.arctan(np.exp(-np.maximum(s, 0.0))),
    )
    return out if out.ndim else float(out)


def psi_prime(x):
    """Psi'(x) = 1/(6 pi cosh(x/6))."""
    x = np.asarray(x, dtype=float)
    out = 1.0 / (6.0 * np.pi * np.cosh(x / 6.0))
    return out if out.ndim else float(out)


def psi_second(x):
    x = np.asarray(x, dtype=float)
    s = x / 6.0
    out = -np.tanh(s) / (36.0 * np.pi * np.cosh(s))
    return out if out.ndim else float(out)


def psi_third(x):
    x = np.asarray(x, dtype=float)
    s = x / 6.0
    ch = np.cosh(s)
    out = (np.tanh(s) ** 2 - 1.0 / ch**2) / (216.0 * np.pi * ch)
    return out if out.ndim else float(out)


def phi(x):
    """Continuous ramp: 0 for x <= 0, x/2 on [0, 2], 1 for x >= 2."""
    x = np.asarray(x, dtype=float)
    out = np.clip(x / 2.0, 0.0, 1.0)
    return out if out.ndim else float(out)


def psi_k(x, K: float):
    return psi(np.asarray(x) / K)


def psi_k_prime(x, K: float):
    return psi_prime(np.asarray(x) / K) / K


def psi_k_second(x, K: float):
    return psi_second(np.asarray(x) / K) / K**2


@dataclass(frozen=True)
class WeightSpec:
    """
    Moving-window weights Psi_K(x - y_j) with centers y_1 < ... < y_J.

    ``lam`` multiplies the cubic term of the J functional.
    """

    K: float
    centers: tuple[float, ...]
    lam: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
        if not self.K > 0:
            raise ValueError("K must be positive")
        if any(b <= a for a, b in zip(self.centers, self.centers[1:])):
            raise ValueError("weight centers must be strictly increasing")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")

    def check_lambda(self, c1: float) -> None:
        if self.lam > 1.0 / (2.0 * c1) + 1e-15:
            raise ValueError(f"lambda={self.lam} exceeds 1/(2 c_1)={1 / (2 * c1)}")

    def window(self, x, i: int) -> np.ndarray:
        """Phi_i = Psi_K(. - y_i) - Psi_K(. - y_{i+1}); the last one is Psi_K(. - y_J)."""
        if not 1 <= i <= len(self.centers):
            raise IndexError(f"window index {i} outside 1..{len(self.centers)}")
        w = psi_k(np.asarray(x) - self.centers[i - 1], self.K)
        if i < len(self.centers):
            w = w - psi_k(np.asarray(x) - self.centers[i], self.K)
        return w

    def window_prime(self, x, i: int) -> np.ndarray:
        w = psi_k_prime(np.asarray(x) - self.centers[i - 1], self.K)
        if i < len(self.centers):
            w = w - psi_k_prime(np.asarray(x) - self.centers[i], self.K)
        return w


def default_K(L: float) -> float:
    return math.sqrt(L) / 8.0


def _fine_nodes(grid: Grid, m: int) -> np.ndarray:
    return grid.x_min + np.arange(m) * (grid.length / m)


def localized_pair(u: Field, spec: WeightSpec, i: int) -> tuple[float, float]:
    """(E_i, F_i): energy and cubic densities weighted by Phi_i."""
    g = u.grid
    m = PRODUCT_PAD * g.n
    x = _fine_nodes(g, m)
    w = spec.window(x, i)
    dens = energy_density(u, m)
    uu = upsample(u.values, m)
    dxm = g.length / m
    return float(dxm * np.sum(dens * w)), float(dxm * np.sum(uu**3 * w))


def j_functional(u: Field, spec: WeightSpec, j: int) -> float:
    """int [(4v^2 + 5v_x^2 + v_xx^2) - lam u^3] Psi_K(x - y_j)."""
    if not 1 <= j <= len(spec.centers):
        raise IndexError(f"weight index {j} outside 1..{len(spec.centers)}")
    g = u.grid
    m = PRODUCT_PAD * g.n
    x = _fine_nodes(g, m)
    w = psi_k(x - spec.centers[j - 1], spec.K)
    dens = energy_density(u, m)
    uu = upsample(u.values, m)
    return float(g.length / m * np.sum((dens - spec.lam * uu**3) * w))


def e_plus_gamma_m(u: Field, y_center: float, gamma: float) -> float:
    """int (4v^2+5v_x^2+v_xx^2) Psi(. - y1) + gamma y Phi(. - y1)."""
    g = u.grid
    m = PRODUCT_PAD * g.n
    x = _fine_nodes(g, m)
    dens = energy_density(u, m)
    y = upsample(_apply(u.values, g.length, lambda k2: 1 + k2), m)
    return float(g.length / m * np.sum(dens * psi(x - y_center) + gamma * y * phi(x - y_center)))


# closed-form peakon values ------------------------------------------------

def peakon_energy(c: float) -> float:
    return c * c / 3.0


def peakon_cubic(c: float) -> float:
    return 2.0 * c**3 / 3.0


def peakon_mass(c: float) -> float:
    return 2.0 * c
