"""
Explicit profiles: peakons, smooth peakons, shock peakons, peakon trains,
and mollified initial data whose momentum density has a single sign change.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .grid import Field, Grid

#: quadrature order for the mollifier's Fourier transform
_GL_NODES = 1200


def peakon(c: float, x0: float, grid: Grid) -> Field:
    """Sample c*exp(-|x - x0|) using minimum-image distance."""
    if c == 0:
        raise ValueError("peakon speed must be nonzero")
    d = grid.min_image(grid.nodes - x0)
    return Field(grid, c * np.exp(-np.abs(d)))


def smooth_peakon(c: float, x0: float, grid: Grid) -> Field:
    """(4 - d^2)^-1 applied to the peakon: (c/3)e^{-|x|} - (c/6)e^{-2|x|}."""
    if c == 0:
        raise ValueError("peakon speed must be nonzero")
    a = np.abs(grid.min_image(grid.nodes - x0))
    return Field(grid, c / 3.0 * np.exp(-a) - c / 6.0 * np.exp(-2.0 * a))


def shock_peakon(k: float, t: float, grid: Grid) -> Field:
    """The decaying odd solution -(t + k)^-1 sgn(x) e^{-|x|}."""
    if not k > 0:
        raise ValueError(f"shock parameter k must be positive, got {k}")
    if t < 0:
        raise ValueError("time must be nonnegative")
    x = grid.nodes
    return Field(grid, -np.sign(x) * np.exp(-np.abs(x)) / (t + k))


@dataclass(frozen=True)
class TrainSpec:
    """
    Ordered antipeakon/peakon superposition.

    ``velocities`` are strictly increasing with all negative entries before
    the positive ones; ``shifts`` are the initial positions, pairwise at
    least ``separation`` apart.
    """

    velocities: tuple[float, ...]
    shifts: tuple[float, ...]
    separation: float

    def __post_init__(self) -> None:
        c = tuple(float(v) for v in self.velocities)
        z = tuple(float(v) for v in self.shifts)
        object.__setattr__(self, "velocities", c)
        object.__setattr__(self, "shifts", z)
        for problem in train_problems(c, z, self.separation):
            raise ValueError(problem)

    @property
    def size(self) -> int:
        return len(self.velocities)

    @property
    def n_neg(self) -> int:
        return sum(1 for c in self.velocities if c < 0)

    @property
    def n_pos(self) -> int:
        return self.size - self.n_neg

    @property
    def labels(self) -> list[int]:
        """Signed bump indices -N_-, ..., -1, 1, ..., N_+."""
        return list(range(-self.n_neg, 0)) + list(range(1, self.n_pos + 1))

    @property
    def l1(self) -> float:
        return float(sum(abs(c) for c in self.velocities))

    @property
    def sigma(self) -> float:
        """Smallest gap between consecutive speeds, counting c_0 = 0."""
        speeds = sorted(list(self.velocities) + [0.0])
        return float(min(np.diff(speeds)))

    @property
    def spread(self) -> float:
        return self.shifts[-1] - self.shifts[0]


def train_problems(velocities: Sequence[float], shifts: Sequence[float], separation: float) -> list[str]:
    """Reasons a velocity/shift list is not an admissible train (empty if fine)."""
    out = []
    if len(velocities) == 0:
        out.append("train needs at least one bump")
        return out
    if len(velocities) != len(shifts):
        out.append("velocities and shifts differ in length")
        return out
    if any(c == 0 for c in velocities):
        out.append("zero velocity is not a bump")
    if any(b <= a for a, b in zip(velocities, velocities[1:])):
        out.append("velocities must be strictly increasing")
    gaps = np.diff(np.asarray(shifts, dtype=float))
    if np.any(gaps < separation):
        out.append(f"shift gaps {gaps.tolist()} smaller than separation L={separation} (z_j - z_q >= L)")
    if separation <= 0 and len(velocities) > 1:
        out.append("separation must be positive")
    return out


def train(spec: TrainSpec, grid: Grid) -> Field:
    """Sum of sampled peakons c_j exp(-|x - z_j|)."""
    _check_fits(spec, grid)
    out = np.zeros(grid.n)
    for c, z in zip(spec.velocities, spec.shifts):
        out += peakon(c, z, grid).values
    return Field(grid, out)


def _check_fits(spec: TrainSpec, grid: Grid) -> None:
    if grid.length <= spec.spread + 16:
        raise ValueError(
            f"box length {grid.length} too short for train spread {spec.spread}: "
            "periodic images would overlap"
        )


# mollification ---------------------------------------------------------------

def mollifier(x) -> np.ndarray:
    """Unnormalized bump exp(1/(x^2 - 1)) on |x| < 1."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < 1
    out[m] = np.exp(1.0 / (x[m] ** 2 - 1.0))
    return out


@lru_cache(maxsize=None)
def _gl():
    xs, ws = np.polynomial.legendre.leggauss(_GL_NODES)
    wr = ws * mollifier(xs)
    return xs, wr / wr.sum()


def mollifier_transform(omega) -> np.ndarray:
    """Fourier transform of the unit-mass mollifier (even, real)."""
    xs, wr = _gl()
    omega = np.asarray(omega, dtype=float)
    return np.cos(np.multiply.outer(omega, xs)) @ wr


def _mollified_spectrum(hat_neg, hat_pos, n: int, k: np.ndarray) -> np.ndarray:
    """Spectrum of (rho_n*y_-)(.+1/n) + (rho_n*y_+)(.-1/n)."""
    m = mollifier_transform(k / n)
    return m * (hat_neg * np.exp(1j * k / n) + hat_pos * np.exp(-1j * k / n))


def check_mollification_scale(grid: Grid, n: int) -> None:
    if n < 1:
        raise ValueError("mollification index must be >= 1")
    if grid.spacing > 1.0 / (2 * n):
        raise ValueError(
            f"grid spacing {grid.spacing:.4g} too coarse for mollifier width 1/{n}; "
            f"need spacing <= {1.0 / (2 * n):.4g}"
        )


def mollified_from_momentum(y_neg: Field, y_pos: Field, n: int, tol: float | None = None) -> Field:
    """
    Smooth data u_n = p * y_n from a sign-split momentum density.

    ``y_neg`` (<= 0) must sit left of ``y_pos`` (>= 0). Each part is
    convolved with the width-1/n mollifier and pushed 1/n away from the
    other, which keeps the single sign change.
    """
    grid = y_neg.grid
    if y_pos.grid != grid:
        raise ValueError("momentum parts live on different grids")
    check_mollification_scale(grid, n)
    scale = max(y_neg.max_abs(), y_pos.max_abs())
    if tol is None:
        tol = 1e-10 * scale
    if np.any(y_neg.values > tol) or np.any(y_pos.values < -tol):
        raise HypothesisViolation("y_neg must be <= 0 and y_pos >= 0", None, None)
    neg_idx = np.flatnonzero(y_neg.values < -tol)
    pos_idx = np.flatnonzero(y_pos.values > tol)
    if neg_idx.size and pos_idx.size and neg_idx[-1] > pos_idx[0]:
        raise HypothesisViolation(
            "negative momentum must lie left of positive momentum",
            float(grid.nodes[pos_idx[0]]),
            float(grid.nodes[neg_idx[-1]]),
        )
    k = grid.wavenumbers
    yh = _mollified_spectrum(np.fft.rfft(y_neg.values), np.fft.rfft(y_pos.values), n, k)
    uh = yh / (1.0 + k * k)
    uh[-1] = uh[-1].real
    return Field(grid, np.fft.irfft(uh, n=grid.n))


def dirac_spectrum(weights, positions, grid: Grid) -> np.ndarray:
    """rfft coefficients of sum_j w_j delta(x - x_j) on the grid's DFT convention."""
    k = grid.wavenumbers
    out = np.zeros(k.shape, dtype=complex)
    for w, z in zip(weights, positions):
        out += w * np.exp(-1j * k * (z - grid.x_min))
    return out / grid.spacing


def mollified_train(spec: TrainSpec, grid: Grid, n: int) -> Field:
    """
    Mollified peakon train: momentum 2c_j delta(z_j) split by sign and
    smoothed as in :func:`mollified_from_momentum`, evaluated exactly in
    Fourier space.
    """
    _check_fits(spec, grid)
    check_mollification_scale(grid, n)
    neg = [(2 * c, z) for c, z in zip(spec.velocities, spec.shifts) if c < 0]
    pos = [(2 * c, z) for c, z in zip(spec.velocities, spec.shifts) if c > 0]
    hn = dirac_spectrum([w for w, _ in neg], [z for _, z in neg], grid)
    hp = dirac_spectrum([w for w, _ in pos], [z for _, z in pos], grid)
    k = grid.wavenumbers
    uh = _mollified_spectrum(hn, hp, n, k) / (1.0 + k * k)
    uh[-1] = 0.0
    return Field(grid, np.fft.irfft(uh, n=grid.n))


def mollified_peakon(c: float, x0: float, grid: Grid, n: int) -> Field:
    return mollified_train(TrainSpec((c,), (x0,), 1.0), grid, n)


def bump(grid: Grid, center: float, width: float, mass: float) -> Field:
    """Compactly supported smooth bump of given total mass and half-width."""
    shape = mollifier(grid.min_image(grid.nodes - center) / width)
    total = np.sum(shape) * grid.spacing
    if total == 0:
        raise ValueError("bump narrower than the grid spacing")
    return Field(grid, mass * shape / total)


# sign structure --------------------------------------------------------------

class HypothesisViolation(ValueError):
    """Momentum density is not negative-then-positive; carries a witness."""

    def __init__(self, message: str, positive_at: float | None, negative_at: float | None):
        super().__init__(message)
        self.positive_at = positive_at
        self.negative_at = negative_at


@dataclass(frozen=True)
class SignStructure:
    """Certificate: y <= tol left of x0 and y >= -tol right of it."""

    x0: float
    tol: float
    index: int


def check_hypothesis1(y: Field, tol: float | None = None) -> SignStructure:
    """
    Certify that y is <= tol left of some x0 and >= -tol right of it.

    x0 is the last node where y < -tol (the leftmost node if there is
    none). Raises :class:`HypothesisViolation` naming a positive node that
    sits left of a negative one.
    """
    vals = y.values
    if tol is None:
        tol = 1e-10 * y.max_abs()
    neg = np.flatnonzero(vals < -tol)
    if neg.size == 0:
        return SignStructure(float(y.grid.nodes[0]), tol, 0)
    j = int(neg[-1])
    pos = np.flatnonzero(vals[:j] > tol)
    if pos.size:
        i = int(pos[0])
        later_neg = int(neg[np.searchsorted(neg, i)])
        raise HypothesisViolation(
            f"no admissible x0: y > tol at x={y.grid.nodes[i]:.6g} "
            f"but y < -tol at x={y.grid.nodes[later_neg]:.6g}",
            float(y.grid.nodes[i]),
            float(y.grid.nodes[later_neg]),
        )
    return SignStructure(float(y.grid.nodes[j]), tol, j)


def regularized_momentum(u: Field, width_cells: float = 16.0) -> Field:
    """
    y = (1 - d^2)u smoothed by a Gaussian of ``width_cells`` grid spacings.

    Gaussian smoothing never adds sign changes, so it can certify the sign
    structure of near-peaked data whose raw spectral y rings.
    """
    k = u.grid.wavenumbers
    sigma = width_cells * u.grid.spacing
    yh = np.fft.rfft(u.values) * (1.0 + k * k) * np.exp(-0.5 * (sigma * k) ** 2)
    return Field(u.grid, np.fft.irfft(yh, n=u.grid.n))


def half_line_reconstruction(y: Field) -> Field:
    """
    u(x) = 1/2 int_{-inf}^x e^{x'-x} y + 1/2 int_x^{inf} e^{x-x'} y,
    by cumulative trapezoid sums (independent of the spectral inverse).
    """
    x = y.grid.nodes
    dx = y.grid.spacing
    vals = y.values
    left = np.zeros_like(vals)
    right = np.zeros_like(vals)
    e = np.exp(-dx)
    # recursions for int e^{x'-x} y over x' < x and int e^{x-x'} y over x' > x
    for j in range(1, len(x)):
        left[j] = left[j - 1] * e + 0.5 * dx * (vals[j] + vals[j - 1] * e)
    for j in range(len(x) - 2, -1, -1):
        right[j] = right[j + 1] * e + 0.5 * dx * (vals[j] + vals[j + 1] * e)
    return Field(y.grid, 0.5 * (left + right))
