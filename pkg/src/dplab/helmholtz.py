"""
Resolvents (1 - d^2)^-1 and (4 - d^2)^-1 and the derived fields y, v, h.

Both inverses are applied as Fourier multipliers 1/(a + k^2), i.e. as
convolution with the periodized Green kernels e^{-|x|}/2 and e^{-2|x|}/4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field

ALLOWED_SHIFTS = (1.0, 4.0)


def _check_shift(a: float) -> float:
    a = float(a)
    if a not in ALLOWED_SHIFTS:
        raise ValueError(f"Helmholtz shift must be 1 or 4, got {a}")
    return a


def helmholtz_values(values: np.ndarray, length: float, a: float) -> np.ndarray:
    n = values.shape[-1]
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    return np.fft.irfft(np.fft.rfft(values) / (a + k * k), n=n)


def invert_helmholtz(f: Field, a: float) -> Field:
    """Solve (a - d^2) w = f on the periodic grid for a in {1, 4}."""
    a = _check_shift(a)
    return Field(f.grid, helmholtz_values(f.values, f.grid.length, a))


def apply_helmholtz(f: Field, a: float) -> Field:
    """Forward operator (a - d^2) f, spectrally."""
    n = f.grid.n
    k = f.grid.wavenumbers
    return Field(f.grid, np.fft.irfft(np.fft.rfft(f.values) * (a + k * k), n=n))


def resolvent_identity_residual(f: Field) -> float:
    """
    Max-norm of (4-d^2)^-1 (1-d^2)^-1 f - [(1-d^2)^-1 f - (4-d^2)^-1 f] / 3.
    """
    lhs = invert_helmholtz(invert_helmholtz(f, 1.0), 4.0)
    rhs = (invert_helmholtz(f, 1.0) - invert_helmholtz(f, 4.0)) / 3.0
    return float(np.max(np.abs(lhs.values - rhs.values)))


@dataclass(frozen=True)
class DerivedFields:
    """u together with y = (1-d^2)u, v = (4-d^2)^-1 u and h = (1-d^2)^-1 u^2."""

    u: Field
    y: Field
    v: Field
    h: Field


def derived_fields(u: Field) -> DerivedFields:
    n = u.grid.n
    k2 = u.grid.wavenumbers ** 2
    uh = np.fft.rfft(u.values)
    y = np.fft.irfft(uh * (1.0 + k2), n=n)
    v = np.fft.irfft(uh / (4.0 + k2), n=n)
    h = np.fft.irfft(np.fft.rfft(dealiased_square(u.values)) / (1.0 + k2), n=n)
    g = u.grid
    return DerivedFields(u=u, y=Field(g, y), v=Field(g, v), h=Field(g, h))


def dealiased_square(values: np.ndarray) -> np.ndarray:
    """
    Square of a band-limited field projected back onto the grid modes.

    Uses 3/2 zero padding so the retained modes of u^2 are exact.
    """
    n = values.shape[-1]
    m = 3 * n // 2
    uh = np.fft.rfft(values)
    pad = np.zeros(m // 2 + 1, dtype=complex)
    pad[: n // 2] = uh[: n // 2]
    up = np.fft.irfft(pad, n=m) * (m / n)
    sq = np.fft.rfft(up * up) * (n / m)
    out = sq[: n // 2 + 1].copy()
    out[-1] = 0.0
    return np.fft.irfft(out, n=n)
