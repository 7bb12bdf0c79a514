"""
Uniform periodic grid, field values, quadrature and spectral calculus.

Everything downstream represents a function on the truncated line
[-length/2, length/2) by its samples on a power-of-two grid, and treats
those samples as a trigonometric polynomial (band limit n/2).
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Grid:
    """
    Uniform periodic grid on [-length/2, length/2).

    Parameters
    ----------
    length : float
        Measure of the periodic box.
    n : int
        Number of samples, a power of two, at least 16.
    """

    length: float
    n: int
    spacing: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.length > 0:
            raise ValueError(f"nonpositive length: {self.length}")
        n = int(self.n)
        if n != self.n or n < 16 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        object.__setattr__(self, "spacing", self.length / n)
        nodes = -self.length / 2 + np.arange(n) * self.spacing
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the rfft modes."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.spacing)

    @property
    def x_min(self) -> float:
        return -self.length / 2

    def wrap(self, x):
        """Map positions into [-length/2, length/2)."""
        return (np.asarray(x) + self.length / 2) % self.length - self.length / 2

    def min_image(self, x):
        """Signed minimum-image displacement, as used for periodic profiles."""
        return self.wrap(x)

    def field(self, values) -> "Field":
        return Field(self, np.asarray(values, dtype=float))

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.n))

    def sample(self, fn) -> "Field":
        """Evaluate ``fn`` at the nodes."""
        return Field(self, np.asarray(fn(self.nodes), dtype=float))


def make_grid(length: float, n: int) -> Grid:
    return Grid(float(length), n)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a function on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("field contains non-finite values")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return Field(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._coerce(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def __pow__(self, p):
        return Field(self.grid, self.values**p)

    def __len__(self) -> int:
        return self.grid.n

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __repr__(self) -> str:
        return f"Field(n={self.grid.n}, length={self.grid.length}, max|f|={self.max_abs():.3g})"


def quadrature(f: Field) -> float:
    """Trapezoid rule on the periodic grid."""
    return float(f.grid.spacing * np.sum(f.values))


def integrate(values: np.ndarray, spacing: float) -> float:
    return float(spacing * np.sum(values))


# spectral calculus ---------------------------------------------------------

def spectral_derivative(values: np.ndarray, length: float, order: int) -> np.ndarray:
    n = values.shape[-1]
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    mult = (1j * k) ** order
    if order % 2 == 1:
        mult[-1] = 0.0  # Nyquist mode has no odd derivative
    return np.fft.irfft(mult * np.fft.rfft(values), n=n)


def differentiate(f: Field, order: int = 1) -> Field:
    """Spectral derivative of order 1, 2 or 3."""
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    return Field(f.grid, spectral_derivative(f.values, f.grid.length, order))


def upsample(values: np.ndarray, m: int) -> np.ndarray:
    """
    Band-limited resampling of periodic samples onto ``m >= n`` points.

    Exact for the trigonometric interpolant; the Nyquist coefficient is
    split symmetrically so the result stays real.
    """
    n = values.shape[-1]
    if m < n:
        raise ValueError("upsample only refines")
    if m == n:
        return values.copy()
    fh = np.fft.rfft(values)
    out = np.zeros(m // 2 + 1, dtype=complex)
    out[: n // 2] = fh[: n // 2]
    out[n // 2] = 0.5 * fh[n // 2].real
    return np.fft.irfft(out, n=m) * (m / n)


def interpolate(values: np.ndarray, length: float, x) -> np.ndarray:
    """
    Evaluate the trigonometric interpolant of periodic samples at ``x``.

    Exact for band-limited data; the Nyquist mode enters as a cosine.
    """
    n = values.shape[-1]
    x = np.atleast_1d(np.asarray(x, dtype=float))
    fh = np.fft.rfft(values) / n
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    theta = np.outer(x + length / 2, k[1:-1])
    inner = 2.0 * (np.cos(theta) @ fh[1:-1].real - np.sin(theta) @ fh[1:-1].imag)
    nyq = fh[-1].real * np.cos((x + length / 2) * k[-1])
    return fh[0].real + inner + nyq


def boundary_leak(f: Field) -> float:
    """Largest edge value relative to the field maximum."""
    peak = f.max_abs()
    if peak == 0:
        return 0.0
    edge = max(abs(f.values[0]), abs(f.values[-1]))
    return edge / peak


def warn_if_truncated(f: Field, threshold: float = 1e-8) -> None:
    leak = boundary_leak(f)
    if leak > threshold:
        warnings.warn(
            f"field does not decay at the box edges (relative edge value {leak:.2e}); "
            "enlarge the domain",
            RuntimeWarning,
            stacklevel=2,
        )


# serialization ----------------------------------------------------------

_HEADER = struct.Struct("<dq")


def save_binary(f: Field, path) -> None:
    """Write ``length``, ``n`` (little-endian) then ``n`` float64 values."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(f.grid.length, f.grid.n))
        fh.write(np.asarray(f.values, dtype="<f8").tobytes())


def load_binary(path) -> Field:
    data = Path(path).read_bytes()
    length, n = _HEADER.unpack_from(data, 0)
    payload = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if payload.size != n:
        raise ValueError(f"truncated field record: expected {n} values, found {payload.size}")
    return Field(Grid(length, n), payload.astype(float))


def save_text(f: Field, path) -> None:
    header = f"length={f.grid.length!r} n={f.grid.n}\nx value"
    np.savetxt(path, np.column_stack([f.grid.nodes, f.values]), header=header, fmt="%.17g")


def load_text(path) -> Field:
    with open(path) as fh:
        first = fh.readline()
    meta = dict(tok.split("=") for tok in first.lstrip("# ").split())
    grid = Grid(float(meta["length"]), int(meta["n"]))
    data = np.loadtxt(path, ndmin=2)
    return Field(grid, data[:, 1])
