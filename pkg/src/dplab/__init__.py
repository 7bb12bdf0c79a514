"""
Numerical laboratory for the Degasperis-Procesi equation: a periodic
pseudospectral solver, peakon profiles, conserved functionals, exact
quadratic identities and stability diagnostics for peakons and trains.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - source checkout
    __version__ = "0.1.0"

__all__ = ["__version__"]
