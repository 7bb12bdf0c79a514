import numpy as np
import pytest

from dplab.grid import make_grid
from dplab.profiles import mollified_peakon


@pytest.fixture(scope="session")
def grid60():
    return make_grid(60.0, 8192)


@pytest.fixture(scope="session")
def peakon64(grid60):
    """Mollified phi_1 at the reference resolution."""
    return mollified_peakon(1.0, 0.0, grid60, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def band_limited(rng, grid, modes=None, amplitude=1.0):
    """Random real field whose spectrum stops at ``modes`` (default n/8)."""
    modes = grid.n // 8 if modes is None else modes
    coef = np.zeros(grid.n // 2 + 1, dtype=complex)
    coef[1:modes + 1] = rng.normal(size=modes) + 1j * rng.normal(size=modes)
    coef[0] = rng.normal()
    vals = np.fft.irfft(coef, n=grid.n)
    return grid.field(amplitude * vals / np.max(np.abs(vals)))


#: one PASS/FAIL line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
