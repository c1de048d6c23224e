import numpy as np
import pytest
from scipy import linalg


def dense_displacement(eta: float, dim: int, big: int = 120) -> np.ndarray:
    """exp(i eta (a + a^+)) by matrix exponential on a large basis, cut to ``dim``."""
    a = np.diag(np.sqrt(np.arange(1, big)), 1)
    return linalg.expm(1j * eta * (a + a.T))[:dim, :dim]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = {}


def record_criterion(number: int, ok: bool, detail: str) -> str:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
