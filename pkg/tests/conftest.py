import numpy as np
import pytest

from ojak.linalg import gram_schmidt_qr

# filled by test_acceptance._line; replayed after the run so the scorecard
# survives output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance scorecard")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_orthonormal(rng: np.random.Generator, d: int, k: int) -> np.ndarray:
    return gram_schmidt_qr(rng.standard_normal((d, k)))


def random_symmetric(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    G = rng.standard_normal((d, d))
    return scale * 0.5 * (G + G.T)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
