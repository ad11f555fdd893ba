import numpy as np
import pytest
import scipy.sparse as sp

from tracelab.chain_core import FiniteChain, Measure


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def cycle3():
    """Deterministic 3-cycle 0 -> 1 -> 2 -> 0 with the uniform probability measure."""
    P = sp.csr_matrix(np.roll(np.eye(3), 1, axis=1))
    return FiniteChain((0, 1, 2), P, 0, None), Measure({0: 1 / 3, 1: 1 / 3, 2: 1 / 3})


# acceptance criteria record one verdict line each; the lines are repeated in the terminal summary
CRITERIA: dict[int, str] = {}


@pytest.fixture
def verdict(request):
    """Record ``(number, passed, detail)`` for the acceptance summary and echo it right away."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        CRITERIA[number] = line
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
