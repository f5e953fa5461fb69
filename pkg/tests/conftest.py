import numpy as np
import pytest

from fogslice.scenarios import build_scenario, demo_scenario


def single_cell(lam=80.0, gamma=180.0, beta=30e6, b0=1e5, d=1e6, snr=3.0, tcap=0.5, confidence=0.9):
    """One BS, one service; spectral efficiency log2(1+snr)."""
    return build_scenario([d], [tcap], [[lam]], [[snr]], beta=beta, b0=b0, fog_caps=[gamma], confidence=confidence)


def symmetric_pair(lam=10.0, gamma=40.0, beta=5e6):
    """Two identical BSs with one service each."""
    return build_scenario([2e4], [1.0], [[lam], [lam]], [[15.0], [15.0]], beta=beta, b0=1e3, fog_caps=[gamma])


@pytest.fixture
def demo3():
    return demo_scenario(3, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    """Print the per-criterion verdict lines recorded by the acceptance suite."""
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
