import numpy as np
import pytest

from modal_sentinel.beam import BeamSpec, simulate
from modal_sentinel.config import damage_case_config
from modal_sentinel.pipeline import run_states


@pytest.fixture(scope="session")
def spec():
    return BeamSpec.square_section()


@pytest.fixture(scope="session")
def healthy(spec):
    """Default healthy simulation: (snapshots, basis)."""
    return simulate(spec)


@pytest.fixture(scope="session")
def state_runs():
    """Healthy, D1 and D2 runs scored against the healthy baseline."""
    configs = [damage_case_config(0, "healthy"), damage_case_config(1, "D1"),
               damage_case_config(2, "D2")]
    return run_states(configs[0], configs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rank_r_system(n=10, m=50, seed=7):
    """Snapshots of x_{k+1} = A x_k with A of rank 3 and known nonzero eigenvalues."""
    rng = np.random.default_rng(seed)
    eig = np.array([0.95 * np.exp(0.3j), 0.95 * np.exp(-0.3j), 0.8])
    # real block form of the complex pair plus one real eigenvalue
    r, th = 0.95, 0.3
    block = np.zeros((3, 3))
    block[:2, :2] = r * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    block[2, 2] = 0.8
    basis, _ = np.linalg.qr(rng.standard_normal((n, 3)))
    A = basis @ block @ basis.T
    x = np.empty((n, m))
    x[:, 0] = basis @ rng.standard_normal(3)
    for k in range(1, m):
        x[:, k] = A @ x[:, k - 1]
    return A, x, eig


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
