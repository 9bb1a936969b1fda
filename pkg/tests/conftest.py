import numpy as np
import pytest

from dmfw.objectives import StochasticObjective

ACCEPTANCE_LINES = []


def make_agents(n, dim=5, m=30, kind="logistic", seed=0, lam=5e-6, identical=False):
    """Small random per-agent datasets."""
    rng = np.random.default_rng(seed)
    out = []
    A0 = b0 = None
    for _ in range(n):
        if identical and A0 is not None:
            A, b = A0, b0
        else:
            A = rng.normal(size=(m, dim))
            b = rng.normal(size=m) * 2 if kind == "ridge" else rng.choice([-1.0, 1.0], size=m)
            A0, b0 = A, b
        out.append(StochasticObjective(kind, A, b, 0.0 if kind == "logistic" else lam))
    return out


@pytest.fixture
def agents():
    return make_agents


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
