import numpy as np
import pytest

from relay_ia.linalg import rank_eps


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def receiver_ranks(eff, n, threshold=1e-6):
    G = eff.G[n]
    return (
        rank_eps(G[:, eff.interference_columns(n)], threshold).rank,
        rank_eps(G[:, eff.desired_columns(n)], threshold).rank,
        rank_eps(G, threshold).rank,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion_report():
    """Record and print one pass/fail line per acceptance criterion."""

    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
