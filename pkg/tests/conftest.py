import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, name: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion:>2} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_histograms(rng, n, D, floor=0.0):
    X = rng.random((n, D)) + floor
    return X / X.sum(axis=1, keepdims=True)
