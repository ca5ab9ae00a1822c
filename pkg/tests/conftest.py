import sys

import numpy as np
import pytest

from rsmerton import MarketModel, presets

TWO_STATE_VALUES = {  # gamma -> (g(1), g(2)) at tau = 0.5, as printed
    0.1: ("1.0419994", "1.03940982"),
    0.3: ("1.1699096", "1.1587431"),
    0.5: ("1.4372864", "1.40552191"),
    0.9: ("28.9779109", "23.8092044"),
}
Q1_LIMIT_VALUES = {  # q1 -> (g(1), g(2)) at gamma = 0.1
    20: ("1.0419994", "1.0394098"),
    10: ("1.0515394", "1.0482755"),
    1: ("1.0651643", "1.060905"),
    0.1: ("1.0669539", "1.0625608"),
    0.001: ("1.067157", "1.062749"),
}
THREE_STATE_VALUES = {
    0.1: ("1.0241558", "1.0221445", "1.0195109"),
    0.3: ("1.0946191", "1.08632994", "1.0755275"),
    0.5: ("1.231227", "1.20948267", "1.1813947"),
    0.9: ("7.9600128", "6.71060261", "5.31815998"),
}
MERTON_PRINTED = "1.067159"


def printed_match(value: float, printed: str) -> bool:
    """Does ``value`` round to the printed decimal string?"""
    decimals = len(printed.split(".")[1])
    return f"{value:.{decimals}f}" == printed


def random_model(rng: np.random.Generator, m: int) -> MarketModel:
    """Valid model with log-uniform transition rates in [0.01, 50]."""
    if m == 1:
        q = np.zeros((1, 1))
    else:
        q = np.exp(rng.uniform(np.log(0.01), np.log(50.0), (m, m)))
        np.fill_diagonal(q, 0.0)
        np.fill_diagonal(q, -q.sum(axis=1))
    gamma = rng.uniform(-3.0, 0.9)
    if abs(gamma) < 0.01:
        gamma = 0.01
    return MarketModel.from_arrays(
        q, rng.uniform(0.01, 0.08, m), rng.uniform(0.02, 0.5, m), rng.uniform(0.1, 0.8, m), gamma)


def random_models(n: int, seed: int = 2024, max_m: int = 5) -> list[MarketModel]:
    rng = np.random.default_rng(seed)
    return [random_model(rng, int(rng.integers(1, max_m + 1))) for _ in range(n)]


@pytest.fixture
def two_state():
    return presets.two_state(0.1)


@pytest.fixture
def three_state():
    return presets.three_state(0.1)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
