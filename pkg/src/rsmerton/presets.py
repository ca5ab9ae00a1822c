"""Bull/bear market instances used in the numerical examples and tests."""

from __future__ import annotations

import numpy as np

from .model import GeneratorMatrix, MarketModel

HORIZON = 0.5


def two_state(gamma: float, q1: float = 20.0, q2: float = 30.0) -> MarketModel:
    """Bull (regime 0) / bear (regime 1) market."""
    return MarketModel(
        GeneratorMatrix.two_state(q1, q2),
        r=[0.05, 0.05],
        mu=[0.5, 0.1],
        sigma=[0.3, 0.5],
        gamma=gamma,
    )


def three_state(gamma: float) -> MarketModel:
    q = np.array([
        [-20.0, 1.0, 19.0],
        [25.0, -30.0, 5.0],
        [2.0, 8.0, -10.0],
    ])
    return MarketModel(
        GeneratorMatrix(q),
        r=[0.05, 0.05, 0.05],
        mu=[0.5, 0.1, 0.3],
        sigma=[0.3, 0.5, 0.7],
        gamma=gamma,
    )


def single_state(gamma: float, mu: float = 0.5, sigma: float = 0.3, r: float = 0.05) -> MarketModel:
    """No switching: the classical Merton market."""
    return MarketModel(GeneratorMatrix([[0.0]]), r=[r], mu=[mu], sigma=[sigma], gamma=gamma)
