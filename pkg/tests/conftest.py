"""Shared test helpers: scripted random streams and sample builders."""

import numpy as np
import pytest

from kinex.rng import RngStream


class ScriptedStream:
    """Stands in for RngStream with a fixed queue of uniforms.

    Only the parts of the stream interface the single-step kernels touch are
    provided: random() pops the next scripted value, derived_key is a fixed
    constant so directed pairings resolve deterministically.
    """

    def __init__(self, values, key: int = 0):
        self.values = list(values)
        self.key = key

    def random(self) -> float:
        return self.values.pop(0)

    def derived_key(self, salt: int = 0) -> int:
        return self.key


@pytest.fixture
def stream():
    """A fresh real random stream with a fixed seed."""
    return RngStream(seed=20240817, stream_id=0)


def exp_draws(seed: int, n: int, temperature: float) -> np.ndarray:
    return np.random.default_rng(seed).exponential(temperature, n)


def pareto_draws(seed: int, n: int, alpha: float, minimum: float) -> np.ndarray:
    u = np.random.default_rng(seed).random(n)
    return minimum * u ** (-1.0 / alpha)
