"""Tiny deterministic stand-in models shared by the tests."""

import numpy as np


class EpsOracle:
    """Predicts a fixed noise vector regardless of input."""

    parameter_count = 0

    def __init__(self, eps):
        self.eps = np.asarray(eps, dtype=np.float64)

    def predict(self, x_t, t):
        return self.eps


class ZeroModel:
    parameter_count = 0

    def predict(self, x_t, t):
        return np.zeros_like(np.asarray(x_t, dtype=np.float64))
