"""Exception types shared across the package."""

from __future__ import annotations

import numpy as np


class ConfigurationError(ValueError):
    """Invalid model, policy, or estimator configuration (bad shapes, rows
    that do not sum to one, out-of-range parameters, unknown environments)."""


class OverlapViolationError(RuntimeError):
    """The behavior policy puts zero probability on an action the target
    policy can take, at a covariate actually visited by the data."""

    def __init__(self, t: int, x: int, a: int, env: str | None = None):
        self.t = int(t)
        self.x = int(x)
        self.a = int(a)
        self.env = env
        where = f" in environment {env!r}" if env else ""
        super().__init__(
            f"overlap violation{where} at step t={self.t}: behavior probability "
            f"is 0 for action a={self.a} at covariate x={self.x} while the "
            f"target probability is positive"
        )


class MixingFailureError(RuntimeError):
    """Power iteration failed to reach the requested fixed-point tolerance.

    Carries the last iterate and its residual so callers can inspect how far
    the chain was from stationarity.
    """

    def __init__(self, last_iterate: np.ndarray, residual: float, max_iter: int):
        self.last_iterate = np.asarray(last_iterate, dtype=float)
        self.residual = float(residual)
        self.max_iter = int(max_iter)
        super().__init__(
            f"stationary distribution did not converge after {self.max_iter} "
            f"iterations (L1 residual {self.residual:.3e})"
        )
