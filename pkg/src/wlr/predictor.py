"""Forward prediction of an encoder angle stream with a causal quadratic fit.

A second-order Savitzky-Golay fit over the trailing window is evaluated
``horizon_ms`` past the newest sample. Since the fit is linear in the data,
the prediction is a fixed dot product with precomputed weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import IllConditioned, InsufficientSamples, NonUniformSampling

ORDER = 2


@dataclass(frozen=True)
class PredictorConfig:
    sample_rate_hz: float = 1000.0
    window_samples: int = 51
    horizon_ms: float = 26.0

    def __post_init__(self):
        if self.window_samples < 5 or self.window_samples % 2 == 0:
            raise ValueError("window_samples must be odd and at least 5")
        if self.horizon_ms < 0:
            raise ValueError("horizon_ms must be non-negative")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")

    @property
    def horizon_samples(self) -> float:
        return self.horizon_ms * self.sample_rate_hz / 1000.0


@lru_cache(maxsize=64)
def _weights(window: int, horizon_samples: float) -> np.ndarray:
    # time in samples, 0 at the newest sample
    tau = np.arange(-(window - 1), 1, dtype=float)
    A = np.vander(tau, ORDER + 1, increasing=True)
    if np.linalg.cond(A) > 1e12:
        raise IllConditioned("design matrix is numerically singular")
    at = np.array([horizon_samples**k for k in range(ORDER + 1)])
    # w = at^T (A^T A)^-1 A^T
    w = np.linalg.solve(A.T @ A, at) @ A.T
    w.setflags(write=False)
    return w


def predictor_weights(config: PredictorConfig = PredictorConfig()) -> np.ndarray:
    """Weights over the trailing window, oldest sample first."""
    return _weights(config.window_samples, float(config.horizon_samples))


def predict(angles, config: PredictorConfig = PredictorConfig()) -> float:
    """Predicted angle ``horizon_ms`` after the last sample of ``angles``."""
    a = np.asarray(angles, dtype=float)
    n = config.window_samples
    if a.size < n:
        raise InsufficientSamples(f"need {n} samples, got {a.size}")
    return float(predictor_weights(config) @ a[-n:])


def predict_stream(angles, config: PredictorConfig = PredictorConfig()) -> np.ndarray:
    """Running predictions; NaN until the window has filled."""
    a = np.asarray(angles, dtype=float)
    n = config.window_samples
    out = np.full(a.size, np.nan)
    if a.size >= n:
        w = predictor_weights(config)
        windows = np.lib.stride_tricks.sliding_window_view(a, n)
        out[n - 1:] = windows @ w
    return out


def check_uniform(t_ms, rtol: float = 1e-6) -> float:
    """Return the sample spacing in ms, raising if timestamps are not uniform."""
    t = np.asarray(t_ms, dtype=float)
    if t.size < 2:
        raise InsufficientSamples("need at least two timestamps")
    dt = np.diff(t)
    step = (t[-1] - t[0]) / (t.size - 1)
    if step <= 0 or np.any(dt <= 0):
        raise NonUniformSampling("timestamps must be strictly increasing")
    if np.max(np.abs(dt - step)) > rtol * step:
        raise NonUniformSampling("timestamps are not uniformly spaced")
    return float(step)
