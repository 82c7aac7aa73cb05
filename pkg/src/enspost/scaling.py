"""Min-max feature scaling to [0, 1] with exact inverse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-feature min/max fitted on training data only.

    forward maps x to (x - min) / (max - min); values outside the training
    range map outside [0, 1] on purpose (no clamping, so extrapolation
    stays visible). A degenerate feature (min == max) maps forward to 0.0
    and inverse to min.
    """

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.atleast_1d(np.asarray(self.mins, dtype=np.float64))
        maxs = np.atleast_1d(np.asarray(self.maxs, dtype=np.float64))
        if mins.shape != maxs.shape or mins.ndim != 1:
            raise ValueError("mins and maxs must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(mins)) and np.all(np.isfinite(maxs))):
            raise ValueError("scaler bounds must be finite")
        if np.any(mins > maxs):
            raise ValueError("min must not exceed max")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    @property
    def n_features(self) -> int:
        return self.mins.size

    @property
    def spans(self) -> np.ndarray:
        return self.maxs - self.mins

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        span = self.spans
        safe = np.where(span > 0, span, 1.0)
        out = (x - self.mins) / safe
        return np.where(span > 0, out, 0.0)

    def inverse(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        span = self.spans
        return np.where(span > 0, self.mins + u * span, self.mins)


def scaler_fit(training_values: np.ndarray) -> MinMaxScaler:
    """Fit per-feature bounds; training_values is (n_samples, n_features) or (n,)."""
    vals = np.asarray(training_values, dtype=np.float64)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.shape[0] == 0:
        raise ValueError("cannot fit a scaler on an empty sample")
    if not np.all(np.isfinite(vals)):
        raise ValueError("training values must be finite")
    return MinMaxScaler(vals.min(axis=0), vals.max(axis=0))


def scaler_map(scaler: MinMaxScaler, value: np.ndarray, direction: str) -> np.ndarray:
    """Functional wrapper: direction is 'forward' or 'inverse'."""
    if direction == "forward":
        return scaler.forward(value)
    if direction == "inverse":
        return scaler.inverse(value)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
