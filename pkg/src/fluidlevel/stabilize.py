"""Rolling-buffer acceptance filter for noisy measurement streams."""

from __future__ import annotations

import math
import statistics
from collections import deque
from dataclasses import dataclass

from .errors import NonFiniteInput

__all__ = ["StabilizerConfig", "StableReading", "Stabilizer"]


@dataclass(frozen=True)
class StabilizerConfig:
    """Window length and acceptance threshold.

    With ``relative`` set, ``sigma_threshold`` is a fraction of the absolute
    window mean; otherwise it is in the units of the pushed values.
    """

    window: int = 10
    sigma_threshold: float = 0.005
    relative: bool = True
    rearm_factor: float = 3.0

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if not self.sigma_threshold > 0:
            raise ValueError("sigma_threshold must be > 0")
        if not self.rearm_factor > 1:
            raise ValueError("rearm_factor must be > 1")


@dataclass(frozen=True)
class StableReading:
    value: float
    sigma: float
    window_start: float | None = None
    window_end: float | None = None


class Stabilizer:
    """Emit the window mean once per settled episode.

    After an emission the filter stays quiet until the window's sample
    standard deviation exceeds ``rearm_factor`` times the threshold, so a
    persisting plateau yields a single reading and each disturbance opens a
    new episode.

    Not thread-safe; use one instance per stream.
    """

    def __init__(self, config: StabilizerConfig = StabilizerConfig()):
        self.config = config
        self._values: deque[float] = deque(maxlen=config.window)
        self._times: deque[float | None] = deque(maxlen=config.window)
        self.armed = True
        self.last_sigma: float | None = None

    def reset(self):
        self._values.clear()
        self._times.clear()
        self.armed = True
        self.last_sigma = None

    def threshold(self, mean: float) -> float:
        c = self.config
        return c.sigma_threshold * abs(mean) if c.relative else c.sigma_threshold

    def push(self, value: float, timestamp: float | None = None) -> StableReading | None:
        value = float(value)
        if not math.isfinite(value):
            raise NonFiniteInput(f"non-finite measurement {value!r}")
        self._values.append(value)
        self._times.append(timestamp)
        if len(self._values) < self.config.window:
            self.last_sigma = None
            return None
        mean = math.fsum(self._values) / len(self._values)
        sigma = statistics.stdev(self._values)
        self.last_sigma = sigma
        limit = self.threshold(mean)
        if not self.armed:
            if sigma > self.config.rearm_factor * limit:
                self.armed = True
            return None
        if sigma < limit:
            self.armed = False
            return StableReading(mean, sigma, self._times[0], self._times[-1])
        return None
