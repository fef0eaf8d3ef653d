"""Model adapters: a list of grayscale frames in, a score and labels out."""

from __future__ import annotations

import math
from typing import Protocol, Sequence

import numpy as np


class Adapter(Protocol):
    name: str

    def ready(self) -> bool:
        """False while the underlying model is still loading (503s)."""

    def score(self, frames: Sequence[np.ndarray], fps: int) -> tuple[float, list[str]]:
        """Return (score in [0, 1], top-k labels, best first)."""


class BaselineMeanPixel:
    """Trivial deterministic scorer: logistic over the mean intensity.

    Scores are rounded to 6 decimals; labels are the ten intensity bins
    ranked by closeness to the observed mean (ties to the lower bin).
    """

    name = "baseline"

    GAIN = 4.0
    N_BINS = 10

    def ready(self) -> bool:
        return True

    def score(self, frames: Sequence[np.ndarray], fps: int) -> tuple[float, list[str]]:
        mean = float(np.concatenate([f.reshape(-1) for f in frames]).mean())
        centered = (mean / 255.0) * 2.0 - 1.0
        value = round(1.0 / (1.0 + math.exp(-self.GAIN * centered)), 6)
        centers = [255.0 * (i + 0.5) / self.N_BINS for i in range(self.N_BINS)]
        order = sorted(range(self.N_BINS), key=lambda i: (abs(mean - centers[i]), i))
        return value, [f"intensity_bin_{i}" for i in order]


class DelayedReady:
    """Wrapper reporting not-ready for the first ``delay_calls`` checks."""

    def __init__(self, inner: Adapter, delay_calls: int = 1):
        self._inner = inner
        self._remaining = delay_calls
        self.name = inner.name

    def ready(self) -> bool:
        if self._remaining > 0:
            self._remaining -= 1
            return False
        return self._inner.ready()

    def score(self, frames: Sequence[np.ndarray], fps: int) -> tuple[float, list[str]]:
        return self._inner.score(frames, fps)


ADAPTERS = {
    "baseline": BaselineMeanPixel,
}
