"""Running observation standardization with mergeable Welford statistics."""
from __future__ import annotations

import numpy as np


class ObsNormalizer:
    """Tracks running mean/variance of observations and standardizes them.

    ``normalize(obs, training=True)`` folds the observation into the
    statistics first and then standardizes; with ``training=False`` the
    statistics are frozen.  With fewer than two observations seen the
    normalizer is the identity.  ``merge`` combines statistics gathered
    independently (parallel evaluations) in a fixed caller-chosen order.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def copy(self) -> "ObsNormalizer":
        c = ObsNormalizer(self.dim)
        c.count = self.count
        c.mean = self.mean.copy()
        c.m2 = self.m2.copy()
        return c

    def update(self, obs: np.ndarray) -> None:
        self.count += 1
        delta = obs - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (obs - self.mean)

    @property
    def var(self) -> np.ndarray:
        if self.count < 2:
            return np.ones(self.dim)
        return self.m2 / self.count

    def normalize(self, obs: np.ndarray, training: bool = False) -> np.ndarray:
        if training:
            self.update(obs)
        if self.count < 2:
            return np.asarray(obs, dtype=np.float64).copy()
        return (obs - self.mean) / np.sqrt(self.m2 / self.count + 1e-8)

    def merge(self, other: "ObsNormalizer") -> None:
        """Absorb another accumulator's statistics (Chan's parallel update)."""
        if other.count == 0:
            return
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean.copy(), other.m2.copy()
            return
        total = self.count + other.count
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.count / total)
        self.m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / total)
        self.count = total

    def state_dict(self) -> dict:
        return {"count": self.count, "mean": self.mean.tolist(), "m2": self.m2.tolist()}

    @staticmethod
    def from_state(d: dict) -> "ObsNormalizer":
        n = ObsNormalizer(len(d["mean"]))
        n.count = int(d["count"])
        n.mean = np.asarray(d["mean"], dtype=np.float64)
        n.m2 = np.asarray(d["m2"], dtype=np.float64)
        return n
