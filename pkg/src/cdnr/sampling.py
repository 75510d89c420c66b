"""Alias method for O(1) draws from a fixed discrete distribution."""

from __future__ import annotations

import numpy as np

__all__ = ["AliasSampler"]


class AliasSampler:
    """Walker's alias table over an unnormalized weight vector."""

    def __init__(self, weights: np.ndarray):
        weights = np.asarray(weights, dtype=np.float64)
        if len(weights) == 0 or weights.min() < 0 or weights.sum() <= 0:
            raise ValueError("weights must be nonempty, nonnegative, not all zero")
        k = len(weights)
        prob = weights * (k / weights.sum())
        self.accept = np.zeros(k, dtype=np.float64)
        self.alias = np.zeros(k, dtype=np.int64)
        small = [i for i, p in enumerate(prob) if p < 1.0]
        large = [i for i, p in enumerate(prob) if p >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            self.accept[s] = prob[s]
            self.alias[s] = l
            prob[l] -= 1.0 - prob[s]
            (small if prob[l] < 1.0 else large).append(l)
        for i in large + small:
            self.accept[i] = 1.0

    def draw(self, rng: np.random.Generator, size: int | tuple[int, ...]) -> np.ndarray:
        idx = rng.integers(0, len(self.accept), size=size)
        keep = rng.random(size) < self.accept[idx]
        return np.where(keep, idx, self.alias[idx])
