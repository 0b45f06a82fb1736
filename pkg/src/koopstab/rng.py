"""Portable uniform random generator (splitmix64).

All randomness in the package flows through one explicit 64-bit seed so
datasets are byte-reproducible run to run.
"""

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class SplitMix64:
    """splitmix64 stream; uniform doubles in [0, 1) from the top 53 bits."""

    def __init__(self, seed):
        self._state = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)

    def next_uint64(self):
        with np.errstate(over="ignore"):
            self._state = self._state + _GAMMA
            z = self._state
            z = (z ^ (z >> np.uint64(30))) * _M1
            z = (z ^ (z >> np.uint64(27))) * _M2
            z = z ^ (z >> np.uint64(31))
        return int(z)

    def uniform(self, low=0.0, high=1.0):
        u = (self.next_uint64() >> 11) * 2.0 ** -53
        return low + (high - low) * u

    def uniforms(self, count, low=0.0, high=1.0):
        return np.array([self.uniform(low, high) for _ in range(count)])
