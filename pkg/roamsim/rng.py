"""
Portable seedable random number generator.

SplitMix64 state transition:

    state  <- (state + 0x9E3779B97F4A7C15) mod 2**64
    z      <- state
    z      <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z      <- (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    output <- z ^ (z >> 31)

Only integer arithmetic modulo 2**64 is involved, so a seed reproduces the
same integer stream on every platform. Floats are taken from the top 53
bits of an output. Normal variates use the Box-Muller transform
(cosine branch only, two uniforms per variate).
"""
import math
from typing import MutableSequence

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
FORK = 0xD1B54A32D192ED03

TWO_POW_53 = 2.0 ** -53


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over='ignore'):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
        return z ^ (z >> np.uint64(31))


class SplitMix64(object):
    """
    SplitMix64 generator, see the module docstring for the
    exact state transition.

    :param seed: any integer, reduced modulo 2**64
    """

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def fork(self, key: int) -> 'SplitMix64':
        """
        Derive an independent child stream without advancing this one
        """
        return SplitMix64(mix64(self.state ^ ((key * FORK) & MASK64)))

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def random(self) -> float:
        """
        Uniform float in [0, 1)
        """
        return (self.next_u64() >> 11) * TWO_POW_53

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randint(self, low: int, high: int) -> int:
        """
        Integer in [low, high], both inclusive
        """
        assert high >= low, "empty integer range"
        return low + self.next_u64() % (high - low + 1)

    def choice(self, items):
        return items[self.randint(0, len(items) - 1)]

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        u1 = 1.0 - self.random()
        u2 = self.random()
        return mean + std * math.sqrt(-2.0 * math.log(u1)) * math.cos(
            2.0 * math.pi * u2)

    def shuffle(self, items: MutableSequence):
        """
        In-place Fisher-Yates shuffle
        """
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i)
            items[i], items[j] = items[j], items[i]

    def u64_array(self, n: int) -> np.ndarray:
        """
        The next n outputs as an uint64 array, identical to n calls
        of next_u64
        """
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over='ignore'):
            states = np.uint64(self.state) + steps * np.uint64(GAMMA)
        self.state = (self.state + n * GAMMA) & MASK64
        return _mix64_array(states)

    def random_array(self, n: int) -> np.ndarray:
        return (self.u64_array(n) >> np.uint64(11)).astype(
            np.float64) * TWO_POW_53

    def normal_array(self, shape, std: float = 1.0) -> np.ndarray:
        n = int(np.prod(shape))
        pairs = self.random_array(2 * n).reshape(n, 2)
        u1 = 1.0 - pairs[:, 0]
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * pairs[:, 1])
        return (std * z).reshape(shape)
