"""SplitMix64 streams.

Every random quantity in the package comes from a :class:`SplitMix64`
stream so instances, graphs and sample sequences are reproducible from a
single 64-bit seed, independently of numpy's generator versions.

Derived streams are keyed by a domain tag and an index::

    stream(seed, INSTANCE, i)   # draws for agent i's cost/coupling data
    stream(seed, GRAPH)         # edge draws
    stream(seed, ORACLE, i)     # agent i's sample locations

The child seed is the first SplitMix64 output of
``seed ^ (tag * 0xD1B54A32D192ED03) ^ ((index + 1) * 0x9E3779B97F4A7C15)``.
"""
import math

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

INSTANCE = 1
GRAPH = 2
ORACLE = 3


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def random(self):
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, lo=0.0, hi=1.0):
        return lo + (hi - lo) * self.random()

    def normal(self):
        # Box-Muller, one variate per call; 1 - u keeps the log argument in (0, 1]
        u1 = 1.0 - self.random()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def copy(self):
        return SplitMix64(self.state)

    def __eq__(self, other):
        return isinstance(other, SplitMix64) and other.state == self.state

    def __repr__(self):
        return f"SplitMix64(state={self.state:#018x})"


def stream(seed, tag, index=0):
    mixed = (int(seed) ^ ((tag * 0xD1B54A32D192ED03) & MASK64) ^ (((index + 1) * GOLDEN) & MASK64)) & MASK64
    return SplitMix64(SplitMix64(mixed).next_u64())
