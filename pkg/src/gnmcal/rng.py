"""SplitMix64 streams.

The generator is the plain SplitMix64 recurrence: the state advances by the
golden-ratio increment ``0x9E3779B97F4A7C15`` and each output is the state
passed through the standard finalizer

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

with all arithmetic modulo 2**64. A double in [0, 1) is ``(z >> 11) * 2**-53``.
Independent sub-streams are derived with :meth:`SplitMix64.spawn`, which seeds
a child from one output of the parent mixed with the stream key. The whole
scheme is small enough to reproduce bit-for-bit in any language.
"""
import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def mix64(z):
    """SplitMix64 finalizer, vectorized over a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-style 64-bit generator.

    Parameters
    ----------
    seed : int
        Any integer; reduced modulo 2**64.
    """

    def __init__(self, seed):
        self.state = int(seed) & _MASK

    def next_u64(self, size):
        steps = np.arange(1, size + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + steps * GAMMA
        self.state = (self.state + size * int(GAMMA)) & _MASK
        return mix64(states)

    def random(self, size):
        """``size`` doubles uniform on [0, 1)."""
        return (self.next_u64(size) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform(self, low, high, size):
        return low + (high - low) * self.random(size)

    def permutation(self, n):
        """Random permutation of ``range(n)`` (argsort of uniform keys)."""
        keys = self.next_u64(n)
        return np.argsort(keys, kind="stable")

    def spawn(self, key):
        """Child generator for the named integer stream ``key``."""
        base = int(self.next_u64(1)[0])
        with np.errstate(over="ignore"):
            child = mix64(np.uint64(base ^ (int(key) & _MASK)))
        return SplitMix64(int(child))


def stream(seed, *keys):
    """Generator for ``seed`` followed by a chain of sub-stream keys."""
    gen = SplitMix64(seed)
    for key in keys:
        gen = gen.spawn(key)
    return gen
