"""Deterministic 64-bit RNG used by the harness.

The generator is the splitmix64 sequence: state advances by the additive
constant 0x9E3779B97F4A7C15 and each output is finalized with the
xor-shift/multiply steps (shifts 30/27/31, multipliers 0xBF58476D1CE4E5B9
and 0x94D049BB133111EB).  Other-language ports can reproduce workloads
exactly from these constants.
"""

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed):
        self.state = seed & _MASK

    def next_u64(self):
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MUL1) & _MASK
        z = ((z ^ (z >> 27)) * _MUL2) & _MASK
        return z ^ (z >> 31)

    def uniform(self, lo=0.0, hi=1.0):
        # 53-bit mantissa; in [lo, hi)
        u = self.next_u64() >> 11
        return lo + (hi - lo) * (u * (2.0 ** -53))

    def log_uniform(self, lo, hi):
        import math

        return math.exp(self.uniform(math.log(lo), math.log(hi)))

    def randint(self, n):
        # in [0, n); modulo bias is irrelevant for workload generation and
        # keeps the sequence trivially portable
        return self.next_u64() % n

    def chance(self, p):
        return self.uniform() < p

    def fork(self):
        """Derive an independent child generator (consumes one output)."""
        return SplitMix64(self.next_u64())
