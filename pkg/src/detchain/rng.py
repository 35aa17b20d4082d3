"""Deterministic random streams for reproducible, trial-parallel simulation.

Every trial owns a private stream derived from ``(master_seed, stream_id)``
alone, so a run can be split across any number of workers and still produce
the same draws trial by trial. The generator is SplitMix64: the state walks
a fixed odd increment and each output is an avalanche mix of the state.
Stream starting states are themselves avalanche-mixed, which keeps distinct
streams far apart in the state sequence.

This module is the reference definition of the algorithm. The compiled
trial kernel re-implements exactly the same arithmetic (same constants,
same operation order, same libm calls) so that the two lanes produce
bit-identical results; any change here must be mirrored in ``_kernel.pyx``
and ``_kernel_py.py``.
"""

import math

_MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB

# 2^-53: maps the top 53 bits of a u64 onto [0, 1)
_U53 = 1.0 / 9007199254740992.0

_HALF_LN_TWO_PI = 0.9189385332046727
_LOGFACT_TABLE_SIZE = 1024


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a 64-bit avalanche permutation."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK
    return z ^ (z >> 31)


def stream_state(seed: int, stream_id: int) -> int:
    """Starting state of stream ``stream_id`` under ``seed``."""
    return mix64((mix64(seed & _MASK) + (GOLDEN * (stream_id & _MASK))) & _MASK)


def _build_logfact_table():
    table = [0.0] * _LOGFACT_TABLE_SIZE
    acc = 0.0
    for k in range(1, _LOGFACT_TABLE_SIZE):
        acc += math.log(k)
        table[k] = acc
    return table


_LOGFACT = _build_logfact_table()


def log_factorial(k: float) -> float:
    """ln(k!) for integer-valued k >= 0; table below 1024, Stirling above.

    Implemented without ``math.lgamma`` because CPython ships its own lgamma
    while C code gets libm's, and the two can differ in the last bits.
    """
    if k < _LOGFACT_TABLE_SIZE:
        return _LOGFACT[int(k)]
    r = 1.0 / k
    r2 = r * r
    corr = ((1.0 / 12.0) - ((1.0 / 360.0) - (1.0 / 1260.0) * r2) * r2) * r
    return (k + 0.5) * math.log(k) - k + _HALF_LN_TWO_PI + corr


class RandomStream:
    """One independent draw sequence, fully determined by (seed, stream_id)."""

    __slots__ = ("state",)

    def __init__(self, seed: int, stream_id: int = 0):
        self.state = stream_state(seed, stream_id)

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & _MASK
        return mix64(self.state)

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _U53

    def normal(self) -> float:
        """Standard normal via Box-Muller (two uniforms per draw)."""
        u1 = 1.0 - self.uniform()  # (0, 1], keeps log finite
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def poisson(self, lam: float) -> int:
        """Poisson draw; Knuth multiplication below mean 10, PTRS above."""
        if lam <= 0.0:
            return 0
        if lam < 10.0:
            return self._poisson_knuth(lam)
        return self._poisson_ptrs(lam)

    def _poisson_knuth(self, lam: float) -> int:
        limit = math.exp(-lam)
        k = 0
        prod = 1.0
        while True:
            prod *= self.uniform()
            if prod <= limit:
                return k
            k += 1

    def _poisson_ptrs(self, lam: float) -> int:
        # Hoermann's transformed rejection with squeeze, valid for lam >= 10.
        log_lam = math.log(lam)
        b = 0.931 + 2.53 * math.sqrt(lam)
        a = -0.059 + 0.02483 * b
        inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
        v_r = 0.9277 - 3.6224 / (b - 2.0)
        while True:
            u = self.uniform() - 0.5
            v = self.uniform()
            us = 0.5 - abs(u)
            if us <= 0.0:
                continue
            k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
            if us >= 0.07 and v <= v_r:
                return int(k)
            if k < 0.0 or (us < 0.013 and v > us):
                continue
            if v <= 0.0:  # log(v) -> -inf, always accepted
                return int(k)
            lhs = math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
            if lhs <= k * log_lam - lam - log_factorial(k):
                return int(k)


def substream_ids(tag: int, count: int):
    """Reserved stream ids for auxiliary draws (log sampling, noise, ...).

    Trial streams use ids [0, N_s); auxiliary streams live far above any
    realistic trial count.
    """
    base = (1 << 62) + (tag << 32)
    return range(base, base + count)
