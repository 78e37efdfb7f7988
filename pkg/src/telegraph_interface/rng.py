"""Counter-based random numbers: Philox4x32-10, vectorised over counters.

Every draw is a pure function of (seed, particle index, event index, stream),
so results do not depend on how particles are batched or threaded.
numpy ships Philox only as a sequential bit generator with one key, which
cannot be evaluated for many independent counters at once.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

STREAM_EVENTS = 0
STREAM_INIT = 1


def philox4x32(c0, c1, c2, c3, k0, k1, rounds: int = 10):
    """Philox4x32 bijection; all arguments broadcast as uint32 arrays."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint32) for c in (c0, c1, c2, c3))
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint32(k0)
    k1 = np.uint32(k1)
    with np.errstate(over="ignore"):
        for _ in range(rounds):
            prod0 = c0.astype(np.uint64) * _M0
            prod1 = c2.astype(np.uint64) * _M1
            hi0 = (prod0 >> _SHIFT32).astype(np.uint32)
            lo0 = (prod0 & _MASK32).astype(np.uint32)
            hi1 = (prod1 >> _SHIFT32).astype(np.uint32)
            lo1 = (prod1 & _MASK32).astype(np.uint32)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
            k0 = np.uint32(k0 + _W0)
            k1 = np.uint32(k1 + _W1)
    return c0, c1, c2, c3


def _to_open_unit(hi, lo):
    """53-bit uniform in the open interval (0, 1)."""
    bits = (hi.astype(np.uint64) << np.uint64(21)) ^ (lo.astype(np.uint64) >> np.uint64(11))
    bits &= np.uint64((1 << 53) - 1)
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


def uniform_pair(seed: int, particle, event, stream: int = STREAM_EVENTS):
    """Two independent uniforms in (0, 1) per (particle, event) counter."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    particle = np.asarray(particle, dtype=np.uint64)
    event = np.asarray(event, dtype=np.uint64)
    c0 = (particle & _MASK32).astype(np.uint32)
    c1 = (particle >> _SHIFT32).astype(np.uint32)
    c2 = (event & _MASK32).astype(np.uint32)
    c3 = np.uint32(stream)
    r0, r1, r2, r3 = philox4x32(c0, c1, c2, c3, seed & 0xFFFFFFFF, seed >> 32)
    return _to_open_unit(r0, r1), _to_open_unit(r2, r3)


class ParticleStream:
    """Sequential view of one particle's stream, for scalar simulation."""

    def __init__(self, seed: int, particle: int):
        self.seed = seed
        self.particle = particle
        self.event = 0

    def next_pair(self) -> tuple[float, float]:
        a, b = uniform_pair(self.seed, self.particle, self.event)
        self.event += 1
        return float(a), float(b)

    def init_pair(self) -> tuple[float, float]:
        a, b = uniform_pair(self.seed, self.particle, 0, STREAM_INIT)
        return float(a), float(b)
