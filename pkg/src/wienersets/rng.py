"""Counter-based random streams.

Every random number used by the package is addressed by
``(seed, label, index)``.  The label is hashed into the upper half of a
Philox key and the index selects a fixed-size block through the Philox
counter, so a value never depends on which other values were drawn
before it, on the evaluation order, or on the number of worker threads.
"""
from __future__ import annotations

import hashlib

import numpy as np

BLOCK = 1 << 14
MASK64 = (1 << 64) - 1


def stream_id(*labels) -> int:
    """Stable 64-bit id for a tuple of labels (ints, floats, strings)."""
    h = hashlib.blake2b(repr(labels).encode("utf8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def derive_seed(seed: int, *labels) -> int:
    """Child seed for a sub-experiment, e.g. one Monte Carlo replicate."""
    h = hashlib.blake2b(repr((int(seed) & MASK64,) + labels).encode("utf8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def _generator(seed: int, sid: int, block: int) -> np.random.Generator:
    key = (int(seed) & MASK64) | (sid << 64)
    return np.random.Generator(np.random.Philox(key=key, counter=int(block) << 64))


def _blocks(seed, sid, start, count, draw):
    out = np.empty(count)
    if count == 0:
        return out
    b0 = start // BLOCK
    b1 = (start + count - 1) // BLOCK
    pos = 0
    for b in range(b0, b1 + 1):
        vals = draw(_generator(seed, sid, b))
        lo = max(start - b * BLOCK, 0)
        hi = min(start + count - b * BLOCK, BLOCK)
        out[pos:pos + hi - lo] = vals[lo:hi]
        pos += hi - lo
    return out


def normals(seed: int, labels: tuple, start: int, count: int) -> np.ndarray:
    """Standard normals with indices ``start .. start+count-1`` (start >= 0)."""
    if start < 0:
        raise ValueError("stream indices are nonnegative")
    return _blocks(seed, stream_id(*labels), start, count,
                   lambda g: g.standard_normal(BLOCK))


def uniforms(seed: int, labels: tuple, start: int, count: int) -> np.ndarray:
    """Uniforms on (0, 1) with indices ``start .. start+count-1``."""
    if start < 0:
        raise ValueError("stream indices are nonnegative")
    # 1 - U avoids an exact zero, which matters for -log(U).
    return _blocks(seed, stream_id(*labels), start, count,
                   lambda g: 1.0 - g.random(BLOCK))


def signed_normals(seed: int, labels: tuple, lo: int, hi: int) -> np.ndarray:
    """Normals for integer indices ``lo .. hi-1`` which may be negative.

    Index ``k >= 0`` comes from the stream ``labels + ('+',)`` at position
    ``k``; index ``k < 0`` from ``labels + ('-',)`` at position ``-k-1``.
    The two halves are therefore drawn from disjoint streams.
    """
    out = np.empty(max(hi - lo, 0))
    if hi <= lo:
        return out
    if hi > 0:
        a = max(lo, 0)
        out[a - lo:] = normals(seed, labels + ("+",), a, hi - a)
    if lo < 0:
        b = min(hi, 0)
        # positions -k-1 for k = lo..b-1 run from -lo-1 down to -b
        left = normals(seed, labels + ("-",), -b, b - lo)
        out[:b - lo] = left[::-1]
    return out
