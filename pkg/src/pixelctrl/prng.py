"""Splittable counter-based pseudorandom numbers.

Every stochastic event in the engine is a pure function of an explicit
``Key``. Keys can be split into independent streams or perturbed with
``fold_in`` in O(1), with no sequential state anywhere. The block function
is Threefry-2x64 (20 rounds), evaluated in counter mode with vectorized
numpy uint64 arithmetic.

Draws, splits, and fold-ins use disjoint counter domains so a derived key
never collides with the parent's output stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Key",
    "key_from_seed",
    "split",
    "fold_in",
    "random_bits",
    "uniform",
    "normal",
    "random_index",
]

_MASK64 = 0xFFFFFFFFFFFFFFFF

# Threefry-2x64 rotation schedule and key-schedule parity constant.
_ROTATIONS = (16, 42, 12, 31, 16, 32, 24, 21)
_PARITY = 0x1BD11BDAA9FC1FFA

# Fixed root key for seed hashing (first 64 bits of phi and sqrt(3)).
_SEED_KEY = (0x9E3779B97F4A7C15, 0xBB67AE8584CAA73B)

# Counter-word tags separating the three derivation domains.
_TAG_DRAW = 0
_TAG_SPLIT = 1
_TAG_FOLD = 2


@dataclass(frozen=True)
class Key:
    """Opaque 128-bit generator state. A value type: copy freely."""

    hi: int
    lo: int

    def __post_init__(self):
        object.__setattr__(self, "hi", self.hi & _MASK64)
        object.__setattr__(self, "lo", self.lo & _MASK64)


def _threefry2x64(k0: int, k1: int, c0, c1):
    """Threefry-2x64-20 block function over arrays of counters.

    ``c0``/``c1`` are uint64 numpy arrays (broadcastable); returns the two
    output words as uint64 arrays. All arithmetic wraps mod 2^64.
    """
    k0 = np.asarray(k0, dtype=np.uint64)
    k1 = np.asarray(k1, dtype=np.uint64)
    ks = (k0, k1, k0 ^ k1 ^ np.uint64(_PARITY))
    x0 = np.atleast_1d(np.asarray(c0, dtype=np.uint64)) + ks[0]
    x1 = np.atleast_1d(np.asarray(c1, dtype=np.uint64)) + ks[1]
    for r in range(20):
        rot = np.uint64(_ROTATIONS[r % 8])
        x0 = x0 + x1
        x1 = (x1 << rot) | (x1 >> (np.uint64(64) - rot))
        x1 = x1 ^ x0
        if r % 4 == 3:
            j = r // 4 + 1
            x0 = x0 + ks[j % 3]
            x1 = x1 + ks[(j + 1) % 3] + np.uint64(j)
    return x0, x1


def _block(key: Key, c0: int, c1: int) -> tuple[int, int]:
    y0, y1 = _threefry2x64(key.hi, key.lo, np.uint64(c0 & _MASK64), np.uint64(c1))
    return int(y0[0]), int(y1[0])


def key_from_seed(seed: int) -> Key:
    """Deterministically hash a 64-bit seed into a Key."""
    y0, y1 = _threefry2x64(
        _SEED_KEY[0], _SEED_KEY[1], np.uint64(seed & _MASK64), np.uint64(0)
    )
    return Key(int(y0[0]), int(y1[0]))


def split(key: Key, n: int) -> list[Key]:
    """Derive ``n`` pairwise-distinct keys, independent of ``key``'s draws.

    ``split(k, n)[i]`` depends only on ``k`` and ``i``, not on ``n``.
    """
    if n < 1:
        raise ValueError(f"split needs n >= 1, got {n}")
    idx = np.arange(n, dtype=np.uint64)
    y0, y1 = _threefry2x64(key.hi, key.lo, idx, np.full(n, _TAG_SPLIT, np.uint64))
    return [Key(int(a), int(b)) for a, b in zip(y0, y1)]


def fold_in(key: Key, data: int) -> Key:
    """Mix a 64-bit value into a key, yielding a new independent key."""
    y0, y1 = _block(key, data, _TAG_FOLD)
    return Key(y0, y1)


def random_bits(key: Key, n: int) -> np.ndarray:
    """``n`` uniform uint64 words from the key's draw stream."""
    if n < 1:
        raise ValueError(f"random_bits needs n >= 1, got {n}")
    blocks = (n + 1) // 2
    idx = np.arange(blocks, dtype=np.uint64)
    y0, y1 = _threefry2x64(key.hi, key.lo, idx, np.full(blocks, _TAG_DRAW, np.uint64))
    out = np.empty(2 * blocks, dtype=np.uint64)
    out[0::2] = y0
    out[1::2] = y1
    return out[:n]


def uniform(key: Key, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """``n`` float64 draws uniform on [lo, hi).

    The 53-bit mantissa comes from the high bits of each 64-bit word.
    """
    if not lo < hi:
        raise ValueError(f"uniform needs lo < hi, got [{lo}, {hi})")
    bits = random_bits(key, n)
    u = (bits >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
    vals = lo + u * (hi - lo)
    # Guard against rounding up to hi for extreme ranges.
    return np.minimum(vals, np.nextafter(hi, -np.inf))


def normal(key: Key, n: int) -> np.ndarray:
    """``n`` standard-normal float64 draws (Box-Muller)."""
    if n < 1:
        raise ValueError(f"normal needs n >= 1, got {n}")
    m = (n + 1) // 2
    bits = random_bits(key, 2 * m)
    # u1 in (0, 1] so log is finite; u2 in [0, 1).
    u1 = ((bits[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)
    u2 = (bits[m:] >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * m, dtype=np.float64)
    out[:m] = r * np.cos(theta)
    out[m:] = r * np.sin(theta)
    return out[:n]


def random_index(key: Key, n: int) -> int:
    """One uniform index in [0, n)."""
    if n < 1:
        raise ValueError(f"random_index needs n >= 1, got {n}")
    word = int(random_bits(key, 1)[0])
    # Multiply-shift map of a 64-bit word onto [0, n); bias is O(n / 2^64).
    return (word * n) >> 64


# --------------------------------------------------------------------------
# batched key derivation (hot paths that derive one key per environment)


def fold_in_many(key: Key, data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized fold_in: element i equals fold_in(key, data[i])."""
    data = np.asarray(data, dtype=np.uint64)
    return _threefry2x64(key.hi, key.lo, data, np.full(data.shape, _TAG_FOLD, np.uint64))


def words_per_key(hi: np.ndarray, lo: np.ndarray, block: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw-stream block ``block`` for an array of keys (two words per key)."""
    hi = np.asarray(hi, dtype=np.uint64)
    c0 = np.full(hi.shape, block, np.uint64)
    return _threefry2x64(hi, lo, c0, np.full(hi.shape, _TAG_DRAW, np.uint64))


def index_from_words(words: np.ndarray, n: int) -> np.ndarray:
    """Vectorized multiply-shift of 64-bit words onto [0, n).

    Matches ``random_index`` exactly: floor(word * n / 2^64), computed in
    32-bit halves to stay inside uint64 (requires n < 2^32).
    """
    if not 1 <= n < 2**32:
        raise ValueError(f"n must be in [1, 2^32), got {n}")
    w = np.asarray(words, dtype=np.uint64)
    un = np.uint64(n)
    w_hi = w >> np.uint64(32)
    w_lo = w & np.uint64(0xFFFFFFFF)
    return ((w_hi * un + ((w_lo * un) >> np.uint64(32))) >> np.uint64(32)).astype(np.int64)
