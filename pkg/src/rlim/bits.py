"""Bit-vector helpers shared across the package.

Convention everywhere: index 0 is the first transmitted bit and the most
significant bit when a word is read as an unsigned integer.
"""

from __future__ import annotations

import numpy as np

MAX_WORD_LENGTH = 64


def as_bits(bits) -> np.ndarray:
    """Coerce a 0/1 sequence (list, array, or ASCII string) to a uint8 array."""
    if isinstance(bits, str):
        s = "".join(bits.split())
        if s and set(s) - {"0", "1"}:
            raise ValueError(f"not a bit string: {bits!r}")
        return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0") if s else np.zeros(0, np.uint8)
    arr = np.asarray(bits)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("bit arrays may only hold 0 and 1")
    return arr.astype(np.uint8)


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits).ravel())


def _powers(n: int) -> np.ndarray:
    if not 0 < n <= MAX_WORD_LENGTH:
        raise ValueError(f"word length must be in 1..{MAX_WORD_LENGTH}, got {n}")
    return np.left_shift(np.uint64(1), np.arange(n - 1, -1, -1, dtype=np.uint64))


def pack(bits) -> np.ndarray:
    """Pack the last axis of a bit array into uint64 values (MSB first)."""
    arr = np.asarray(bits, dtype=np.uint64)
    n = arr.shape[-1]
    return (arr * _powers(n)).sum(axis=-1, dtype=np.uint64)


def unpack(values, n: int) -> np.ndarray:
    """Inverse of :func:`pack`; appends an axis of length ``n``."""
    v = np.asarray(values, dtype=np.uint64)
    return ((v[..., None] & _powers(n)) != 0).astype(np.uint8)


def popcount(values) -> np.ndarray:
    return np.bitwise_count(np.asarray(values, dtype=np.uint64)).astype(np.int64)


def word_to_int(bits) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def int_to_word(value: int, n: int) -> np.ndarray:
    return np.array([(value >> (n - 1 - t)) & 1 for t in range(n)], dtype=np.uint8)
