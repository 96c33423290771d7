"""Codebook construction for RLIM and classical (i, inf)-RLL block codes.

Codewords are stored as MSB-first unsigned integers in a sorted uint64
array, so membership tests and decoding are plain binary searches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .bits import MAX_WORD_LENGTH, pack, popcount, unpack


@dataclass(frozen=True, eq=False)
class Codebook:
    """Sorted set of fixed-length binary codewords.

    ``kind`` is ``"rlim"`` (i leading zeros, at least one 1-bit) or ``"rll"``
    (same run-length constraint, all-zero word admitted).
    """

    values: np.ndarray
    order: int
    length: int
    block_k: int | None = None
    kind: str = "rlim"
    total_ones: int = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.uint64)
        if v.size > 1 and not (v[1:] > v[:-1]).all():
            raise ValueError("codewords must be strictly ascending")
        if self.block_k is not None and v.size != 2**self.block_k:
            raise ValueError(f"a k={self.block_k} codebook needs {2**self.block_k} words, got {v.size}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "total_ones", int(np.bitwise_count(v).sum(dtype=np.int64)))

    def __len__(self) -> int:
        return int(self.values.size)

    def __contains__(self, word) -> bool:
        value = int(word) if np.isscalar(word) else int(pack(word))
        idx = int(np.searchsorted(self.values, np.uint64(value)))
        return idx < len(self) and int(self.values[idx]) == value

    def contains(self, values) -> np.ndarray:
        """Vectorised membership test for packed words."""
        v = np.asarray(values, dtype=np.uint64)
        idx = np.minimum(np.searchsorted(self.values, v), len(self) - 1)
        return self.values[idx] == v

    @property
    def codewords(self) -> np.ndarray:
        """Codewords as a ``(size, n)`` uint8 bit matrix."""
        return unpack(self.values, self.length)

    @property
    def rate(self) -> float:
        if self.block_k is None:
            raise ValueError("rate is defined only for a block codebook")
        return self.block_k / self.length

    def header(self) -> str:
        tag = "RLIM" if self.kind == "rlim" else "RLL"
        k = "-" if self.block_k is None else self.block_k
        return f"{tag} i={self.order} n={self.length} k={k} ones={self.total_ones}"

    def save(self, path) -> None:
        lines = [self.header()]
        lines += ["".join(map(str, row)) for row in self.codewords]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Codebook":
        lines = Path(path).read_text().split()
        tag, *fields = lines[0:5]
        meta = dict(f.split("=", 1) for f in fields)
        if tag not in ("RLIM", "RLL"):
            raise ValueError(f"unrecognised codebook header {lines[0]!r}")
        n = int(meta["n"])
        words = lines[5:]
        if any(len(w) != n for w in words):
            raise ValueError("codeword length does not match header")
        bits = np.array([[c == "1" for c in w] for w in words], dtype=np.uint8).reshape(-1, n)
        cb = cls(
            pack(bits),
            order=int(meta["i"]),
            length=n,
            block_k=None if meta["k"] == "-" else int(meta["k"]),
            kind=tag.lower(),
        )
        if cb.total_ones != int(meta["ones"]):
            raise ValueError("ones count in header does not match codewords")
        return cb


def _check_order(i: int) -> None:
    if i < 1:
        raise ValueError(f"order must be >= 1, got {i}")


def count_d_limited(i: int, n: int) -> int:
    """Number of length-n words in which every 1 is followed by min(i, rest) zeros."""
    _check_order(i)
    if n < 0 or n > MAX_WORD_LENGTH:
        raise ValueError(f"length must be in 0..{MAX_WORD_LENGTH}, got {n}")
    if n <= i + 1:
        return n + 1
    counts = [j + 1 for j in range(i + 2)]
    for m in range(i + 2, n + 1):
        counts.append(counts[m - 1] + counts[m - 1 - i])
    return counts[n]


def d_limited_words(i: int, n: int) -> np.ndarray:
    """All words of C_i(n) as sorted packed integers."""
    _check_order(i)
    if n > MAX_WORD_LENGTH:
        raise ValueError(f"length must be <= {MAX_WORD_LENGTH}")
    # rolling window of C_i(m-1-i) .. C_i(m-1); C_i(m <= 0) is the empty word
    levels = [np.zeros(1, dtype=np.uint64)] * (i + 1)
    for m in range(1, n + 1):
        prev, tail = levels[-1], levels[0]
        out = np.empty(prev.size + tail.size, dtype=np.uint64)
        out[: prev.size] = prev
        np.bitwise_or(tail, np.uint64(1) << np.uint64(m - 1), out=out[prev.size :])
        levels = levels[1:] + [out]
    return levels[-1]


def _leading_zero_words(i: int, n: int) -> np.ndarray:
    _check_order(i)
    if n <= i:
        raise ValueError(f"no codeword of length {n} exists for order {i}")
    return d_limited_words(i, n - i)


def generate_rlim(i: int, n: int) -> Codebook:
    """Full RLIM_i(n): i leading zeros, run-length constraint, at least one 1."""
    words = _leading_zero_words(i, n)
    return Codebook(words[1:], order=i, length=n, kind="rlim")


def generate_rll(i: int, n: int) -> Codebook:
    """Classical (i, inf)-RLL words with i leading zeros, zero word included."""
    return Codebook(_leading_zero_words(i, n), order=i, length=n, kind="rll")


def select_min_weight_subset(cb: Codebook, k: int, policy: str = "min-weight") -> Codebook:
    """Pick 2**k codewords of ``cb``.

    ``min-weight`` takes whole weight classes from the lightest up and, in
    the boundary class, the numerically smallest words.  ``lexicographic``
    takes the 2**k numerically smallest words.
    """
    size = 2**k
    if len(cb) < size:
        raise ValueError(f"codebook has {len(cb)} words, need {size}")
    if policy == "lexicographic":
        chosen = cb.values[:size]
    elif policy == "min-weight":
        order = np.lexsort((cb.values, popcount(cb.values)))
        chosen = np.sort(cb.values[order[:size]])
    else:
        raise ValueError(f"unknown selection policy {policy!r}")
    return Codebook(chosen, order=cb.order, length=cb.length, block_k=k, kind=cb.kind)


def build_block_codebook(i: int, k: int, n: int | None = None, rll: bool = False) -> Codebook:
    """RLIM_i(n, k) (min-weight) or the lexicographic RLL_i(n, k) baseline."""
    if n is None:
        n = min_length_for_block(i, k)
    if rll:
        return select_min_weight_subset(generate_rll(i, n), k, policy="lexicographic")
    return select_min_weight_subset(generate_rlim(i, n), k, policy="min-weight")


def min_length_for_block(i: int, k: int) -> int:
    """Smallest n with |RLIM_i(n)| >= 2**k."""
    _check_order(i)
    if k < 1:
        raise ValueError("block length must be >= 1")
    n = i + 1
    while count_d_limited(i, n - i) - 1 < 2**k:
        n += 1
    return n


def shannon_capacity(i: int) -> tuple[float, float]:
    """Perron root of x**(i+1) = x**i + 1 and the capacity log2 of it."""
    _check_order(i)
    root = brentq(lambda x: x ** (i + 1) - x**i - 1, 1.0, 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return root, math.log2(root)
