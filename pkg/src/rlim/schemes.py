"""Coding schemes compared in the experiments and their receive chains."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import corrector, detector
from .bits import as_bits, pack, unpack
from .channel import SchemeStats
from .codebook import Codebook, build_block_codebook
from .codec import decode_values, encode_stream

DECODERS = ("greedy", "viterbi-first", "viterbi-last", "viterbi-random")

# systematic-position Hamming(7,4): codeword p1 p2 d1 p3 d2 d3 d4
_G = np.array([
    [1, 1, 1, 0, 0, 0, 0],
    [1, 0, 0, 1, 1, 0, 0],
    [0, 1, 0, 1, 0, 1, 0],
    [1, 1, 0, 1, 0, 0, 1],
], dtype=np.uint8)
_H = np.array([
    [1, 0, 1, 0, 1, 0, 1],
    [0, 1, 1, 0, 0, 1, 1],
    [0, 0, 0, 1, 1, 1, 1],
], dtype=np.uint8)
_DATA_POS = [2, 4, 5, 6]


def hamming74_encode(data) -> np.ndarray:
    """Encode 4 bits (or a ``(..., 4)`` array) to 7-bit codewords."""
    d = as_bits(data)
    return (d @ _G % 2).astype(np.uint8)


def hamming74_decode(word) -> np.ndarray:
    """Correct up to one flipped bit and return the 4 data bits."""
    w = as_bits(word).copy()
    syndrome = (w @ _H.T % 2).astype(np.int64)
    pos = syndrome @ np.array([1, 2, 4]) - 1  # 1-based error position, -1 = clean
    flip = pos >= 0
    if w.ndim == 1:
        if flip:
            w[pos] ^= 1
    else:
        rows = np.flatnonzero(flip)
        w[rows, pos[rows]] ^= 1
    return w[..., _DATA_POS]


class NotImplementedScheme(NotImplementedError):
    pass


@dataclass(frozen=True)
class Scheme:
    """A block scheme mapping k information bits to n channel bits."""

    name: str
    kind: str  # uncoded | hamming | rlim | rll
    k: int
    n: int
    order: int = 0
    codebook: Codebook | None = field(default=None, compare=False, repr=False)

    @property
    def ones_total(self) -> int:
        if self.kind == "uncoded":
            return self.k * 2 ** (self.k - 1)
        if self.kind == "hamming":
            # every non-zero Hamming coordinate is 1 in half the codewords
            return self.n * 2 ** (self.k - 1)
        return self.codebook.total_ones

    @property
    def stats(self) -> SchemeStats:
        return SchemeStats.block(self.n, self.k, self.ones_total)

    @property
    def has_one_guarantee(self) -> bool:
        return self.kind == "rlim"

    def encode(self, info) -> np.ndarray:
        bits = as_bits(info)
        if bits.size % self.k:
            raise ValueError(f"{bits.size} bits is not a multiple of k={self.k}")
        if self.kind == "uncoded":
            return bits.copy()
        if self.kind == "hamming":
            return hamming74_encode(bits.reshape(-1, 4)).ravel()
        return encode_stream(bits, self.codebook)

    def finish(self, detected: np.ndarray, decoder: str = "greedy", rng=None) -> np.ndarray:
        """Detected channel bits (flat) to decoded information bits (flat)."""
        if self.kind == "uncoded":
            return detected.astype(np.uint8)
        if self.kind == "hamming":
            return hamming74_decode(detected.reshape(-1, 7)).ravel()
        words = detected.reshape(-1, self.n)
        if decoder == "greedy":
            fixed = corrector.correct_greedy_batch(words, self.order)
        elif decoder.startswith("viterbi-"):
            fixed = corrector.viterbi_correct_batch(words, self.order, decoder.split("-", 1)[1], rng)
        else:
            raise ValueError(f"unknown decoder {decoder!r}; choose from {DECODERS}")
        values = corrector.project_values(pack(fixed), self.codebook)
        return decode_values(values, self.codebook).ravel()

    def detect(self, counts: np.ndarray, mode: str, params) -> np.ndarray:
        """Channel-bit decisions for a flat count stream."""
        if mode in ("static", "estimated"):
            if self.kind == "rlim":
                return detector.detect_static(counts.reshape(-1, self.n), params, self.order).ravel()
            return detector.detect_threshold(counts, params)
        if mode == "adaptive":
            if self.kind != "rlim":
                raise ValueError("adaptive detection needs the one-1-bit guarantee of RLIM codes")
            return detector.detect_adaptive(counts.reshape(-1, self.n), params, self.order).ravel()
        if mode == "baseline":
            a, floor, spacing = params
            return detector.detect_baseline_dynamic(counts, a, floor, spacing)
        raise ValueError(f"unknown detection mode {mode!r}")

    def receive(self, counts, mode: str, params, decoder: str = "greedy", rng=None) -> np.ndarray:
        counts = np.asarray(counts, dtype=float)
        if counts.size % self.n:
            raise ValueError(f"{counts.size} counts do not split into {self.n}-slot codewords")
        return self.finish(self.detect(counts, mode, params), decoder, rng)

    def dynamic_mode(self) -> str:
        return "adaptive" if self.kind == "rlim" else "baseline"

    def spacing_grid(self) -> tuple[int, ...]:
        if self.kind == "rll":
            return (self.n,)
        return tuple(s for s in range(4, self.n + 1) if self.n % s == 0 and (self.n // s) <= 4)


@lru_cache(maxsize=None)
def _block_codebook(order: int, k: int, rll: bool) -> Codebook:
    return build_block_codebook(order, k, rll=rll)


_NAME = re.compile(r"^(rlim|rll)(\d+)$")


def get_scheme(name: str, k: int = 16) -> Scheme:
    """Look up a scheme by name: uncoded, hamming74, rlim<i>, rll<i>."""
    key = name.lower().replace("_", "").replace("-", "")
    if key == "uncoded":
        return Scheme("uncoded", "uncoded", k, k)
    if key in ("hamming74", "hamming", "hamming47"):
        if k % 4:
            raise ValueError("Hamming(7,4) needs k divisible by 4")
        return Scheme("hamming74", "hamming", k, 7 * k // 4)
    if key in ("isifree", "isifree421"):
        raise NotImplementedScheme(
            "ISI-Free(4,2,1) is not implemented: its construction is only given in the cited ISI-free code reference"
        )
    m = _NAME.match(key)
    if m:
        kind, order = m.group(1), int(m.group(2))
        cb = _block_codebook(order, k, kind == "rll")
        return Scheme(f"{kind}{order}", kind, k, cb.length, order, cb)
    raise ValueError(f"unknown scheme {name!r}")


def hamming_codewords() -> np.ndarray:
    return hamming74_encode(unpack(np.arange(16), 4))
