"""Bijective block mapping between k-bit information blocks and a codebook."""

from __future__ import annotations

import numpy as np

from .bits import as_bits, pack, unpack
from .codebook import Codebook


class CodewordNotFound(ValueError):
    """Raised when a word handed to the decoder is not in the codebook."""


def _require_block(cb: Codebook) -> int:
    if cb.block_k is None:
        raise ValueError("codec needs a codebook with block_k set")
    return cb.block_k


def encode(info, cb: Codebook) -> np.ndarray:
    """Map one k-bit block to the codeword at its (MSB-first) index."""
    k = _require_block(cb)
    bits = as_bits(info)
    if bits.shape != (k,):
        raise ValueError(f"expected {k} information bits, got {bits.size}")
    return unpack(cb.values[int(pack(bits))], cb.length)


def decode(cw, cb: Codebook) -> np.ndarray:
    """Binary-search ``cw`` in the codebook and return its index as k bits."""
    k = _require_block(cb)
    bits = as_bits(cw)
    if bits.shape != (cb.length,):
        raise ValueError(f"expected a {cb.length}-bit codeword, got {bits.size}")
    return decode_values(pack(bits)[None], cb)[0]


def decode_values(values, cb: Codebook) -> np.ndarray:
    """Decode packed codewords; returns a ``(len(values), k)`` bit matrix."""
    k = _require_block(cb)
    v = np.asarray(values, dtype=np.uint64)
    idx = np.searchsorted(cb.values, v)
    ok = idx < len(cb)
    ok[ok] = cb.values[idx[ok]] == v[ok]
    if not ok.all():
        bad = int(v[~ok][0])
        raise CodewordNotFound(f"word {bad:0{cb.length}b} is not in the codebook")
    return unpack(idx, k)


def encode_stream(bits, cb: Codebook) -> np.ndarray:
    k = _require_block(cb)
    data = as_bits(bits)
    if data.size % k:
        raise ValueError(f"stream length {data.size} is not a multiple of k={k}")
    if data.size == 0:
        return np.zeros(0, dtype=np.uint8)
    idx = pack(data.reshape(-1, k))
    return unpack(cb.values[idx], cb.length).ravel()


def decode_stream(bits, cb: Codebook) -> np.ndarray:
    _require_block(cb)
    data = as_bits(bits)
    n = cb.length
    if data.size % n:
        raise ValueError(f"stream length {data.size} is not a multiple of n={n}")
    if data.size == 0:
        return np.zeros(0, dtype=np.uint8)
    return decode_values(pack(data.reshape(-1, n)), cb).ravel()
