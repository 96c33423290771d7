"""Map detected binary words onto valid codewords.

``correct_greedy`` is the production corrector: one left-to-right pass that
keeps the earliest feasible 1-bit and blanks the ``i`` positions after it.
``viterbi_correct`` is a reference add-compare-select decoder on the
(i, inf)-RLL trellis whose tie-break policy is selectable; with ``"last"``
it reproduces the greedy output bit for bit.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .bits import as_bits, pack, unpack
from .codebook import Codebook

TIE_POLICIES = ("first", "last", "random")


def correct_greedy(y: Sequence[int], i: int) -> list[int]:
    """Nearest (Hamming) word with ``i`` leading zeros and 1-runs spaced by ``i`` zeros.

    Reads each position of ``y`` exactly once.
    """
    out = []
    skip = i
    for bit in y:
        if skip > 0:
            out.append(0)
            skip -= 1
        elif bit:
            out.append(1)
            skip = i
        else:
            out.append(0)
    return out


def correct_greedy_batch(words: np.ndarray, i: int) -> np.ndarray:
    """Row-wise :func:`correct_greedy` on a ``(count, n)`` bit matrix."""
    y = np.asarray(words, dtype=np.uint8)
    out = np.zeros_like(y)
    skip = np.full(y.shape[0], i, dtype=np.int64)
    for t in range(y.shape[1]):
        keep = (skip == 0) & (y[:, t] == 1)
        out[:, t] = keep
        skip = np.where(keep, i, np.maximum(skip - 1, 0))
    return out


def _check_policy(policy: str) -> None:
    if policy not in TIE_POLICIES:
        raise ValueError(f"tie-break policy must be one of {TIE_POLICIES}, got {policy!r}")


def viterbi_correct_batch(words: np.ndarray, i: int, policy: str = "last", rng=None) -> np.ndarray:
    """Hard-decision Viterbi on the RLL trellis, one row per word.

    States are 0..i; state 0 is entered only by a 1-labelled edge from
    state i, state s in 1..i-1 only from s-1, and state i from i-1 or from
    itself.  Ties can therefore occur only into state i and at termination.

    ``first`` keeps the lower-numbered predecessor (i-1) and the smallest
    terminal state; ``last`` keeps the self-loop and the largest terminal
    state; ``random`` draws uniformly from ``rng``, consuming draws per tie
    in time order (rows in order within a step), then for terminal ties.
    """
    _check_policy(policy)
    if policy == "random" and rng is None:
        raise ValueError("random tie-break needs a generator")
    y = np.asarray(words, dtype=np.int32)
    count, n = y.shape
    big = n + 1
    metric = np.full((count, i + 1), big, dtype=np.int32)
    metric[:, 0] = 0
    from_self = np.zeros((n, count), dtype=bool)  # back-pointer into state i
    for t in range(n):
        c0 = y[:, t]
        c1 = 1 - c0
        new = np.empty_like(metric)
        new[:, 0] = metric[:, i] + c1
        new[:, 1:i] = metric[:, 0 : i - 1] + c0[:, None]
        via_prev = metric[:, i - 1]
        via_self = metric[:, i]
        take_self = via_self < via_prev
        tie = (via_self == via_prev) & (via_self < big)
        if policy == "last":
            take_self |= tie
        elif policy == "random" and tie.any():
            idx = np.flatnonzero(tie)
            take_self[idx] = rng.random(idx.size) < 0.5
        from_self[t] = take_self
        new[:, i] = np.where(take_self, via_self, via_prev) + c0
        metric = np.minimum(new, big)

    best = metric.min(axis=1)
    tied = metric == best[:, None]
    if policy == "first":
        state = tied.argmax(axis=1)
    elif policy == "last":
        state = i - tied[:, ::-1].argmax(axis=1)
    else:
        state = tied.argmax(axis=1)
        n_tied = tied.sum(axis=1)
        multi = np.flatnonzero(n_tied > 1)
        if multi.size:
            pick = rng.integers(0, n_tied[multi])
            rank = np.cumsum(tied[multi], axis=1) - 1
            state[multi] = (tied[multi] & (rank == pick[:, None])).argmax(axis=1)

    out = np.zeros((count, n), dtype=np.uint8)
    for t in range(n - 1, -1, -1):
        is_zero = state == 0
        out[is_zero, t] = 1
        prev = np.where(is_zero, i, state - 1)
        at_top = state == i
        prev = np.where(at_top & from_self[t], i, prev)
        state = prev
    return out


def viterbi_correct(y, i: int, policy: str = "last", seed: int | None = None, rng=None) -> np.ndarray:
    """Single-word :func:`viterbi_correct_batch`; ``seed`` seeds a private generator."""
    if policy == "random" and rng is None:
        rng = np.random.default_rng(seed)
    return viterbi_correct_batch(as_bits(y)[None, :], i, policy, rng)[0]


def _fallback_value(cb: Codebook) -> int:
    single = 1 << (cb.length - 1 - cb.order)
    # only reachable for non-minimal n where the subset drops that weight-1 word
    return single if single in cb else int(cb.values[0])


def project_values(values, cb: Codebook) -> np.ndarray:
    """Clear rightmost 1-bits until each word is a member of ``cb``."""
    v = np.array(values, dtype=np.uint64, copy=True)
    pending = ~cb.contains(v)
    while pending.any():
        live = pending & (v != 0)
        v[live] &= v[live] - np.uint64(1)
        pending = ~cb.contains(v)
        stuck = pending & (v == 0)
        if stuck.any():
            v[stuck] = _fallback_value(cb)
            pending &= ~stuck
    return v


def project_to_codebook(x, cb: Codebook) -> np.ndarray:
    bits = as_bits(x)
    return unpack(project_values(pack(bits)[None], cb)[0], cb.length)
