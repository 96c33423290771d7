"""Turn per-interval molecule counts into bit decisions, and tune detectors on pilots.

All detectors accept either one count window of length n or a ``(words, n)``
matrix of windows and return bits of the same shape.  Counts are compared
raw: Gaussian counting noise can push them negative and nothing is clipped.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

ADAPTIVE_STEP = 0.005


def _windows(m) -> tuple[np.ndarray, bool]:
    arr = np.asarray(m, dtype=float)
    return np.atleast_2d(arr), arr.ndim == 1


def _out(bits: np.ndarray, single: bool) -> np.ndarray:
    return bits[0] if single else bits


def detect_threshold(m, tau: float) -> np.ndarray:
    """Plain static threshold: 1 iff count >= tau."""
    return (np.asarray(m, dtype=float) >= tau).astype(np.uint8)


def _guard_one_bit(bits: np.ndarray, counts: np.ndarray, i: int) -> None:
    """Force a 1 at the argmax of positions > i where none was detected.

    argmax picks the first maximum, so an all-zero window lands on position
    i+1 (1-indexed), which is the documented all-zero fallback.
    """
    empty = ~bits[:, i:].any(axis=1)
    if empty.any():
        rows = np.flatnonzero(empty)
        bits[rows, i + counts[rows, i:].argmax(axis=1)] = 1


def detect_static(m, tau: float, i: int) -> np.ndarray:
    counts, single = _windows(m)
    if counts.shape[1] <= i:
        raise ValueError(f"window length {counts.shape[1]} must exceed order {i}")
    bits = (counts >= tau).astype(np.uint8)
    _guard_one_bit(bits, counts, i)
    return _out(bits, single)


def adaptive_threshold(m, a: float, i: int) -> np.ndarray:
    counts, single = _windows(m)
    tail = counts[:, i:]
    tau = a * tail.min(axis=1) + (1 - a) * tail.max(axis=1)
    return tau[0] if single else tau


def detect_adaptive(m, a: float, i: int) -> np.ndarray:
    """Per-window threshold a*min + (1-a)*max over positions i+1..n."""
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"scaling constant must lie in [0, 1], got {a}")
    counts, single = _windows(m)
    if counts.shape[1] <= i:
        raise ValueError(f"window length {counts.shape[1]} must exceed order {i}")
    tau = np.atleast_1d(adaptive_threshold(counts, a, i))
    bits = (counts >= tau[:, None]).astype(np.uint8)
    # a*min + (1-a)*max can round just above max in floating point
    tail = counts[:, i:]
    bits[:, i:] |= (tail == tail.max(axis=1, keepdims=True)).astype(np.uint8)
    return _out(bits, single)


def detect_baseline_dynamic(m, a: float, floor: float, spacing: int) -> np.ndarray:
    """Windowed dynamic threshold for schemes that may send all-zero words.

    The count stream is cut into ``spacing``-long windows; a window whose
    maximum is below ``floor`` decodes to zeros, otherwise the adaptive rule
    is applied over the whole window.
    """
    counts = np.asarray(m, dtype=float)
    if spacing < 1 or counts.size % spacing:
        raise ValueError(f"stream of {counts.size} counts does not split into windows of {spacing}")
    w = counts.reshape(-1, spacing)
    hi = w.max(axis=1)
    tau = a * w.min(axis=1) + (1 - a) * hi
    bits = (w >= tau[:, None]) | (w == hi[:, None])
    bits &= (hi >= floor)[:, None]
    return bits.astype(np.uint8).reshape(counts.shape)


@dataclass(frozen=True)
class TuneResult:
    """Outcome of a pilot grid search; ``bers`` is aligned with ``grid``."""

    best: object
    ber: float
    grid: tuple
    bers: tuple


def grid_search(grid: Sequence, ber_of: Callable[[object], float]) -> TuneResult:
    """Evaluate every grid point and keep the first minimiser."""
    if not len(grid):
        raise ValueError("empty tuning grid")
    bers = [float(ber_of(g)) for g in grid]
    j = int(np.argmin(bers))
    return TuneResult(grid[j], bers[j], tuple(grid), tuple(bers))


def pilot_ber(pilots, truths, receive: Callable, params) -> float:
    """Bit error rate of ``receive(counts, params)`` summed over pilot runs."""
    errors = bits = 0
    for counts, truth in zip(pilots, truths):
        decoded = receive(counts, params)
        truth = np.asarray(truth)
        errors += int(np.count_nonzero(decoded != truth))
        bits += truth.size
    return errors / bits


def _check_pilot(pilots, truths) -> None:
    if not len(pilots) or len(pilots) != len(truths):
        raise ValueError("pilot counts and truth must be non-empty and paired")


def tune_static(pilots, truths, receive: Callable, m_norm: int) -> TuneResult:
    """Try integer thresholds 1..m_norm; ties resolve to the smallest."""
    _check_pilot(pilots, truths)
    grid = tuple(range(1, max(int(m_norm), 1) + 1))
    return grid_search(grid, lambda tau: pilot_ber(pilots, truths, receive, tau))


def adaptive_grid(step: float = ADAPTIVE_STEP) -> tuple[float, ...]:
    count = int(round(1.0 / step))
    return tuple(round(j * step, 10) for j in range(count + 1))


def tune_adaptive(pilots, truths, receive: Callable, step: float = ADAPTIVE_STEP) -> TuneResult:
    _check_pilot(pilots, truths)
    return grid_search(adaptive_grid(step), lambda a: pilot_ber(pilots, truths, receive, a))


def tune_baseline(pilots, truths, receive: Callable, floors: Sequence[float], spacings: Sequence[int],
                  step: float = ADAPTIVE_STEP) -> TuneResult:
    """Grid over (a, floor, spacing); ``receive`` gets the triple as params."""
    _check_pilot(pilots, truths)
    grid = tuple((a, f, s) for s in spacings for f in floors for a in adaptive_grid(step))
    return grid_search(grid, lambda p: pilot_ber(pilots, truths, receive, p))
