"""Closed-form static threshold from a two-Gaussian model of detected counts.

Counts of transmitted 1-bits are modelled as N(C, D) and counts of
unforced 0-bits ("zero-hat": a 0 past the leading zeros with no 1 in the
preceding ``i`` slots) as N(A, B).  The threshold maximising the chance of
a correct slot decision solves a quadratic between the two means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bits import unpack
from .channel import ChannelParams, q_function
from .codebook import Codebook

HISTORY_TERMS = 3


class NoInteriorOptimum(ArithmeticError):
    """The success probability has no usable (real, non-negative) stationary point."""


@dataclass(frozen=True)
class SymbolClassProbs:
    ones: int
    zero_hats: int
    positions: int

    @property
    def p_one(self) -> float:
        return self.ones / self.positions

    @property
    def p_zero_hat(self) -> float:
        return self.zero_hats / self.positions

    def exact(self) -> tuple[Fraction, Fraction]:
        return Fraction(self.ones, self.positions), Fraction(self.zero_hats, self.positions)


def zero_hat_mask(words: np.ndarray, i: int) -> np.ndarray:
    """True at 0-bits beyond position i with no 1 among the i slots before them."""
    w = np.asarray(words, dtype=bool)
    n = w.shape[-1]
    recent = np.zeros_like(w)
    for lag in range(1, i + 1):
        recent[..., lag:] |= w[..., : n - lag]
    mask = ~w & ~recent
    mask[..., :i] = False
    return mask


def symbol_class_probs(cb: Codebook, i: int | None = None) -> SymbolClassProbs:
    if cb.block_k is None:
        raise ValueError("symbol probabilities need a block codebook")
    i = cb.order if i is None else i
    words = unpack(cb.values, cb.length)
    zero_hats = int(zero_hat_mask(words, i).sum())
    return SymbolClassProbs(cb.total_ones, zero_hats, cb.length * len(cb))


@dataclass(frozen=True)
class ThresholdMoments:
    A: float  # mean of zero-hat counts
    B: float  # variance of zero-hat counts
    C: float  # mean of 1-bit counts
    D: float  # variance of 1-bit counts


def one_taps(i: int, terms: int = HISTORY_TERMS) -> list[int]:
    """1-based tap indices feeding a 1-bit slot: 1, 1+(i+1), 1+2(i+1), ..."""
    return [1 + (i + 1) * (k - 1) for k in range(1, terms + 1)]


def zero_hat_taps(i: int, terms: int = HISTORY_TERMS) -> list[int]:
    return [1 + (i + 1) * k for k in range(1, terms + 1)]


def moments(params: ChannelParams, i: int, terms: int = HISTORY_TERMS) -> ThresholdMoments:
    p = params.coefficients
    need = zero_hat_taps(i, terms)[-1]
    if need > p.size:
        raise ValueError(f"channel memory {p.size} is shorter than tap {need}")
    M = params.M

    def mean_var(taps):
        pj = p[np.asarray(taps) - 1]
        return float((M * pj).sum()), float((M * pj * (1 - pj)).sum()) + params.sigma_n2

    A, B = mean_var(zero_hat_taps(i, terms))
    C, D = mean_var(one_taps(i, terms))
    return ThresholdMoments(A, B, C, D)


def success_probability(tau, m: ThresholdMoments, probs: SymbolClassProbs):
    tau = np.asarray(tau, dtype=float)
    p = (probs.p_zero_hat * (1 - q_function((tau - m.A) / math.sqrt(m.B)))
         + probs.p_one * q_function((tau - m.C) / math.sqrt(m.D)))
    return p if p.ndim else float(p)


def log_ratio(m: ThresholdMoments, probs: SymbolClassProbs) -> float:
    return math.log(math.sqrt(m.D) * probs.p_zero_hat / (math.sqrt(m.B) * probs.p_one))


def estimate_threshold(m: ThresholdMoments, probs: SymbolClassProbs) -> float:
    """Non-negative stationary point of :func:`success_probability` with the larger value."""
    if not (m.B > 0 and m.D > 0):
        raise ValueError("variances must be positive")
    if not m.C > m.A:
        raise NoInteriorOptimum("1-bit mean does not exceed zero-hat mean")
    L = log_ratio(m, probs)
    A, B, C, D = m.A, m.B, m.C, m.D
    if abs(D - B) <= 1e-9 * max(B, D):
        # quadratic term vanishes: 2(BC - AD) tau + (D A^2 - B C^2 - 2 L B D) = 0
        roots = [(D * A * A - B * C * C - 2 * L * B * D) / (2 * (A * D - B * C))]
    else:
        disc = B * D * ((C - A) ** 2 - 2 * (B - D) * L)
        if disc < 0:
            raise NoInteriorOptimum("negative discriminant")
        centre = (D * A - B * C) / (D - B)
        half = math.sqrt(disc) / (D - B)
        roots = [centre + half, centre - half]
    # usually the maximiser sits between the means, but with a heavy 0-hat
    # prior and wide variances it can land just above C
    usable = [t for t in roots if t >= 0]
    if not usable:
        raise NoInteriorOptimum(f"no non-negative stationary point: {roots}")
    return max(usable, key=lambda t: success_probability(t, m, probs))
