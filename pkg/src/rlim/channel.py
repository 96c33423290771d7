"""Diffusion channel with a fully absorbing spherical receiver.

Counts for a contiguous BCSK bit stream are drawn either as a sum of
binomials over the last ``L`` emissions or from the matching Gaussian
approximation.  Both add N(0, sigma_n2) counting noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.special import erfc

from .bits import as_bits

# bounds memory of the (ones x taps) binomial draw matrix
_BINOMIAL_CHUNK = 4096


def q_function(x):
    """Standard normal upper tail."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


@dataclass(frozen=True)
class ChannelParams:
    """Physical channel. Lengths in um, time in s, D in um^2/s.

    ``taps`` overrides the coefficients derived from the geometry, which is
    handy for idealised test channels.
    """

    D: float = 79.4
    r_R: float = 5.0
    r_0: float = 10.0
    t_s: float = 0.2
    M: int = 1000
    sigma_n2: float = 0.0
    L: int = 200
    taps: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.taps is None:
            if not (self.r_0 > self.r_R > 0):
                raise ValueError("need r_0 > r_R > 0")
            if self.D <= 0 or self.t_s <= 0:
                raise ValueError("D and t_s must be positive")
        if self.sigma_n2 < 0:
            raise ValueError("noise variance must be non-negative")
        if self.L < 1:
            raise ValueError("channel memory must be >= 1")
        if self.M < 0:
            raise ValueError("molecule count must be non-negative")

    @cached_property
    def coefficients(self) -> np.ndarray:
        if self.taps is not None:
            p = np.zeros(self.L)
            given = np.asarray(self.taps, dtype=float)[: self.L]
            p[: given.size] = given
        else:
            p = channel_coefficients(self)
        p.setflags(write=False)
        return p

    def with_(self, **changes) -> "ChannelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {
            "D": self.D, "r_R": self.r_R, "r_0": self.r_0, "t_s": self.t_s,
            "M": self.M, "sigma_n2": self.sigma_n2, "L": self.L,
        }


def hitting_probability(t, params: ChannelParams):
    """Probability a molecule has been absorbed by time ``t``."""
    t = np.asarray(t, dtype=float)
    if (t < 0).any():
        raise ValueError("time must be non-negative")
    with np.errstate(divide="ignore"):
        arg = (params.r_0 - params.r_R) / np.sqrt(4.0 * params.D * t)
    out = (params.r_R / params.r_0) * erfc(arg)
    return out if out.ndim else float(out)


def channel_coefficients(params: ChannelParams) -> np.ndarray:
    """p_j = F(j t_s) - F((j-1) t_s) for j = 1..L."""
    edges = hitting_probability(np.arange(params.L + 1) * params.t_s, params)
    return np.diff(edges)


def simulate_binomial(tx_bits, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Counts per interval: sum over past emissions of Binomial(M, p_j) plus noise."""
    tx = as_bits(tx_bits)
    T = tx.size
    p = params.coefficients
    L = p.size
    counts = np.zeros(T + L, dtype=np.int64)
    starts = np.flatnonzero(tx)
    for lo in range(0, starts.size, _BINOMIAL_CHUNK):
        s = starts[lo : lo + _BINOMIAL_CHUNK]
        draws = rng.binomial(params.M, p, size=(s.size, L))
        for j in range(L):
            counts[s + j] += draws[:, j]
    out = counts[:T].astype(float)
    if params.sigma_n2 > 0:
        out += rng.normal(0.0, math.sqrt(params.sigma_n2), size=T)
    return out


def expected_counts(tx_bits, params: ChannelParams) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of every interval's count (Gaussian approximation)."""
    tx = as_bits(tx_bits).astype(float)
    p = params.coefficients
    T = tx.size
    mean = np.convolve(tx, params.M * p)[:T]
    var = np.convolve(tx, params.M * p * (1 - p))[:T] + params.sigma_n2
    return mean, var


def simulate_gaussian(tx_bits, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Gaussian approximation of :func:`simulate_binomial`; may go negative."""
    mean, var = expected_counts(tx_bits, params)
    return mean + np.sqrt(var) * rng.standard_normal(mean.size)


@dataclass(frozen=True)
class SchemeStats:
    """Bits and 1-bits a scheme spends to send the whole information set {0,1}^k."""

    coded_bits: int
    ones_total: int

    @classmethod
    def uncoded(cls, k: int) -> "SchemeStats":
        return cls(k * 2**k, k * 2 ** (k - 1))

    @classmethod
    def block(cls, n: int, k: int, ones_total: int) -> "SchemeStats":
        return cls(n * 2**k, ones_total)


def multipliers(scheme: SchemeStats, anchor: SchemeStats) -> tuple[float, float]:
    """(signal-interval factor, molecule-count factor) relative to ``anchor``."""
    if scheme.ones_total <= 0:
        raise ValueError("scheme sends no 1-bits; molecule normalisation undefined")
    return anchor.coded_bits / scheme.coded_bits, anchor.ones_total / scheme.ones_total


def normalize(scheme: SchemeStats, anchor_ts: float, anchor_M: int,
              anchor: SchemeStats | None = None, k: int = 16) -> tuple[float, int]:
    """Signal interval and per-1-bit molecule count for ``scheme``.

    The anchor defaults to Uncoded over {0,1}^k.  Rounding is half-to-even.
    """
    anchor = anchor or SchemeStats.uncoded(k)
    ts_factor, m_factor = multipliers(scheme, anchor)
    return ts_factor * anchor_ts, int(round(m_factor * anchor_M))
