"""Square-QAM modem, block-fading channel and Monte Carlo BER harness.

Each ``2**m``-QAM symbol carries ``m/2`` Gray-coded bits on the in-phase
axis followed by ``m/2`` on the quadrature axis (most significant first).
Frames may mix modulation levels symbol by symbol.  Noise power is fixed
at one; link quality is controlled through transmit power and ``|h|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .ber_model import check_modulation


class DetectionError(ValueError):
    """A data-carrying symbol was sent with zero power."""


class SingularChannelError(ValueError):
    pass


def _axis_spacing(m: int) -> float:
    # half the distance between neighbouring axis levels at unit symbol energy
    return math.sqrt(3.0 / (2.0 * (2.0**m - 1.0)))


def _gray(i):
    return i ^ (i >> 1)


@dataclass(frozen=True)
class Constellation:
    m: int
    points: np.ndarray  # points[j] carries label j
    labels: np.ndarray  # (2**m, m) bit matrix, row j is the binary form of j

    @property
    def size(self) -> int:
        return self.points.size


@lru_cache(maxsize=None)
def build_constellation(m: int) -> Constellation:
    """Unit-energy Gray-labelled square QAM with ``2**m`` points."""
    m = check_modulation(m)
    half = m // 2
    side = 2**half
    d = _axis_spacing(m)
    amplitude = (2 * np.arange(side) - (side - 1)) * d
    # axis level i carries Gray label g(i); invert to find level per label
    level_of_label = np.empty(side, dtype=np.int64)
    level_of_label[_gray(np.arange(side))] = np.arange(side)
    labels = np.arange(2**m)
    i_label, q_label = labels >> half, labels & (side - 1)
    points = amplitude[level_of_label[i_label]] + 1j * amplitude[level_of_label[q_label]]
    bits = ((labels[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.int8)
    points.setflags(write=False)
    bits.setflags(write=False)
    return Constellation(m, points, bits)


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    width = bits.shape[-1]
    return bits.astype(np.int64) @ (1 << np.arange(width - 1, -1, -1))


def frame_layout(levels) -> tuple[np.ndarray, np.ndarray]:
    """Modulation levels as an int array and each symbol's first bit offset."""
    levels = np.asarray(levels, dtype=np.int64).reshape(-1)
    for m in np.unique(levels):
        check_modulation(int(m))
    starts = np.concatenate(([0], np.cumsum(levels)[:-1]))
    return levels, starts


def modulate(bits, levels) -> np.ndarray:
    """Map a bit stream onto symbols, ``levels[t]`` bits for symbol ``t``.

    Streams shorter than the frame capacity are zero-padded at the end.
    """
    bits = np.asarray(bits, dtype=np.int8).reshape(-1)
    levels, starts = frame_layout(levels)
    capacity = int(levels.sum())
    if bits.size > capacity:
        raise ValueError(f"{bits.size} bits exceed frame capacity {capacity}")
    if bits.size < capacity:
        bits = np.concatenate((bits, np.zeros(capacity - bits.size, dtype=np.int8)))
    symbols = np.empty(levels.size, dtype=complex)
    for m in np.unique(levels):
        sel = np.flatnonzero(levels == m)
        chunk = bits[starts[sel, None] + np.arange(m)]
        symbols[sel] = build_constellation(int(m)).points[_bits_to_int(chunk)]
    return symbols


@dataclass(frozen=True)
class ChannelRealization:
    h: complex
    sigma2: float = 1.0

    def __post_init__(self):
        if not self.sigma2 >= 0:
            raise ValueError("noise power must be non-negative")

    @property
    def gamma(self) -> float:
        return abs(self.h) ** 2 / self.sigma2


def apply_channel(symbols, powers, ch: ChannelRealization, rng: np.random.Generator):
    """``y = h sqrt(p) x + n`` with circularly-symmetric Gaussian noise of power ``sigma2``."""
    symbols = np.asarray(symbols, dtype=complex)
    powers = np.broadcast_to(np.asarray(powers, dtype=float), symbols.shape)
    if np.any(powers < 0):
        raise ValueError("powers must be non-negative")
    noise = rng.standard_normal(symbols.shape) + 1j * rng.standard_normal(symbols.shape)
    return ch.h * np.sqrt(powers) * symbols + math.sqrt(ch.sigma2 / 2.0) * noise


def equalize(received, h: complex) -> np.ndarray:
    """Zero-forcing equalization ``h* y / |h|^2``."""
    if h == 0:
        raise SingularChannelError("cannot equalize a zero channel")
    return np.conj(h) * np.asarray(received, dtype=complex) / abs(h) ** 2


def _slice_axis(z: np.ndarray, m: int) -> np.ndarray:
    """Nearest axis level for normalised amplitudes; ties go to the lower Gray label."""
    side = 2 ** (m // 2)
    pos = (z / _axis_spacing(m) + (side - 1)) / 2.0
    lower = np.floor(pos)
    frac = pos - lower
    lower = lower.astype(np.int64)
    upper = lower + 1
    level = np.where(frac > 0.5, upper, lower)
    tie = frac == 0.5
    if np.any(tie):
        lo_c = np.clip(lower, 0, side - 1)
        hi_c = np.clip(upper, 0, side - 1)
        level = np.where(tie & (_gray(hi_c) < _gray(lo_c)), upper, level)
    return _gray(np.clip(level, 0, side - 1))


def detect(equalized, powers, levels) -> np.ndarray:
    """Per-symbol ML (minimum distance) detection; returns the concatenated labels."""
    equalized = np.asarray(equalized, dtype=complex).reshape(-1)
    levels, starts = frame_layout(levels)
    powers = np.broadcast_to(np.asarray(powers, dtype=float), levels.shape)
    if equalized.size != levels.size:
        raise ValueError("symbol count does not match the modulation plan")
    if np.any(powers <= 0):
        raise DetectionError("data-carrying symbol sent with zero power")
    z = equalized / np.sqrt(powers)
    out = np.empty(int(levels.sum()), dtype=np.int8)
    for m in np.unique(levels):
        m = int(m)
        half = m // 2
        sel = np.flatnonzero(levels == m)
        label = (_slice_axis(z[sel].real, m) << half) | _slice_axis(z[sel].imag, m)
        bits = (label[:, None] >> np.arange(m - 1, -1, -1)) & 1
        out[starts[sel, None] + np.arange(m)] = bits
    return out


def sample_block_fading(expected_gamma: float, rng: np.random.Generator) -> ChannelRealization:
    """Rayleigh block: ``h ~ CN(0, expected_gamma)`` with unit noise power."""
    if not expected_gamma > 0:
        raise ValueError("expected gamma must be positive")
    g = rng.standard_normal(2)
    h = math.sqrt(expected_gamma / 2.0) * complex(g[0], g[1])
    if h == 0:  # measure zero, keep gamma strictly positive
        h = complex(math.sqrt(expected_gamma) * 1e-12, 0.0)
    return ChannelRealization(h, 1.0)


def simulate_link(bits, levels, powers, ch: ChannelRealization, rng) -> np.ndarray:
    """modulate -> channel -> equalize -> detect; returns the detected bits (padding included)."""
    symbols = modulate(bits, levels)
    received = apply_channel(symbols, powers, ch, rng)
    return detect(equalize(received, ch.h), powers, levels)


def monte_carlo_ber(
    p: float,
    m: int,
    gamma: float,
    n_bits: int = 1_000_000,
    seed=None,
    chunk_symbols: int = 200_000,
) -> tuple[float, float]:
    """Empirical BER and its standard error for ``2**m``-QAM at power ``p``.

    The channel is fixed at ``h = sqrt(gamma)`` with unit noise power.
    ``n_bits`` is rounded up to whole symbols.
    """
    m = check_modulation(m)
    n_symbols = -(-int(n_bits) // m)
    rng = np.random.default_rng(seed)
    ch = ChannelRealization(complex(math.sqrt(gamma), 0.0), 1.0)
    errors = 0
    done = 0
    while done < n_symbols:
        count = min(chunk_symbols, n_symbols - done)
        bits = rng.integers(0, 2, size=count * m, dtype=np.int8)
        detected = simulate_link(bits, np.full(count, m), p, ch, rng)
        errors += int(np.count_nonzero(detected != bits))
        done += count
    total = n_symbols * m
    estimate = errors / total
    return estimate, math.sqrt(estimate * (1.0 - estimate) / total)
