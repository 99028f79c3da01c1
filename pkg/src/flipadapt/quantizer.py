"""Uniform B-bit scalar quantizer and its codeword <-> bit mapping.

Bits are little-endian: bit ``k`` (0-based) carries weight ``2**k`` so that
``q = v_min + delta * sum_k 2**k b_k``.  All functions accept numpy arrays
and operate elementwise along the leading axes; bit vectors occupy a
trailing axis of length ``B``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CODEWORD_ATOL = 1e-9


@dataclass(frozen=True)
class QuantizerSpec:
    B: int = 8
    v_min: float = 0.0
    v_max: float = 6.0

    def __post_init__(self):
        if int(self.B) != self.B or self.B < 1:
            raise ValueError(f"B must be a positive integer, got {self.B}")
        if not self.v_min < self.v_max:
            raise ValueError(f"need v_min < v_max, got [{self.v_min}, {self.v_max}]")

    @property
    def levels(self) -> int:
        return 2**self.B

    @property
    def delta(self) -> float:
        return (self.v_max - self.v_min) / (self.levels - 1)

    @property
    def weights(self) -> np.ndarray:
        """Per-bit value weights ``delta * 2**k``, LSB first."""
        return self.delta * 2.0 ** np.arange(self.B)

    def codebook(self) -> np.ndarray:
        return self.v_min + self.delta * np.arange(self.levels)


def quantize(v, spec: QuantizerSpec):
    """Round ``v`` to the nearest codeword after clamping to the range."""
    v = np.clip(np.asarray(v, dtype=float), spec.v_min, spec.v_max)
    index = np.floor((v - spec.v_min) / spec.delta + 0.5)
    index = np.minimum(index, spec.levels - 1)
    q = spec.delta * index + spec.v_min
    return float(q) if q.ndim == 0 else q


def level_index(q, spec: QuantizerSpec) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    raw = (q - spec.v_min) / spec.delta
    index = np.rint(raw)
    off = np.abs(spec.v_min + spec.delta * index - q) > CODEWORD_ATOL
    if np.any(off) or np.any(index < 0) or np.any(index >= spec.levels):
        raise ValueError("value is not a codeword of the quantizer")
    return index.astype(np.int64)


def bits_of(q, spec: QuantizerSpec) -> np.ndarray:
    """Binary expansion (LSB first) of a codeword's level index."""
    index = level_index(q, spec)
    return ((index[..., None] >> np.arange(spec.B)) & 1).astype(np.int8)


def value_of_bits(bits, spec: QuantizerSpec):
    """Linear reconstruction ``v_min + sum_k delta 2**k b_k``.

    Accepts soft bits in ``[0, 1]``; the map is linear in them, which is
    what carries decoder gradients back to the relaxed channel.
    """
    bits = np.asarray(bits, dtype=float)
    if bits.shape[-1] != spec.B:
        raise ValueError(f"expected trailing axis of length {spec.B}, got {bits.shape}")
    if np.any(bits < 0.0) or np.any(bits > 1.0):
        raise ValueError("bit values must lie in [0, 1]")
    value = spec.v_min + bits @ spec.weights
    return float(value) if np.ndim(value) == 0 else value
