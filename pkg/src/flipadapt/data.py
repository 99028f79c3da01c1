"""Seeded 8x8 grayscale toy images: linear gradients, bars and Gaussian blobs."""

from __future__ import annotations

import numpy as np

SIDE = 8


def make_toy_images(n: int, seed=0, side: int = SIDE) -> np.ndarray:
    """Return ``(n, side*side)`` float64 images with pixels in ``[0, 1]``."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:side, 0:side] / (side - 1)
    out = np.empty((n, side, side))
    kinds = rng.integers(0, 3, size=n)
    for i, kind in enumerate(kinds):
        if kind == 0:
            angle = rng.uniform(0, 2 * np.pi)
            ramp = np.cos(angle) * xx + np.sin(angle) * yy
            img = (ramp - ramp.min()) / max(np.ptp(ramp), 1e-12)
        elif kind == 1:
            img = np.zeros((side, side))
            width = rng.integers(1, 3)
            start = rng.integers(0, side - width + 1)
            if rng.random() < 0.5:
                img[:, start:start + width] = 1.0
            else:
                img[start:start + width, :] = 1.0
        else:
            cx, cy = rng.uniform(0.15, 0.85, size=2)
            s = rng.uniform(0.1, 0.3)
            img = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s))
        out[i] = rng.uniform(0.6, 1.0) * img
    return out.reshape(n, side * side)
