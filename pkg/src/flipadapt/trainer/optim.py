from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, arrays, **kwargs) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **kwargs)


def adam_step(params, grads, state: AdamState, lr) -> list:
    """One bias-corrected Adam update over a flat list of arrays.

    ``lr`` is a scalar or one rate per array.  Returns new arrays; ``state``
    is updated in place.
    """
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("parameter, gradient and state lists differ in length")
    rates = np.broadcast_to(np.asarray(lr, dtype=float), (len(params),))
    b1, b2 = state.betas
    state.step += 1
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != state.m[i].shape:
            raise ValueError(f"state shape {state.m[i].shape} does not match parameter {p.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        out.append(p - rates[i] * m_hat / (np.sqrt(v_hat) + state.eps))
    return out
