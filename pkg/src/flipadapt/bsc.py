"""Binary symmetric channel with trainable flip probabilities.

The hard channel flips bit ``n`` with probability ``mu_n``.  For training
the binary error ``e_n`` in ``{-1, +1}`` is replaced by the logistic
relaxation::

    e~ = -tanh((logit(mu) + logit(u)) / tau),   u ~ U(0, 1)

whose sign is exactly the hard decision (``e = -1`` iff ``u > 1 - mu``),
so the flip law is preserved for every temperature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

U_CLAMP = 1e-7


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


@dataclass(frozen=True)
class BitFlipSet:
    """Flip probabilities in ``(0, 0.5)`` together with their ascending sort order."""

    mu: np.ndarray
    sort_perm: np.ndarray = field(default=None)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if mu.size == 0:
            raise ValueError("empty flip-probability set")
        if np.any(~(mu > 0.0)) or np.any(~(mu < 0.5)):
            raise ValueError("every flip probability must lie in (0, 0.5)")
        perm = self.sort_perm
        if perm is None:
            perm = np.argsort(mu, kind="stable")
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(mu.size)):
            raise ValueError("sort_perm is not a permutation")
        if np.any(np.diff(mu[perm]) < 0):
            raise ValueError("sort_perm does not sort mu ascending")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sort_perm", perm)

    def __len__(self):
        return self.mu.size

    @property
    def sorted_mu(self) -> np.ndarray:
        return self.mu[self.sort_perm]


def mu_from_raw(raw) -> BitFlipSet:
    """Map unconstrained parameters to flip probabilities ``sigmoid(raw) / 2``."""
    return BitFlipSet(flip_probabilities(raw))


def flip_probabilities(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw flip parameters must be finite")
    mu = 0.5 * sigmoid(raw)
    # keep the open interval even where sigmoid saturates in float64
    return np.clip(mu, np.nextafter(0.0, 1.0), np.nextafter(0.5, 0.0))


def raw_from_mu(mu) -> np.ndarray:
    """Inverse of the ``sigmoid(raw) / 2`` map."""
    return logit(2.0 * np.asarray(mu, dtype=float))


def sample_errors(mu, rng: np.random.Generator, size=None):
    """Hard errors in ``{-1, +1}``, ``-1`` with probability ``mu``."""
    shape = np.shape(mu) if size is None else size
    return np.where(rng.random(shape) < mu, -1, 1).astype(np.int8)


def sample_hard(bits, mu, rng: np.random.Generator):
    """Pass bits through independent BSCs with flip probabilities ``mu``."""
    shape = np.broadcast_shapes(np.shape(bits), np.shape(mu))
    return apply_error(bits, sample_errors(mu, rng, shape))


def apply_error(bits, e):
    """``((2b - 1) e + 1) / 2`` for hard bits and hard errors."""
    return (((2 * np.asarray(bits) - 1) * np.asarray(e) + 1) // 2).astype(np.int8)


def _check_u(u):
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("uniform draws must lie strictly inside (0, 1)")
    return np.clip(u, U_CLAMP, 1.0 - U_CLAMP)


def _log_odds(mu, u, tau):
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    return (logit(mu) + logit(_check_u(u))) / tau


def relax_error(mu, u, tau: float = 1.0):
    """Relaxed channel error in ``(-1, 1)``; negative means a flip."""
    out = -np.tanh(_log_odds(mu, u, tau))
    return float(out) if np.ndim(out) == 0 else out


def relax_error_grad(mu, u, tau: float = 1.0):
    """Derivative of :func:`relax_error` with respect to ``mu``."""
    mu = np.asarray(mu, dtype=float)
    z = _log_odds(mu, u, tau)
    # sech^2 via exp(-2|z|) keeps large |z| from overflowing cosh
    a = np.exp(-2.0 * np.abs(z))
    sech2 = 4.0 * a / (1.0 + a) ** 2
    out = -sech2 / (tau * mu * (1.0 - mu))
    return float(out) if np.ndim(out) == 0 else out


def transmit_relaxed(bits, e_tilde):
    """Soft received bit ``((2b - 1) e~ + 1) / 2``.

    Partial derivatives: ``b - 1/2`` with respect to ``e~`` and ``e~`` with
    respect to ``b``.
    """
    e_tilde = np.asarray(e_tilde, dtype=float)
    if np.any(np.abs(e_tilde) > 1.0):
        raise ValueError("relaxed error must lie in [-1, 1]")
    out = ((2.0 * np.asarray(bits, dtype=float) - 1.0) * e_tilde + 1.0) / 2.0
    return float(out) if np.ndim(out) == 0 else out
