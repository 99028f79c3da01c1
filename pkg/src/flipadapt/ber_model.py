"""Approximate bit error rate of Gray-mapped square QAM and its inverse.

The BER of a ``2**m``-QAM symbol sent with power ``p`` over a link whose
channel-gain-to-noise ratio is ``gamma`` is modelled as::

    c1 * erfc(x) + c2 * erfc(3 x),   x = sqrt(3 p gamma / (2 (2**m - 1)))

with ``c1 = (L - 1) / (L log2 L)``, ``c2 = (L - 2) / (L log2 L)`` and
``L = sqrt(2**m)``.  It depends on ``p`` and ``gamma`` only through their
product, which every caller in this package relies on.
"""

from __future__ import annotations

import math

M_MIN = 2
M_MAX = 10
DEFAULT_TOL = 1e-12

_SQRT_PI = math.sqrt(math.pi)
_SERIES_LIMIT = 2.0
_MAX_DOUBLINGS = 200


class InfeasibleTargetError(ValueError):
    """A BER target that no non-negative power can reach."""


def erfc(x: float) -> float:
    """Complementary error function, absolute error below 1e-12.

    For ``|x| < 2`` the positive-term series
    ``erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (2n+1)!!``
    is summed (no cancellation).  Beyond that the Laplace continued
    fraction for ``erfc`` is evaluated with the modified Lentz method.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"erfc needs a finite argument, got {x!r}")
    if x < 0.0:
        return 2.0 - erfc(-x)
    if x < _SERIES_LIMIT:
        x2 = x * x
        term = x
        total = x
        n = 0
        while term > 1e-17 * total:
            n += 1
            term *= 2.0 * x2 / (2 * n + 1)
            total += term
        return 1.0 - 2.0 / _SQRT_PI * math.exp(-x2) * total
    if x > 27.3:
        # exp(-x^2) underflows to subnormal range here.
        return 0.0
    return math.exp(-x * x) / _SQRT_PI * _erfc_cf(x)


def _erfc_cf(x: float) -> float:
    # 1 / (x + (1/2) / (x + 1 / (x + (3/2) / (x + 2 / (x + ...)))))
    tiny = 1e-300
    f = x
    c = x
    d = 0.0
    for k in range(1, 500):
        a = 0.5 * k
        d = x + a * d
        d = 1.0 / (d if d != 0.0 else tiny)
        c = x + a / (c if c != 0.0 else tiny)
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return 1.0 / f


def check_modulation(m: int) -> int:
    """Validate a square-QAM modulation level (bits per symbol)."""
    if isinstance(m, bool) or int(m) != m:
        raise ValueError(f"modulation level must be an integer, got {m!r}")
    m = int(m)
    if m < M_MIN or m > M_MAX or m % 2:
        raise ValueError(f"modulation level must be an even integer in [{M_MIN}, {M_MAX}], got {m}")
    return m


def _coefficients(m: int) -> tuple[float, float]:
    side = math.sqrt(2.0**m)
    norm = side * (m / 2)
    return (side - 1.0) / norm, (side - 2.0) / norm


def max_ber(m: int) -> float:
    """BER at zero transmit power, the ceiling on reachable targets."""
    c1, c2 = _coefficients(check_modulation(m))
    return c1 + c2


def ber_snr(snr: float, m: int) -> float:
    """Model BER as a function of the received SNR ``p * gamma``."""
    m = check_modulation(m)
    if snr < 0:
        raise ValueError(f"p * gamma must be non-negative, got {snr}")
    c1, c2 = _coefficients(m)
    x = math.sqrt(1.5 * snr / (2.0**m - 1.0))
    return c1 * erfc(x) + c2 * erfc(3.0 * x)


def ber(p: float, m: int, gamma: float) -> float:
    """Approximate BER of ``2**m``-QAM at transmit power ``p`` and link gain ``gamma``."""
    if p < 0:
        raise ValueError(f"power must be non-negative, got {p}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return ber_snr(p * gamma, m)


def solve_snr(mu_target: float, m: int, tol: float = DEFAULT_TOL) -> float:
    """Smallest-residual ``p * gamma`` reaching ``mu_target`` by bisection."""
    m = check_modulation(m)
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    ceiling = max_ber(m)
    if not 0.0 < mu_target < ceiling:
        if mu_target == ceiling:
            return 0.0
        raise InfeasibleTargetError(
            f"BER target {mu_target} outside (0, {ceiling}) for m={m}"
        )

    lo, hi = 0.0, 1.0
    for _ in range(_MAX_DOUBLINGS):
        if ber_snr(hi, m) < mu_target:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise InfeasibleTargetError(f"no power bracket found for target {mu_target}")

    best, best_err = hi, abs(ber_snr(hi, m) - mu_target)
    while True:
        mid = 0.5 * (lo + hi)
        value = ber_snr(mid, m)
        err = abs(value - mu_target)
        if err < best_err:
            best, best_err = mid, err
        if err <= tol or mid <= lo or mid >= hi:
            return best
        if value > mu_target:
            lo = mid
        else:
            hi = mid


def solve_power(
    mu_target: float, m: int, gamma: float, tol: float = DEFAULT_TOL
) -> float:
    """Transmit power at which ``ber(p, m, gamma)`` equals ``mu_target``.

    Raises InfeasibleTargetError when ``mu_target`` is outside
    ``(0, max_ber(m))``; a target equal to the ceiling needs zero power.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return solve_snr(mu_target, m, tol) / gamma
