from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from flipadapt import ber_model
from flipadapt.ber_model import InfeasibleTargetError, ber, erfc, max_ber, solve_power, solve_snr

mpmath.mp.dps = 40


def oracle_ber(p, m, gamma):
    """Same closed form evaluated with 40-digit mpmath."""
    L = mpmath.sqrt(mpmath.mpf(2) ** m)
    x = mpmath.sqrt(mpmath.mpf(3) * p * gamma / (2 * (mpmath.mpf(2) ** m - 1)))
    c1 = (L - 1) / (L * mpmath.log(L, 2))
    c2 = (L - 2) / (L * mpmath.log(L, 2))
    return float(c1 * mpmath.erfc(x) + c2 * mpmath.erfc(3 * x))


@pytest.mark.parametrize("x", [0.0, 1e-8, 0.3, 1.0, 1.99, 2.0, 2.01, 3.5, 5.0, 10.0, 26.0, -0.7, -3.0])
def test_erfc_matches_mpmath(x):
    ref = float(mpmath.erfc(x))
    assert abs(erfc(x) - ref) <= 1e-14 * max(1.0, ref) or abs(erfc(x) / ref - 1) <= 1e-12


def test_erfc_relative_accuracy_in_tail():
    for x in np.linspace(2.0, 26.0, 97):
        ref = float(mpmath.erfc(x))
        assert abs(erfc(x) / ref - 1.0) < 1e-12


def test_erfc_far_tail_and_bad_input():
    assert erfc(30.0) == 0.0
    assert erfc(-30.0) == 2.0
    with pytest.raises(ValueError):
        erfc(float("nan"))


def test_ber_examples_against_gaussian_tail():
    # 4-QAM: exactly Q(sqrt(p gamma))
    assert ber(4.0, 2, 1.0) == pytest.approx(norm.sf(2.0), rel=1e-12)
    assert ber(4.0, 2, 1.0) == pytest.approx(0.0227501, abs=5e-8)
    assert ber(10.0, 4, 1.0) == pytest.approx(oracle_ber(10.0, 4, 1.0), rel=1e-12)
    assert ber(10.0, 4, 1.0) == pytest.approx(0.0589927, abs=5e-7)


@pytest.mark.parametrize("m", [2, 4, 6, 8, 10])
@pytest.mark.parametrize("snr", [1e-3, 0.5, 3.0, 40.0, 900.0])
def test_ber_matches_oracle(m, snr):
    assert ber(snr, m, 1.0) == pytest.approx(oracle_ber(snr, m, 1.0), rel=1e-12, abs=1e-300)


def test_max_ber_values():
    assert max_ber(2) == 0.5
    assert max_ber(4) == pytest.approx(0.625)
    # the derivation gives 13/24 at m=6
    assert max_ber(6) == pytest.approx(13 / 24)
    assert max_ber(8) == pytest.approx(29 / 64)
    assert max_ber(10) == pytest.approx(61 / 160)
    for m in (2, 4, 6, 8, 10):
        assert ber(0.0, m, 1.0) == pytest.approx(max_ber(m))


@pytest.mark.parametrize("m", [0, 1, 3, 12, 2.5])
def test_bad_modulation(m):
    with pytest.raises(ValueError):
        ber(1.0, m, 1.0)


def test_ber_is_decreasing_in_power():
    for m in (2, 4, 6, 8, 10):
        p = np.logspace(-3, 3, 200)
        values = np.array([ber(x, m, 1.0) for x in p])
        assert np.all(np.diff(values) < 0)


def test_solve_power_examples():
    assert solve_power(0.0227501319481792, 2, 1.0) == pytest.approx(4.0, rel=1e-8)
    assert solve_power(0.5, 2, 1.0) == 0.0
    with pytest.raises(InfeasibleTargetError):
        solve_power(0.7, 4, 1.0)
    with pytest.raises(InfeasibleTargetError):
        solve_power(0.0, 2, 1.0)
    with pytest.raises(ValueError):
        solve_power(0.1, 2, 0.0)


@settings(max_examples=200, deadline=None)
@given(
    m=st.sampled_from([2, 4, 6, 8, 10]),
    frac=st.floats(1e-6, 0.999),
    gamma=st.floats(1e-3, 1e3),
)
def test_solve_round_trip(m, frac, gamma):
    target = frac * max_ber(m)
    p = solve_power(target, m, gamma)
    assert abs(ber(p, m, gamma) - target) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(
    m=st.sampled_from([2, 4, 6, 8, 10]),
    frac=st.floats(1e-5, 0.99),
    c=st.floats(1e-2, 1e2),
)
def test_gamma_scaling(m, frac, c):
    target = frac * max_ber(m)
    a = solve_power(target, m, 1.0)
    b = solve_power(target, m, c) * c
    assert b == pytest.approx(a, rel=1e-9)


def test_solve_snr_tiny_target():
    snr = solve_snr(1e-15, 2)
    assert ber_model.ber_snr(snr, 2) == pytest.approx(1e-15, rel=1e-6)
    assert math.isfinite(snr)
