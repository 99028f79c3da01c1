from __future__ import annotations

import numpy as np
import pytest

from flipadapt.quantizer import QuantizerSpec, bits_of, level_index, quantize, value_of_bits


@pytest.fixture
def spec():
    return QuantizerSpec(B=8, v_min=0.0, v_max=6.0)


def test_round_trip_example(spec):
    q = quantize(3.0, spec)
    assert q == pytest.approx(3.0, abs=spec.delta / 2)
    assert value_of_bits(bits_of(q, spec), spec) == pytest.approx(q, abs=1e-12)


def test_bits_are_lsb_first(spec):
    s = QuantizerSpec(B=4, v_min=0.0, v_max=15.0)
    assert list(bits_of(5.0, s)) == [1, 0, 1, 0]
    assert list(bits_of(15.0, s)) == [1, 1, 1, 1]


def test_clamping(spec):
    assert quantize(-1.0, spec) == 0.0
    assert quantize(100.0, spec) == pytest.approx(6.0)


def test_codebook_is_fixed_point(spec):
    cb = spec.codebook()
    assert cb.size == 256
    assert np.allclose(quantize(cb, spec), cb)
    assert np.array_equal(level_index(cb, spec), np.arange(256))
    assert np.allclose(value_of_bits(bits_of(cb, spec), spec), cb)


def test_quantization_error_bounded(spec):
    v = np.random.default_rng(3).uniform(0, 6, 5000)
    assert np.max(np.abs(quantize(v, spec) - v)) <= spec.delta / 2 + 1e-12


def test_soft_bits_are_linear(spec):
    rng = np.random.default_rng(0)
    a, b = rng.random(8), rng.random(8)
    va, vb = value_of_bits(a, spec), value_of_bits(b, spec)
    assert value_of_bits(0.3 * a + 0.7 * b, spec) == pytest.approx(0.3 * va + 0.7 * vb)


def test_invalid_inputs(spec):
    with pytest.raises(ValueError):
        level_index(0.001, spec)
    with pytest.raises(ValueError):
        value_of_bits(np.full(8, 1.5), spec)
    with pytest.raises(ValueError):
        QuantizerSpec(B=0)
    with pytest.raises(ValueError):
        QuantizerSpec(v_min=1.0, v_max=1.0)
