from __future__ import annotations

import sys

import pytest

from flipadapt.data import make_toy_images
from flipadapt.trainer import TrainConfig, train_ladder


@pytest.fixture(scope="session")
def small_bundle():
    cfg = TrainConfig(
        lambdas=(1e-6, 1e-2),
        encoder_hidden=(16,),
        decoder_hidden=(16,),
        feature_dim=4,
        epochs=4,
        seed=5,
    )
    return train_ladder(make_toy_images(200, seed=6), cfg)


@pytest.fixture(scope="session")
def test_images():
    return make_toy_images(40, seed=7)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n, name, ok, detail in sorted(results):
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
