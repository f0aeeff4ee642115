import numpy as np
import pytest

from pumpout import nn
from pumpout.data import inject_noise, synth_blobs
from pumpout.noise import symmetry_flip


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_net():
    return nn.init_network((4, 6, 5, 3), "softsign", 7)


@pytest.fixture(scope="session")
def tiny_blobs():
    """300 training points in 8-D, symmetric 40% noise on train/validation."""
    splits = synth_blobs(k=3, per_class=150, dim=8, spread=1.0, seed=5)
    return inject_noise(splits, symmetry_flip(3, 0.4), seed=6)


def random_batch(rng, net, size):
    X = rng.standard_normal((size, net.input_size))
    y = rng.integers(0, net.class_count, size)
    return X, y


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for the acceptance summary."""

    def _report(criterion, ok, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("C", 1)[1].split(" ")[0])):
            terminalreporter.write_line(line)
