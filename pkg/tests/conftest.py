import sys
from pathlib import Path

import numpy as np
import pytest

from sarstack import QuantizedImage

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def golden_dir():
    return GOLDEN


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_image(rng, shape=(16, 16), levels=255):
    return QuantizedImage(rng.integers(0, levels + 1, size=shape), levels)


def random_monotone_table(rng, n, n_generators=None):
    """Up-closure of a few random patterns: a random positive Boolean function."""
    size = 1 << n
    k = n_generators if n_generators is not None else int(rng.integers(1, 6))
    gens = rng.integers(0, size, size=k)
    p = np.arange(size)
    tt = np.zeros(size, dtype=bool)
    for g in gens:
        tt |= (p & g) == g
    return tt


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
