import math
from pathlib import Path

import numpy as np
import pytest

from nmzi.optics import NmziConfig, Ratios, SignConvention, equal_intensity_ratios

CORPUS = Path(__file__).parent / "corpus"
CONVENTIONS = list(SignConvention)


def random_config(rng: np.random.Generator, convention=None, t_range=(0.05, 0.95)) -> NmziConfig:
    t = rng.uniform(*t_range, size=4)
    phi, chi = rng.uniform(-math.pi, math.pi, size=2)
    if convention is None:
        convention = CONVENTIONS[int(rng.integers(2))]
    return Ratios.from_t(*t).configure(float(phi), float(chi), convention)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def balanced():
    return equal_intensity_ratios()


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
