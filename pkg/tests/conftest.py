import sys

import numpy as np
import pytest

from semreg.geometry import LabelAlphabet, LabeledPointCloud


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance verdicts after capture is released."""
    for modname in ("test_acceptance", "tests.test_acceptance"):
        mod = sys.modules.get(modname)
        if mod is not None and getattr(mod, "ACCEPTANCE_LINES", None):
            terminalreporter.section("acceptance criteria")
            for line in mod.ACCEPTANCE_LINES:
                terminalreporter.write_line(line)
            break


@pytest.fixture
def alphabet():
    return LabelAlphabet(("ground", "building", "pole", "car"),
                         (False, False, False, True))


@pytest.fixture
def random_cloud(alphabet):
    """200 points uniform in a 10 m cube with random labels."""
    rng = np.random.default_rng(42)
    pts = rng.uniform(-5.0, 5.0, size=(200, 3))
    labels = rng.integers(0, len(alphabet), size=200)
    return LabeledPointCloud(pts, labels, alphabet)
