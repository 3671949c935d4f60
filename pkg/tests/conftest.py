import numpy as np
import pytest

from acceptance_report import LINES


class ScriptedRng:
    """Stand-in generator replaying fixed uniforms and integers."""

    def __init__(self, uniforms=(), integers=()):
        self.uniforms = list(uniforms)
        self.ints = list(integers)

    def random(self):
        return self.uniforms.pop(0)

    def integers(self, low, high):
        val = self.ints.pop(0)
        assert low <= val < high
        return val


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scripted():
    return ScriptedRng


def pytest_terminal_summary(terminalreporter):
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
