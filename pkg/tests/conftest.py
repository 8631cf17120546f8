import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))

_VERDICTS = []


class Verdict:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def __init__(self, capsys):
        self.capsys = capsys

    def __call__(self, number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title}" + (f" [{detail}]" if detail else "")
        _VERDICTS.append(line)
        with self.capsys.disabled():
            print("\n" + line)
        return ok


@pytest.fixture
def verdict(capsys):
    return Verdict(capsys)


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
