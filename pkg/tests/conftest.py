import numpy as np
import pytest

from modalmatrix import _backend


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=_backend.available())
def core(request, monkeypatch):
    """Run a test once per importable core, routing the package through it."""
    mod = _backend.get(request.param)
    monkeypatch.setattr(_backend, "core", mod)
    return mod


_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Reporter for acceptance checks: prints one PASS/FAIL line, then asserts."""

    def report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
