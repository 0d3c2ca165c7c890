import numpy as np
import pytest

_acceptance_lines = []


def pytest_addoption(parser):
    parser.addoption("--run-paper-scale", action="store_true", default=False,
                     help="run the hours-long full-size reproduction (A6)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-paper-scale"):
        return
    skip = pytest.mark.skip(reason="paper-scale run; pass --run-paper-scale")
    for item in items:
        if "paper_scale" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_acceptance_lines):
        terminalreporter.write_line(line)


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""
    def _report(name, passed, detail):
        line = f"{name}: {'PASS' if passed else 'FAIL'} ({detail})"
        _acceptance_lines.append(line)
        print(line)
        return passed
    return _report


@pytest.fixture
def rng():
    return np.random.default_rng(20190512)
