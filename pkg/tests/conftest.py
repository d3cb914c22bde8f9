import numpy as np
import pytest

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
KET0 = np.array([[1, 0], [0, 0]], dtype=complex)


@pytest.fixture
def paulis():
    return SX, SY, SZ


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for the acceptance summary."""

    def record(number, text, ok, measured):
        tag = "INFO" if ok is None else ("PASS" if ok else "FAIL")
        line = f"[{tag}] criterion {number}: {text} ({measured})"
        request.config._acceptance_lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
