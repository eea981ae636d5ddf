import pytest

from levysir.model import ModelParams, NoiseSpec

_ACCEPTANCE_LINES = []


def record_acceptance(label: str, passed: bool, detail: str = "") -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {label}" + (f"  ({detail})" if detail else "")
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def fig1_params():
    return ModelParams(A=0.9, mu1=0.3, mu2=0.5, gamma=0.05, beta=0.07, eta=0.09)


@pytest.fixture
def fig2_params():
    return ModelParams(A=0.3, mu1=0.3, mu2=0.5, gamma=0.05, beta=1.3, eta=0.09)


@pytest.fixture
def fig12_noise():
    return NoiseSpec.single_atom((0.15, 0.25, 0.27), (0.2, 0.23, 0.1))


@pytest.fixture
def quiet():
    return NoiseSpec()
