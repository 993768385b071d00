import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qbilevel import kernels  # noqa: E402


@pytest.fixture(params=sorted(kernels.implementations()))
def kernel_impl(request):
    return kernels.implementations()[request.param]


@pytest.fixture(params=sorted(kernels.implementations()))
def sim_backend(request, monkeypatch):
    """Route quantum_sim through each available kernel implementation."""
    impl = kernels.implementations()[request.param]
    monkeypatch.setattr(kernels, "apply_1q", impl.apply_1q)
    monkeypatch.setattr(kernels, "apply_cnot", impl.apply_cnot)
    return request.param


def pytest_terminal_summary(terminalreporter, config):
    from test_acceptance import ACCEPTANCE_KEY

    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
