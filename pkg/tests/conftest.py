import numpy as np
import pytest

from ockm import _kernels
from ockm._kernels import _fallback

try:
    from ockm._kernels import _ext
except ImportError:  # extension not built
    _ext = None

BACKENDS = [pytest.param(_fallback, id="numpy")]
if _ext is not None:
    BACKENDS.append(pytest.param(_ext, id="cython"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


_REPORT = []


def report(line: str) -> None:
    print(line)
    _REPORT.append(line)


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
        terminalreporter.write_line(f"kernel backend: {_kernels.BACKEND}")
