import numpy as np
import pytest

from radiloc import kernels

ACCEPTANCE_RESULTS = []


def record(criterion, passed, detail=""):
    ACCEPTANCE_RESULTS.append((criterion, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    return kernels.backends()[request.param]


def random_levels(rng, shape=(8, 8), ng=None):
    """Random quantized ROI: levels in 1..ng inside a random non-empty mask, 0 outside."""
    ng = ng or int(rng.integers(2, 9))
    levels = rng.integers(1, ng + 1, shape)
    mask = rng.random(shape) < rng.uniform(0.2, 1.0)
    if not mask.any():
        mask[tuple(rng.integers(0, s) for s in shape)] = True
    return np.where(mask, levels, 0), ng


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
