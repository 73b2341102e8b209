import numpy as np
import pytest

from sharpfronts.model import Model, constant, power_at_top

ACCEPTANCE_LINES: dict[int, str] = {}


def power_model(alpha: float, beta: float, K_D: float = 1.0, K_g: float = 1.0, tags=("D", "g")) -> Model:
    """h = 0, D = K_D (1 - phi)^alpha, g = K_g (1 - phi)^beta on [0, 1]."""
    return Model(1.0, constant(0.0), power_at_top(K_D, alpha), power_at_top(K_g, beta), tags=frozenset(tags),
                 name=f"power-{alpha}-{beta}")


@pytest.fixture
def record():
    def _record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
