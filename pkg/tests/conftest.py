import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unit(rng, n, D=3):
    g = rng.standard_normal((n, D))
    return g / np.linalg.norm(g, axis=1)[:, None]


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_RESULTS: dict[int, str] = {}


def record_acceptance(num: int, ok: bool, detail: str, reported_only: bool = False) -> None:
    status = "PASS" if ok else "FAIL"
    if reported_only:
        status += " (reported)"
    line = f"criterion {num:2d}: {status}: {detail}"
    ACCEPTANCE_RESULTS[num] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(ACCEPTANCE_RESULTS[k])
