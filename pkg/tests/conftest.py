import numpy as np
import pytest

from scfbuf.polarcode import CodeSpec, build_frozen_set

# criterion lines collected by test_acceptance, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ref_spec():
    return CodeSpec.construct(1024, 512, 16, 2.365)


@pytest.fixture(scope="session")
def small_spec():
    # P(64, 16) + CRC-16: small enough for brute-force cross checks
    _, frozen = build_frozen_set(64, 32, 4.0)
    return CodeSpec(64, 16, 16, tuple(frozen), design_snr_db=4.0)


def random_frozen_spec(rng, N, k, r=0, poly=1):
    frozen = np.sort(rng.choice(N, N - k - r, replace=False))
    return CodeSpec(N, k, r, tuple(int(i) for i in frozen), poly)
