import numpy as np
import pytest

from choidiv.channels import choi_from_kraus


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def choi(ch):
    return choi_from_kraus(ch)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
