import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from rtgrowth import RTParameters  # noqa: E402

ACCEPTANCE_LINES = {}


@pytest.fixture
def pure_rt():
    return RTParameters(rho_plus=2.0, rho_minus=1.0, mu_plus=1.0, mu_minus=1.0, g=1.0)


@pytest.fixture
def rich_params():
    return RTParameters(
        rho_plus=2.5, rho_minus=1.2, mu_plus=0.7, mu_minus=1.3, kappa_plus=0.2, kappa_minus=0.4,
        vartheta=0.3, g=9.8, lam=2.0, M_bar=(0.4, -0.3, 0.5),
    )


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
