import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nilgeo.structure import builtin

settings.register_profile(
    "nilgeo",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("nilgeo")

# acceptance lines collected by test_acceptance.py and echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_skew(rng, p, scale=1.0):
    a = rng.normal(scale=scale, size=(p, p))
    return a - a.T


def random_orthogonal(rng, p):
    q, r = np.linalg.qr(rng.normal(size=(p, p)))
    return q * np.sign(np.diag(r))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def families():
    return {name: builtin(name) for name in ("F_commuting", "F_generic", "F_generic6", "F_degenerate", "F_noresonance")}
