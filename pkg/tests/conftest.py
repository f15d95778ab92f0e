import numpy as np
import pytest

from traction_gap.geometry import Domain, volume_quadrature
from traction_gap.loads import LoadSpec, default_rules

ACCEPTANCE_LINES: list[tuple[int, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def preset():
    return LoadSpec.cylinder_preset(beta=0.01)


@pytest.fixture(scope="session")
def preset_rules(preset):
    return default_rules(preset, order=12)


@pytest.fixture(scope="session")
def cylinder_rule():
    return volume_quadrature(Domain.cylinder(), 10)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_rotations(rng, n):
    from traction_gap.rotations import exp_so3

    return [exp_so3(rng.uniform(-np.pi, np.pi, 3)) for _ in range(n)]
