import sys

import pytest

from d2dfd.analytic import association_probability
from d2dfd.model import derive_densities, reference_scenario


@pytest.fixture(scope="session")
def ref():
    return reference_scenario()


@pytest.fixture(scope="session")
def ref_densities(ref):
    return derive_densities(ref, association_probability(ref))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda x: int(x.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
