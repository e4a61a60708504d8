import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def catalog():
    """Every bundled scenario, loaded and instantiated once per session."""
    from lpforms.catalog import catalog_names
    from lpforms.scenario import build_scenario, load_scenario

    out = {}
    for name in catalog_names():
        config = load_scenario(f"catalog:{name}")
        out[name] = (config, build_scenario(config))
    return out


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
