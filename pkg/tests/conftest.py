import pytest

import droopsim as ds
from droopsim import builtin_scenarios


@pytest.fixture(scope="session")
def canonical():
    """Every built-in scenario, simulated once and shared by all tests."""
    return {name: ds.run_scenario(sc) for name, sc in builtin_scenarios().items()}
