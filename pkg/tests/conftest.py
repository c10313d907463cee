import pytest

from infcone.config import RunConfig


@pytest.fixture(scope="session")
def cfg():
    """Default configuration (acceptance-grade budgets)."""
    return RunConfig()


@pytest.fixture(scope="session")
def fast_cfg():
    # reduced budgets for unit tests that only need coarse answers
    return RunConfig(shells=6, samples_per_shell=600, probes_per_level=80)
