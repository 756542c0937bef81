"""
Test configuration and fixtures for anonpool tests.
"""

import json
import sys
from pathlib import Path

import pytest

# Add src directory to path for imports
test_dir = Path(__file__).parent
project_root = test_dir.parent
src_dir = project_root / "src"
sys.path.insert(0, str(src_dir))

from harness.scenario import SimulationConfig, honest_scenario
from models.anon_net import Router
from models.identity_provider import IdentityProvider
from primitives.group_profiles import GroupProfile
from primitives.substrate import GroupParams, Rng
from protocol.coordinator import Coordinator


@pytest.fixture(scope="session")
def project_root_path():
    """Get the project root path."""
    return Path(__file__).parent.parent


@pytest.fixture(scope="session")
def test_data_dir(project_root_path):
    """Get the test data directory path."""
    return project_root_path / "tests" / "test_data"


@pytest.fixture(scope="session")
def toy_params():
    """Order-11 subgroup of Z_23^*; small enough to check by hand."""
    return GroupParams(p=23, q=11, g=2, h=3)


@pytest.fixture(scope="session")
def sim_params():
    """64-bit group, identical to what a seed-0 simulation uses."""
    return GroupProfile.build("sim", Rng.from_int(0).fork("group"))


@pytest.fixture
def rng():
    """Fresh deterministic randomness per test."""
    return Rng.from_int(1234)


@pytest.fixture
def router(rng):
    return Router(rng.fork("router"))


@pytest.fixture
def identity_provider(sim_params, rng):
    return IdentityProvider(sim_params, rng.fork("identity-provider"))


@pytest.fixture
def coordinator(sim_params, rng, router, identity_provider):
    """Honest coordinator with pool threshold 3."""
    return Coordinator(sim_params, rng.fork("coordinator"), router, 3, identity_provider.public_key)


@pytest.fixture
def honest_config():
    return SimulationConfig(seed=0, parties=5, threshold=3)


@pytest.fixture
def honest_5_3(honest_config):
    """Five parties, threshold three, one round of F."""
    return honest_scenario(honest_config)


@pytest.fixture
def scenario_file(tmp_path):
    """Write a scenario dict to a temporary JSON file; returns the path."""

    def write(data: dict, name: str = "scenario.json") -> str:
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2), encoding="utf-8")
        return str(path)

    return write


@pytest.fixture
def temp_output_dir(tmp_path):
    """Create a temporary output directory for testing."""
    output_dir = tmp_path / "output"
    output_dir.mkdir()
    return str(output_dir)


# Pytest configuration
def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line("markers", "unit: Unit tests for individual components")
    config.addinivalue_line("markers", "integration: Integration tests across components")
    config.addinivalue_line("markers", "validation: Acceptance tests for protocol guarantees")
    config.addinivalue_line("markers", "slow: Tests that take longer to run")
    config.addinivalue_line("markers", "requires_data: Tests requiring test data files")


def pytest_collection_modifyitems(config, items):
    """Modify test collection to add markers automatically."""
    for item in items:
        # Add unit marker to unit tests
        if "unit" in str(item.fspath):
            item.add_marker(pytest.mark.unit)

        # Add integration marker to integration tests
        if "integration" in str(item.fspath):
            item.add_marker(pytest.mark.integration)

        # Add validation marker to validation tests
        if "validation" in str(item.fspath):
            item.add_marker(pytest.mark.validation)
