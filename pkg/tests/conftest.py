from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fedaadd.data import DatasetSpec, generate_synthetic_dataset


@pytest.fixture(scope="session")
def default_spec() -> DatasetSpec:
    return DatasetSpec(generator_seed=7)


@pytest.fixture(scope="session")
def default_dataset(default_spec):
    return generate_synthetic_dataset(default_spec)


@pytest.fixture(scope="session")
def small_dataset():
    spec = DatasetSpec(
        examples_per_client=100, test_set_size=300, num_clients=5, generator_seed=11
    )
    return spec, generate_synthetic_dataset(spec)
