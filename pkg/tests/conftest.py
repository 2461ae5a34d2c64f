from __future__ import annotations

from typing import List

import pytest

from corpus_service.queries import AnnotatedQuery
from platform_service.adapter import UserState
from platform_service.catalog import Catalog, default_queries, generate_catalog
from platform_service.config import PersonalizationConfig
from platform_service.simulator import SimulatedMarketplace


@pytest.fixture(scope="session")
def catalog() -> Catalog:
    return generate_catalog(seed=7)


@pytest.fixture(scope="session")
def queries() -> List[AnnotatedQuery]:
    return default_queries()


@pytest.fixture
def config() -> PersonalizationConfig:
    return PersonalizationConfig(rng_seed=7)


@pytest.fixture
def marketplace(catalog: Catalog, config: PersonalizationConfig) -> SimulatedMarketplace:
    return SimulatedMarketplace(catalog, config)


@pytest.fixture
def user() -> UserState:
    return UserState(account_id="tester")
