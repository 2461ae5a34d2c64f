"""
Stance treatments: the item sets audit accounts interact with.

Selection pools the unique top-k featured results of every audit query, groups
them by normalized stance and keeps the most rated items ("most rated" meaning
highest num_ratings) of each group:

    pro / neutral / anti : top 12 of the stance group, most rated first
    mix                  : top 4 of each stance group, shuffled with the run seed
"""

from __future__ import annotations

import logging
from enum import Enum
from typing import Dict, List, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, field_validator

from corpus_service.annotation import STANCE_NAMES
from corpus_service.queries import AnnotatedQuery
from platform_service.adapter import PlatformAdapter
from platform_service.catalog import Catalog
from scoring_service.pages import DEFAULT_PAGE_SIZE, SearchAlgorithm
from utils.errors import ConfigurationError, InsufficientCorpusError

logger = logging.getLogger(__name__)

TREATMENT_SIZE = 12
MIX_PER_STANCE = 4
PROBE_ACCOUNT = "treatment-probe"


class TreatmentName(str, Enum):
    PRO = "pro"
    NEUTRAL = "neutral"
    ANTI = "anti"
    MIX = "mix"


class Treatment(BaseModel):
    name: TreatmentName
    items: List[str]

    @field_validator("items")
    @classmethod
    def _check_items(cls, v: List[str]) -> List[str]:
        if len(v) != TREATMENT_SIZE:
            raise ValueError(f"a treatment holds exactly {TREATMENT_SIZE} items, got {len(v)}")
        if len(set(v)) != len(v):
            raise ValueError("treatment items must be distinct")
        return v


def pool_search_results(
    catalog: Catalog,
    queries: Sequence[AnnotatedQuery],
    platform: PlatformAdapter,
    k: int = DEFAULT_PAGE_SIZE,
    account_id: str = PROBE_ACCOUNT,
) -> Dict[int, List[str]]:
    """Unique featured results of all queries, grouped by normalized stance."""
    platform.register_account(account_id)
    seen: set[str] = set()
    groups: Dict[int, List[str]] = {1: [], 0: [], -1: []}
    for q in queries:
        page = platform.search(account_id, q.text, SearchAlgorithm.FEATURED, k)
        for item_id in page.item_ids:
            if item_id in seen:
                continue
            seen.add(item_id)
            stance = catalog.get(item_id).stance
            if stance is not None:
                groups[stance].append(item_id)
    logger.info(
        f"[EXPERIMENT] Pooled {len(seen)} unique search results "
        f"(pro={len(groups[1])}, neutral={len(groups[0])}, anti={len(groups[-1])})"
    )
    return groups


def most_rated(catalog: Catalog, item_ids: Sequence[str], count: int, stance_name: str) -> List[str]:
    ordered = sorted(item_ids, key=lambda i: (-catalog.get(i).num_ratings, i))
    if len(ordered) < count:
        raise InsufficientCorpusError(stance_name, len(ordered), count)
    return ordered[:count]


def build_mix(stance_treatments: Mapping[int, List[str]], seed: int) -> List[str]:
    picked = [i for stance in (1, 0, -1) for i in stance_treatments[stance][:MIX_PER_STANCE]]
    order = np.random.default_rng(seed).permutation(len(picked))
    return [picked[int(j)] for j in order]


def select_treatments(
    catalog: Catalog,
    queries: Sequence[AnnotatedQuery],
    platform: PlatformAdapter,
    k: int = DEFAULT_PAGE_SIZE,
    seed: int = 0,
) -> Dict[str, Treatment]:
    """Select the four stance treatments from the pooled search results.

    Raises:
        ConfigurationError: If no queries are given.
        InsufficientCorpusError: If a stance group has fewer than 12 items.
    """
    if not queries:
        raise ConfigurationError("[EXPERIMENT] Treatment selection needs at least one query.")
    groups = pool_search_results(catalog, queries, platform, k)
    per_stance = {
        stance: most_rated(catalog, groups[stance], TREATMENT_SIZE, STANCE_NAMES[stance])
        for stance in (1, 0, -1)
    }
    treatments = {
        STANCE_NAMES[stance]: Treatment(name=TreatmentName(STANCE_NAMES[stance]), items=items)
        for stance, items in per_stance.items()
    }
    treatments["mix"] = Treatment(name=TreatmentName.MIX, items=build_mix(per_stance, seed))
    return treatments
