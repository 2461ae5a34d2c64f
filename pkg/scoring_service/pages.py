"""
Ranked page types and their construction helpers.

A SerpPage is one query's ordered results; a FederatedPage is a homepage made
of ranked components, each holding ranked recommendations. Pages captured
from a platform carry item ids only (`stance=None`); `annotate_serp` and
`annotate_federated` attach normalized stances, drop items whose class has no
normalized stance (3/4) and recompact ranks to 1..n.
"""

from __future__ import annotations

import datetime
from enum import Enum
from typing import List, Mapping, Optional, Sequence, Set, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from corpus_service.annotation import AnnotationClass, normalize_annotation
from utils.errors import AnnotationGapError

DEFAULT_PAGE_SIZE = 20


class SearchAlgorithm(str, Enum):
    FEATURED = "featured"
    AVG_CUSTOMER_REVIEW = "avg_customer_review"
    PRICE_ASCENDING = "price_ascending"
    PRICE_DESCENDING = "price_descending"
    NEWEST_ARRIVALS = "newest_arrivals"


class CaptureLabel(str, Enum):
    AFTER_ACTION = "after-action"
    BEFORE_SEARCH = "before-search"
    AFTER_SEARCH = "after-search"


class RankedResult(BaseModel):
    item_id: str
    rank: int = Field(ge=1)
    stance: Optional[int] = None

    @field_validator("stance")
    @classmethod
    def _check_stance(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v not in (-1, 0, 1):
            raise ValueError(f"stance must be -1, 0 or 1, got {v}")
        return v


def _check_ranks(results: Sequence[RankedResult], what: str) -> None:
    ranks = [r.rank for r in results]
    if ranks != list(range(1, len(ranks) + 1)):
        raise ValueError(f"{what} ranks must be exactly 1..{len(ranks)}, got {ranks}")


class SerpPage(BaseModel):
    query: str
    results: List[RankedResult] = Field(default_factory=list)
    algorithm: SearchAlgorithm = SearchAlgorithm.FEATURED
    captured_at: Optional[datetime.datetime] = None
    page_size: int = Field(default=DEFAULT_PAGE_SIZE, ge=1)

    @model_validator(mode="after")
    def _check_page(self) -> "SerpPage":
        _check_ranks(self.results, "SERP result")
        if len(self.results) > self.page_size:
            raise ValueError(f"SERP has {len(self.results)} results, page size is {self.page_size}")
        return self

    @property
    def item_ids(self) -> List[str]:
        return [r.item_id for r in self.results]


class RecComponent(BaseModel):
    heading: str
    rank: int = Field(ge=1)
    items: List[RankedResult] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_items(self) -> "RecComponent":
        _check_ranks(self.items, f"component '{self.heading}' item")
        return self


class FederatedPage(BaseModel):
    components: List[RecComponent] = Field(default_factory=list)
    captured_at: Optional[datetime.datetime] = None
    capture_label: Optional[CaptureLabel] = None

    @model_validator(mode="after")
    def _check_components(self) -> "FederatedPage":
        ranks = [c.rank for c in self.components]
        if ranks != list(range(1, len(ranks) + 1)):
            raise ValueError(f"component ranks must be exactly 1..{len(ranks)}, got {ranks}")
        return self

    @property
    def item_ids(self) -> List[str]:
        return [r.item_id for c in self.components for r in c.items]


# -------------------------------
# Construction helpers
# -------------------------------
def rank_items(item_ids: Sequence[str], stances: Optional[Sequence[Optional[int]]] = None) -> List[RankedResult]:
    """Wrap an ordered id list as RankedResults with ranks 1..n."""
    if stances is None:
        stances = [None] * len(item_ids)
    return [
        RankedResult(item_id=i, rank=pos, stance=s)
        for pos, (i, s) in enumerate(zip(item_ids, stances), 1)
    ]


def serp_from_stances(stances: Sequence[int], query: str = "q", **kwargs) -> SerpPage:
    """Build a SERP directly from a stance sequence (item ids are synthetic)."""
    ids = [f"r{pos}" for pos in range(1, len(stances) + 1)]
    page_size = max(DEFAULT_PAGE_SIZE, len(stances))
    return SerpPage(query=query, results=rank_items(ids, stances), page_size=page_size, **kwargs)


def federated_from_stances(components: Sequence[Sequence[int]], **kwargs) -> FederatedPage:
    comps = []
    for i, stances in enumerate(components, 1):
        ids = [f"c{i}r{pos}" for pos in range(1, len(stances) + 1)]
        comps.append(RecComponent(heading=f"component {i}", rank=i, items=rank_items(ids, stances)))
    return FederatedPage(components=comps, **kwargs)


def _retained(
    results: Sequence[RankedResult],
    annotations: Mapping[str, AnnotationClass],
    missing: Set[str],
) -> List[Tuple[str, int]]:
    kept: List[Tuple[str, int]] = []
    for r in results:
        if r.item_id not in annotations:
            missing.add(r.item_id)
            continue
        stance = normalize_annotation(annotations[r.item_id])
        if stance is not None:
            kept.append((r.item_id, stance))
    return kept


def annotate_serp(page: SerpPage, annotations: Mapping[str, AnnotationClass]) -> SerpPage:
    """Attach normalized stances, drop ignored classes and recompact ranks.

    Raises:
        AnnotationGapError: If any result has no annotation.
    """
    missing: Set[str] = set()
    kept = _retained(page.results, annotations, missing)
    if missing:
        raise AnnotationGapError(missing)
    ids, stances = zip(*kept) if kept else ((), ())
    return page.model_copy(update={"results": rank_items(list(ids), list(stances))})


def annotate_federated(page: FederatedPage, annotations: Mapping[str, AnnotationClass]) -> FederatedPage:
    missing: Set[str] = set()
    comps: List[RecComponent] = []
    for c in page.components:
        kept = _retained(c.items, annotations, missing)
        ids, stances = zip(*kept) if kept else ((), ())
        comps.append(RecComponent(heading=c.heading, rank=c.rank, items=rank_items(list(ids), list(stances))))
    if missing:
        raise AnnotationGapError(missing)
    return page.model_copy(update={"components": comps})

