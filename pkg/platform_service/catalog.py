"""
Catalog of items the simulated marketplace ranks and recommends.

Also hosts the synthetic catalog generator. The generator plants the rating
patterns reported for real marketplaces: pro-misinformation items are rated
higher than anti-misinformation items, neutral items are the most popular
topical items, and general (off-topic) merchandise is far more popular than
anything topical, so a history-free homepage is built from neutral items only.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from corpus_service.annotation import AnnotationClass, as_annotation_class, normalize_annotation
from corpus_service.queries import AnnotatedQuery
from utils.errors import DataError, ItemNotFoundError
from utils.file_helpers import read_models, write_jsonl

logger = logging.getLogger(__name__)


class Item(BaseModel):
    item_id: str
    title: str
    stance_class: AnnotationClass
    avg_rating: float = Field(ge=0.0, le=5.0)
    num_ratings: int = Field(ge=0)
    price: float = Field(ge=0.0)
    arrival_date: int
    relevance_terms: List[str] = Field(default_factory=list)

    @field_validator("stance_class", mode="before")
    @classmethod
    def _check_class(cls, v):
        return as_annotation_class(v)

    @field_validator("relevance_terms")
    @classmethod
    def _lower_terms(cls, v: List[str]) -> List[str]:
        return [t.lower() for t in v]

    @model_validator(mode="after")
    def _check_rating(self) -> "Item":
        if self.num_ratings > 0 and not (1.0 <= self.avg_rating <= 5.0):
            raise ValueError(f"avg_rating must lie in [1, 5] when rated, got {self.avg_rating}")
        if not (math.isfinite(self.price) and math.isfinite(self.avg_rating)):
            raise ValueError("price and avg_rating must be finite")
        return self

    @property
    def stance(self) -> Optional[int]:
        return normalize_annotation(self.stance_class)


class Catalog:
    """Read-only item collection with lookups used by the ranking code."""

    def __init__(self, items: Iterable[Item]) -> None:
        self._items: Dict[str, Item] = {}
        for item in items:
            if item.item_id in self._items:
                raise DataError(f"[PLATFORM] Duplicate item_id '{item.item_id}' in catalog.")
            self._items[item.item_id] = item
        # stable iteration order for deterministic ranking
        self._order: List[str] = sorted(self._items)
        self._terms: Dict[str, frozenset[str]] = {
            k: frozenset(v.relevance_terms) for k, v in self._items.items()
        }
        self.max_num_ratings: int = max((i.num_ratings for i in self._items.values()), default=0)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Item]:
        return (self._items[k] for k in self._order)

    def __contains__(self, item_id: object) -> bool:
        return item_id in self._items

    def get(self, item_id: str) -> Item:
        try:
            return self._items[item_id]
        except KeyError:
            raise ItemNotFoundError(item_id) from None

    def terms(self, item_id: str) -> frozenset[str]:
        return self._terms[item_id]

    def annotations(self) -> Dict[str, AnnotationClass]:
        return {k: self._items[k].stance_class for k in self._order}


def load_catalog(path: Path) -> Catalog:
    items = read_models(Path(path), Item, label="PLATFORM")
    catalog = Catalog(items)
    logger.info(f"[PLATFORM] Loaded {len(catalog)} items from {path}")
    return catalog


def save_catalog(path: Path, catalog: Catalog) -> int:
    return write_jsonl(Path(path), (item.model_dump(mode="json") for item in catalog))


# -------------------------------
# Synthetic catalog generator
# -------------------------------
TOPIC_TERMS = ("vaccine", "vaccines", "vaccination")

STANCE_TERMS: Dict[int, tuple[str, ...]] = {
    1: ("injury", "dangers", "truth", "exemption", "toxins"),
    0: ("history", "policy", "guide", "debate", "controversies"),
    -1: ("safety", "science", "facts", "immunization", "evidence"),
}

OFF_TOPIC_TERMS = (
    "console", "kitchen", "novel", "headphones", "toys",
    "garden", "fitness", "coffee", "camera", "shoes",
)

# (avg_rating low/high, log10 num_ratings low/high) per raw class
_RATING_PROFILE: Dict[int, tuple[float, float, float, float]] = {
    1: (4.3, 4.9, 2.0, 3.2),
    0: (3.8, 4.5, 2.5, 3.45),
    -1: (3.6, 4.4, 1.5, 2.8),
    2: (3.5, 4.9, 3.75, 4.7),
}

_STANCE_WORD = {1: "pro", 0: "neutral", -1: "anti"}

DEFAULT_QUERIES: tuple[tuple[str, int], ...] = (
    ("vaccine injury", 1),
    ("vaccine dangers", 1),
    ("vaccines truth", 1),
    ("vaccine exemption", 1),
    ("vaccine toxins", 1),
    ("vaccination dangers", 1),
    ("vaccines injury", 1),
    ("vaccination truth", 1),
    ("vaccine", 0),
    ("vaccines", 0),
    ("vaccination", 0),
    ("vaccine history", 0),
    ("vaccines policy", 0),
    ("vaccination guide", 0),
    ("vaccine debate", 0),
    ("vaccine controversies", 0),
    ("vaccination history", 0),
    ("vaccines guide", 0),
    ("vaccination policy", 0),
    ("vaccines debate", 0),
    ("vaccination controversies", 0),
    ("vaccine safety", -1),
    ("vaccines science", -1),
    ("vaccination facts", -1),
    ("vaccine immunization", -1),
    ("vaccines evidence", -1),
    ("vaccine facts", -1),
    ("vaccination safety", -1),
    ("vaccines immunization", -1),
)


def default_queries() -> List[AnnotatedQuery]:
    return [AnnotatedQuery(text=t, stance=s) for t, s in DEFAULT_QUERIES]


def _topical_item(
    rng: np.random.Generator,
    item_id: str,
    raw_class: int,
    stance: int,
    stance_terms_per_item: int,
    neutral_ratings: bool = False,
) -> Item:
    pool = STANCE_TERMS[stance]
    picked = rng.choice(len(pool), size=stance_terms_per_item, replace=False)
    terms = [TOPIC_TERMS[int(rng.integers(len(TOPIC_TERMS)))]] + [pool[int(j)] for j in sorted(picked)]
    lo, hi, nlo, nhi = _RATING_PROFILE[0 if neutral_ratings else stance]
    return Item(
        item_id=item_id,
        title=" ".join(t.capitalize() for t in terms),
        stance_class=raw_class,
        avg_rating=round(float(rng.uniform(lo, hi)), 1),
        num_ratings=int(round(10 ** rng.uniform(nlo, nhi))),
        price=round(float(rng.uniform(3.0, 40.0)), 2),
        arrival_date=int(rng.integers(1, 3650)),
        relevance_terms=terms,
    )


def generate_catalog(
    seed: int,
    n_pro: int = 60,
    n_neutral: int = 60,
    n_anti: int = 60,
    n_off_topic: int = 120,
    n_non_english: int = 4,
    n_removed: int = 4,
    stance_terms_per_item: int = 3,
    all_neutral: bool = False,
) -> Catalog:
    """Generate a deterministic synthetic catalog.

    Topical items carry one topic term ("vaccine", "vaccines" or "vaccination")
    plus `stance_terms_per_item` terms from their stance's term pool, so
    stance-bearing queries retrieve mostly items of that stance. With
    `all_neutral=True` every topical item is annotated neutral (terms and
    ratings are still drawn per pool), which yields a corpus where every score is 0.
    """
    rng = np.random.default_rng(seed)
    items: List[Item] = []
    for stance, count in ((1, n_pro), (0, n_neutral), (-1, n_anti)):
        for j in range(count):
            raw = 0 if all_neutral else stance
            items.append(
                _topical_item(
                    rng, f"{_STANCE_WORD[stance]}-{j:04d}", raw, stance,
                    stance_terms_per_item, neutral_ratings=all_neutral,
                )
            )
    for j in range(n_non_english):
        items.append(_topical_item(rng, f"foreign-{j:04d}", 3, int(rng.integers(-1, 2)), stance_terms_per_item))
    for j in range(n_removed):
        items.append(_topical_item(rng, f"removed-{j:04d}", 4, int(rng.integers(-1, 2)), stance_terms_per_item))

    lo, hi, nlo, nhi = _RATING_PROFILE[2]
    for j in range(n_off_topic):
        picked = rng.choice(len(OFF_TOPIC_TERMS), size=2, replace=False)
        terms = [OFF_TOPIC_TERMS[int(k)] for k in sorted(picked)]
        items.append(
            Item(
                item_id=f"general-{j:04d}",
                title=" ".join(t.capitalize() for t in terms),
                stance_class=AnnotationClass.OFF_TOPIC,
                avg_rating=round(float(rng.uniform(lo, hi)), 1),
                num_ratings=int(round(10 ** rng.uniform(nlo, nhi))),
                price=round(float(rng.uniform(5.0, 400.0)), 2),
                arrival_date=int(rng.integers(1, 3650)),
                relevance_terms=terms,
            )
        )
    catalog = Catalog(items)
    logger.info(f"[PLATFORM] Generated catalog with {len(catalog)} items (seed={seed})")
    return catalog
