"""
Personalization and layout configuration of the simulated marketplace.

The defaults reproduce the qualitative behavior audited on real marketplaces:
search results ignore user history (search_personalization_weight = 0) while
homepage recommendations follow the stance of items the user interacted with
(homepage_bubble_weight > 0). None of these weights is claimed to be a real
platform's ranking formula; they are the knobs of a documented stand-in.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from utils.errors import ConfigurationError
from utils.file_helpers import read_yaml

DEFAULT_HEADINGS = (
    "Related to items you've viewed",
    "Inspired by your shopping trends",
    "Recommended for you",
)

GENERIC_HEADINGS = (
    "Best sellers",
    "Popular right now",
    "Top rated picks",
)


class PersonalizationConfig(BaseModel):
    search_personalization_weight: float = Field(default=0.0, ge=0.0)
    homepage_bubble_weight: float = Field(default=2.0, ge=0.0)
    rating_weight: float = Field(default=0.4, ge=0.0)
    relevance_weight: float = Field(default=1.0, ge=0.0)
    stance_bonus: float = Field(default=0.5, ge=0.0)
    browse_weight: float = Field(default=1.0, ge=0.0)
    wishlist_weight: float = Field(default=0.25, ge=0.0)
    cart_weight: float = Field(default=0.5, ge=0.0)
    homepage_noise: float = Field(default=0.05, ge=0.0)
    rng_seed: int = 0

    # homepage layout
    components: int = Field(default=3, ge=1)
    items_per_component: int = Field(default=20, ge=1)
    headings: List[str] = Field(default_factory=lambda: list(DEFAULT_HEADINGS))
    generic_headings: List[str] = Field(default_factory=lambda: list(GENERIC_HEADINGS))

    @field_validator(
        "search_personalization_weight", "homepage_bubble_weight", "rating_weight",
        "relevance_weight", "stance_bonus", "browse_weight", "wishlist_weight",
        "cart_weight", "homepage_noise",
    )
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("weights must be finite")
        return v

    @model_validator(mode="after")
    def _check_headings(self) -> "PersonalizationConfig":
        if not self.headings or not self.generic_headings:
            raise ValueError("at least one component heading is required")
        return self

    def heading(self, rank: int, generic: bool = False) -> str:
        pool = self.generic_headings if generic else self.headings
        if rank <= len(pool):
            return pool[rank - 1]
        return f"{pool[-1]} ({rank})"


def load_platform_config(path: Optional[Path] = None, overrides: Optional[dict] = None) -> PersonalizationConfig:
    """Load a YAML platform configuration; keys mirror PersonalizationConfig fields.

    A `platform:` top-level key is accepted so a plan file can be passed directly.
    """
    data: dict = {}
    if path is not None:
        data = read_yaml(Path(path), label="PLATFORM")
        data = data.get("platform", data) or {}
    data = {**data, **(overrides or {})}
    try:
        return PersonalizationConfig.model_validate(data)
    except ValueError as e:
        raise ConfigurationError(f"[PLATFORM] Invalid platform configuration: {e}") from e
