"""
Rank-weighted misinformation scores.

SERP-MS weights the stance of the result at rank r by (n - r + 1) and divides
by n(n+1)/2, so the score lies in [-1, 1]: -1 when every result opposes
misinformation, +1 when every result promotes it.

FSERP-MS applies the same weighting one level up: each component's SERP-MS is
weighted by (m - i + 1) for the component at rank i, divided by m(m+1)/2.
"""

from __future__ import annotations

from typing import Sequence

from scoring_service.pages import FederatedPage, RankedResult, SerpPage
from utils.errors import DataError, UndefinedScoreError


def _weighted_mean(values: Sequence[float]) -> float:
    n = len(values)
    total = 0.0
    for pos, v in enumerate(values, 1):
        total += v * (n - pos + 1)
    return total / (n * (n + 1) / 2)


def _stances(results: Sequence[RankedResult], where: str) -> list[int]:
    out = []
    for r in results:
        if r.stance is None:
            raise DataError(f"[SCORING] Result '{r.item_id}' in {where} has no annotated stance.")
        out.append(r.stance)
    return out


def serp_ms(page: SerpPage) -> float:
    """SERP misinformation score of an annotated page.

    Raises:
        UndefinedScoreError: The page has no results.
        DataError: A result carries no stance.
    """
    if not page.results:
        raise UndefinedScoreError(f"[SCORING] SERP-MS is undefined for an empty SERP (query '{page.query}').")
    return _weighted_mean(_stances(page.results, f"SERP '{page.query}'"))


def fserp_ms(page: FederatedPage) -> float:
    """Federated SERP misinformation score of an annotated homepage.

    Raises:
        UndefinedScoreError: No components, or a component with no items.
    """
    if not page.components:
        raise UndefinedScoreError("[SCORING] FSERP-MS is undefined for a page without components.")
    component_scores = []
    for c in page.components:
        if not c.items:
            raise UndefinedScoreError(
                f"[SCORING] FSERP-MS is undefined: component {c.rank} ('{c.heading}') is empty."
            )
        component_scores.append(_weighted_mean(_stances(c.items, f"component '{c.heading}'")))
    return _weighted_mean(component_scores)

