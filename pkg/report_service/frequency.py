"""Frequency distributions of misinformation scores over [-1, 1]."""

from __future__ import annotations

from typing import List, Sequence

import numpy as np
from pydantic import BaseModel

from utils.errors import DomainError

SCORE_RANGE = (-1.0, 1.0)


class FrequencyTable(BaseModel):
    bins: int
    edges: List[float]
    counts: List[int]
    total: int

    def rows(self) -> List[dict]:
        return [
            {"bin_low": lo, "bin_high": hi, "count": c}
            for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts)
        ]


def frequency_table(scores: Sequence[float], bins: int) -> FrequencyTable:
    """Equal-width histogram of scores; the last bin is closed on the right."""
    if bins < 1:
        raise DomainError(f"[REPORT] bins must be >= 1, got {bins}.")
    values = np.clip(np.asarray(scores, dtype=float), *SCORE_RANGE)
    counts, edges = np.histogram(values, bins=bins, range=SCORE_RANGE)
    return FrequencyTable(
        bins=bins,
        edges=[float(e) for e in edges],
        counts=[int(c) for c in counts],
        total=int(counts.sum()),
    )
