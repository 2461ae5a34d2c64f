"""
Non-parametric tests over misinformation-score samples.

    mann_whitney_u   two groups; exact enumeration over mid-rank labelings for
                     small samples, otherwise normal approximation with tie
                     and continuity correction
    kruskal_wallis   k >= 2 groups; tie-corrected H, chi-squared p-value
    tukey_hsd        pairwise post-hoc on joint mid-ranks (Tukey-Kramer)

Every test returns a TestResult whose describe() renders the usual reporting
form, e.g. "Kruskal-Wallis H(3)≈12.3, p≈0.0064".
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import special, stats

from stats_service.studentized_range import critical_value, upper_tail
from utils.errors import DomainError

EXACT_MAX_N = 16


@dataclass(frozen=True)
class Sample:
    label: str
    values: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if not values:
            raise DomainError(f"[STATS] Sample '{self.label}' is empty.")
        if not all(math.isfinite(v) for v in values):
            raise DomainError(f"[STATS] Sample '{self.label}' contains non-finite values.")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))


class TestKind(str, Enum):
    __test__ = False

    MANN_WHITNEY_U = "mann_whitney_u"
    KRUSKAL_WALLIS = "kruskal_wallis"
    TUKEY_HSD = "tukey_hsd"


class PairwiseComparison(BaseModel):
    a: str
    b: str
    difference: float
    statistic: float
    p_value: float = Field(ge=0.0, le=1.0)
    significant: bool


class TestResult(BaseModel):
    __test__ = False

    test: TestKind
    statistic: float
    df: Optional[int] = None
    p_value: float = Field(ge=0.0, le=1.0)
    group_means: Dict[str, float] = Field(default_factory=dict)
    group_sizes: Dict[str, int] = Field(default_factory=dict)
    pairwise: Optional[List[PairwiseComparison]] = None
    z_score: Optional[float] = None
    alpha: Optional[float] = None
    critical_value: Optional[float] = None
    metadata: Dict[str, str] = Field(default_factory=dict)

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha

    def describe(self) -> str:
        p = f"p≈{self.p_value:.2g}"
        if self.test == TestKind.KRUSKAL_WALLIS:
            return f"Kruskal-Wallis H({self.df})≈{self.statistic:.3g}, {p}"
        if self.test == TestKind.MANN_WHITNEY_U:
            return f"Mann-Whitney U={self.statistic:.3g}, {p} ({self.metadata.get('method', '')})"
        pairs = self.pairwise or []
        n_sig = sum(c.significant for c in pairs)
        return (
            f"Tukey HSD q_max≈{self.statistic:.3g} (critical {self.critical_value:.3g}), "
            f"{n_sig}/{len(pairs)} pairs significant"
        )


# -------------------------------
# Ranks
# -------------------------------
def rank_with_ties(values: Sequence[float]) -> List[float]:
    """Mid-ranks 1..n; tied values share the mean of their positions."""
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("[STATS] Cannot rank non-finite values.")
    if arr.size == 0:
        return []
    return stats.rankdata(arr, method="average").tolist()


def _tie_sum(values: Sequence[float]) -> float:
    return float(sum(t ** 3 - t for t in Counter(values).values()))


def _check_groups(groups: Sequence[Sample], test: str) -> None:
    if len(groups) < 2:
        raise DomainError(f"[STATS] {test} needs at least 2 groups, got {len(groups)}.")
    labels = [g.label for g in groups]
    if len(set(labels)) != len(labels):
        raise DomainError(f"[STATS] {test} group labels must be unique: {labels}")


def chi_squared_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-squared distribution."""
    if df < 1:
        raise DomainError(f"[STATS] chi-squared df must be >= 1, got {df}.")
    if x < 0 or not math.isfinite(x):
        if math.isinf(x) and x > 0:
            return 0.0
        raise DomainError(f"[STATS] chi-squared statistic must be finite and >= 0, got {x}.")
    if x == 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


# -------------------------------
# Mann-Whitney U
# -------------------------------
@lru_cache(maxsize=256)
def _u_distribution(ranks: Tuple[float, ...], n_a: int) -> Tuple[float, ...]:
    """U_a over every way of drawing n_a of the pooled (mid-)ranks as group a."""
    offset = n_a * (n_a + 1) / 2.0
    return tuple(sum(combo) - offset for combo in itertools.combinations(ranks, n_a))


def exact_mann_whitney_p(u: float, n_a: int, n_b: int, ranks: Optional[Sequence[float]] = None) -> float:
    """Two-sided exact p: share of labelings whose min(U, n_a*n_b - U) <= u.

    `ranks` are the pooled mid-ranks; without them the tie-free ranks 1..n are used.
    """
    pooled = tuple(sorted(ranks)) if ranks is not None else tuple(float(r) for r in range(1, n_a + n_b + 1))
    if len(pooled) != n_a + n_b:
        raise DomainError(f"[STATS] Expected {n_a + n_b} pooled ranks, got {len(pooled)}.")
    values = _u_distribution(pooled, n_a)
    nn = n_a * n_b
    hits = sum(1 for ua in values if min(ua, nn - ua) <= u + 1e-9)
    return min(1.0, hits / len(values))


def mann_whitney_u(a: Sample, b: Sample) -> TestResult:
    n_a, n_b = len(a), len(b)
    n = n_a + n_b
    combined = list(a.values) + list(b.values)
    ranks = rank_with_ties(combined)
    u_a = sum(ranks[:n_a]) - n_a * (n_a + 1) / 2.0
    nn = n_a * n_b
    u = min(u_a, nn - u_a)

    mu = nn / 2.0
    sigma = math.sqrt(nn / 12.0 * ((n + 1) - _tie_sum(combined) / (n * (n - 1))))
    z = (u_a - mu) / sigma if sigma > 0 else 0.0

    if n <= EXACT_MAX_N:
        method = "exact"
        p = exact_mann_whitney_p(u, n_a, n_b, ranks)
    else:
        method = "normal"
        if sigma > 0:
            z_cc = max(abs(u_a - mu) - 0.5, 0.0) / sigma
            p = min(1.0, 2.0 * float(stats.norm.sf(z_cc)))
        else:
            p = 1.0

    return TestResult(
        test=TestKind.MANN_WHITNEY_U,
        statistic=u,
        p_value=p,
        z_score=z,
        group_means={a.label: a.mean, b.label: b.mean},
        group_sizes={a.label: n_a, b.label: n_b},
        metadata={"method": method, "continuity_correction": str(method == "normal").lower()},
    )


# -------------------------------
# Kruskal-Wallis H
# -------------------------------
def kruskal_wallis(groups: Sequence[Sample]) -> TestResult:
    _check_groups(groups, "Kruskal-Wallis")
    combined = [v for g in groups for v in g.values]
    n = len(combined)
    ranks = rank_with_ties(combined)

    term = 0.0
    start = 0
    for g in groups:
        r = sum(ranks[start:start + len(g)])
        term += r * r / len(g)
        start += len(g)
    h = 12.0 / (n * (n + 1)) * term - 3.0 * (n + 1)

    correction = 1.0 - _tie_sum(combined) / (n ** 3 - n) if n > 1 else 0.0
    k = len(groups)
    if correction <= 0:
        h, p = 0.0, 1.0
    else:
        h = max(h / correction, 0.0)
        if h < 1e-12:
            h = 0.0
        p = chi_squared_sf(h, k - 1)

    return TestResult(
        test=TestKind.KRUSKAL_WALLIS,
        statistic=h,
        df=k - 1,
        p_value=p,
        group_means={g.label: g.mean for g in groups},
        group_sizes={g.label: len(g) for g in groups},
    )


# -------------------------------
# Tukey HSD on ranks
# -------------------------------
def tukey_hsd(groups: Sequence[Sample], alpha: float = 0.05) -> TestResult:
    """Tukey-Kramer comparisons of mean joint ranks between every pair of groups.

    The overall statistic is the largest pairwise q and p_value its
    studentized-range upper tail.

    Raises:
        DomainError: alpha outside (0, 1), fewer than 2 groups, or no error
            degrees of freedom (every group of size 1).
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"[STATS] alpha must lie in (0, 1), got {alpha}.")
    _check_groups(groups, "Tukey HSD")
    k = len(groups)
    combined = [v for g in groups for v in g.values]
    n = len(combined)
    dof = n - k
    if dof < 1:
        raise DomainError("[STATS] Tukey HSD needs more observations than groups.")

    ranks = np.asarray(rank_with_ties(combined))
    rank_means: List[float] = []
    sse = 0.0
    start = 0
    for g in groups:
        r = ranks[start:start + len(g)]
        rank_means.append(float(r.mean()))
        sse += float(((r - r.mean()) ** 2).sum())
        start += len(g)
    mse = sse / dof
    crit = critical_value(alpha, k, dof)

    pairs: List[PairwiseComparison] = []
    for i, j in itertools.combinations(range(k), 2):
        diff_rank = rank_means[i] - rank_means[j]
        se = math.sqrt(mse / 2.0 * (1.0 / len(groups[i]) + 1.0 / len(groups[j])))
        if se > 0:
            q = abs(diff_rank) / se
        else:
            q = 0.0 if diff_rank == 0 else math.inf
        pairs.append(
            PairwiseComparison(
                a=groups[i].label,
                b=groups[j].label,
                difference=groups[i].mean - groups[j].mean,
                statistic=q,
                p_value=upper_tail(q, k, dof),
                significant=q > crit,
            )
        )

    q_max = max(c.statistic for c in pairs)
    return TestResult(
        test=TestKind.TUKEY_HSD,
        statistic=q_max,
        df=dof,
        p_value=upper_tail(q_max, k, dof),
        group_means={g.label: g.mean for g in groups},
        group_sizes={g.label: len(g) for g in groups},
        pairwise=pairs,
        alpha=alpha,
        critical_value=crit,
        metadata={"transform": "rank", "rank_means": ", ".join(f"{m:.4g}" for m in rank_means)},
    )
