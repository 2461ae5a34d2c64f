"""
Scoring and statistical analysis of a run log.

Every captured SERP gets a SERP-MS and every homepage an FSERP-MS. Scores are
then grouped per research question:

    rq1a  search algorithms: rank distribution of each stance per algorithm
          (algorithm sweep), Kruskal-Wallis + Tukey over the ranks
    rq1b  SERP-MS by query stance
    rq1c  avg_rating / num_ratings by stance for search and recommendation items
    rq2   SERP-MS and FSERP-MS (after-search homepages) by account activity
    rq3   the same by stance treatment

Multi-group comparisons run Kruskal-Wallis followed by Tukey HSD; every pair of
groups additionally gets a Mann-Whitney U test.
"""

from __future__ import annotations

import itertools
import logging
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import pandas as pd
from pydantic import BaseModel, Field

from corpus_service.annotation import STANCE_NAMES, AnnotationClass
from experiment_service.plan import ActivityKind
from experiment_service.runlog import CapturedPage, PageKind, RunLog
from experiment_service.treatments import TreatmentName
from platform_service.catalog import Catalog
from report_service.frequency import FrequencyTable, frequency_table
from scoring_service.pages import CaptureLabel, SearchAlgorithm, annotate_federated, annotate_serp
from scoring_service.scores import fserp_ms, serp_ms
from stats_service.nonparametric import Sample, TestResult, kruskal_wallis, mann_whitney_u, tukey_hsd
from utils.errors import AnnotationGapError, DomainError, UndefinedScoreError

logger = logging.getLogger(__name__)

STANCE_ORDER = ("pro", "neutral", "anti")
ACTIVITY_ORDER = tuple(a.value for a in ActivityKind)
TREATMENT_ORDER = tuple(t.value for t in TreatmentName)


# -------------------------------
# Report types
# -------------------------------
class ScoredPage(BaseModel):
    page_id: str
    day: int
    account_id: str
    activity: str
    treatment: Optional[str] = None
    kind: str
    capture_label: Optional[str] = None
    query: Optional[str] = None
    query_stance: Optional[int] = None
    algorithm: Optional[str] = None
    score: float


class UndefinedScore(BaseModel):
    page_id: str
    reason: str


class GroupSummary(BaseModel):
    count: int
    mean: float
    std: float
    median: float
    min: float
    max: float


class TestBattery(BaseModel):
    __test__ = False

    kruskal_wallis: Optional[TestResult] = None
    tukey_hsd: Optional[TestResult] = None
    pairwise: List[TestResult] = Field(default_factory=list)
    summary: List[str] = Field(default_factory=list)


class ScoreComparison(BaseModel):
    groups: Dict[str, GroupSummary] = Field(default_factory=dict)
    tests: TestBattery = Field(default_factory=TestBattery)


class AlgorithmSection(BaseModel):
    serp_ms: Dict[str, GroupSummary] = Field(default_factory=dict)
    # algorithm -> stance -> percent of results at rank r (index r-1)
    rank_distribution: Dict[str, Dict[str, List[float]]] = Field(default_factory=dict)
    rank_tests: Dict[str, TestBattery] = Field(default_factory=dict)


class PopularitySection(BaseModel):
    search_items: Dict[str, Dict[str, GroupSummary]] = Field(default_factory=dict)
    recommendation_items: Dict[str, Dict[str, GroupSummary]] = Field(default_factory=dict)
    tests: Dict[str, TestBattery] = Field(default_factory=dict)


class ActivitySection(BaseModel):
    serp_ms: ScoreComparison = Field(default_factory=ScoreComparison)
    fserp_ms: ScoreComparison = Field(default_factory=ScoreComparison)


class AnalysisReport(BaseModel):
    counts: Dict[str, int] = Field(default_factory=dict)
    undefined: List[UndefinedScore] = Field(default_factory=list)
    rq1a: Optional[AlgorithmSection] = None
    rq1b: ScoreComparison = Field(default_factory=ScoreComparison)
    rq1c: Optional[PopularitySection] = None
    rq2: ActivitySection = Field(default_factory=ActivitySection)
    rq3: ActivitySection = Field(default_factory=ActivitySection)
    frequency: Dict[str, FrequencyTable] = Field(default_factory=dict)
    scores: List[ScoredPage] = Field(default_factory=list, exclude=True)

    def scores_frame(self) -> pd.DataFrame:
        return scores_frame(self.scores)


# -------------------------------
# Scoring
# -------------------------------
def _all_item_ids(pages: Iterable[CapturedPage]) -> List[str]:
    out: List[str] = []
    for p in pages:
        out.extend(p.serp.item_ids if p.kind == PageKind.SERP else p.homepage.item_ids)
    return out


def check_annotations(runlog: RunLog, annotations: Mapping[str, AnnotationClass]) -> None:
    missing = {i for i in _all_item_ids([*runlog.pages, *runlog.sweep]) if i not in annotations}
    if missing:
        raise AnnotationGapError(missing)


def score_page(page: CapturedPage, annotations: Mapping[str, AnnotationClass]) -> ScoredPage:
    """Score one captured page.

    Raises:
        UndefinedScoreError: Nothing scorable remains after dropping class 3/4 items.
    """
    if page.kind == PageKind.SERP:
        score = serp_ms(annotate_serp(page.serp, annotations))
        algorithm = page.serp.algorithm.value
    else:
        score = fserp_ms(annotate_federated(page.homepage, annotations))
        algorithm = None
    return ScoredPage(
        page_id=page.page_id,
        day=page.day,
        account_id=page.account_id,
        activity=page.activity.value,
        treatment=page.treatment,
        kind=page.kind.value,
        capture_label=page.label.value if page.label else None,
        query=page.query,
        query_stance=page.query_stance,
        algorithm=algorithm,
        score=score,
    )


def score_pages(
    pages: Sequence[CapturedPage],
    annotations: Mapping[str, AnnotationClass],
    undefined: List[UndefinedScore],
) -> List[ScoredPage]:
    scored: List[ScoredPage] = []
    for page in pages:
        try:
            scored.append(score_page(page, annotations))
        except UndefinedScoreError as e:
            logger.warning(f"[REPORT] Undefined score for {page.page_id}: {e}")
            undefined.append(UndefinedScore(page_id=page.page_id, reason=str(e)))
    return scored


_SCORE_COLUMNS = list(ScoredPage.model_fields)


def scores_frame(scores: Sequence[ScoredPage]) -> pd.DataFrame:
    return pd.DataFrame([s.model_dump() for s in scores], columns=_SCORE_COLUMNS)


# -------------------------------
# Grouped comparisons
# -------------------------------
def summarize(values: Sequence[float]) -> GroupSummary:
    s = pd.Series(values, dtype=float)
    return GroupSummary(
        count=int(s.count()),
        mean=float(s.mean()),
        std=float(s.std(ddof=1)) if len(s) > 1 else 0.0,
        median=float(s.median()),
        min=float(s.min()),
        max=float(s.max()),
    )


def run_battery(groups: Mapping[str, Sequence[float]], alpha: float, pairwise: bool = True) -> TestBattery:
    """Kruskal-Wallis + Tukey HSD over all non-empty groups, plus pairwise Mann-Whitney U."""
    samples = [Sample(label, tuple(v)) for label, v in groups.items() if len(v) > 0]
    battery = TestBattery()
    if len(samples) < 2:
        return battery
    battery.kruskal_wallis = kruskal_wallis(samples)
    try:
        battery.tukey_hsd = tukey_hsd(samples, alpha)
    except DomainError as e:
        logger.warning(f"[REPORT] Skipping Tukey HSD for groups {[s.label for s in samples]}: {e}")
    if pairwise:
        battery.pairwise = [mann_whitney_u(a, b) for a, b in itertools.combinations(samples, 2)]
    battery.summary = [
        t.describe() for t in (battery.kruskal_wallis, battery.tukey_hsd, *battery.pairwise) if t is not None
    ]
    return battery


def compare(frame: pd.DataFrame, by: str, order: Sequence[str], alpha: float) -> ScoreComparison:
    groups: Dict[str, List[float]] = {}
    if not frame.empty:
        for key in order:
            values = frame.loc[frame[by] == key, "score"].tolist()
            if values:
                groups[key] = values
    return ScoreComparison(
        groups={k: summarize(v) for k, v in groups.items()},
        tests=run_battery(groups, alpha),
    )


# -------------------------------
# RQ1a: algorithms
# -------------------------------
def algorithm_section(
    sweep: Sequence[CapturedPage],
    sweep_scores: Sequence[ScoredPage],
    annotations: Mapping[str, AnnotationClass],
    alpha: float,
) -> AlgorithmSection:
    section = AlgorithmSection()
    frame = scores_frame(sweep_scores)
    algorithms = [a.value for a in SearchAlgorithm]
    for algo in algorithms:
        values = frame.loc[frame["algorithm"] == algo, "score"].tolist() if not frame.empty else []
        if values:
            section.serp_ms[algo] = summarize(values)

    # ranks at which each stance appears, per algorithm (annotated ranks, class 3/4 dropped)
    ranks: Dict[str, Dict[str, List[int]]] = {s: {a: [] for a in algorithms} for s in STANCE_ORDER}
    serps_per_algo: Dict[str, int] = {a: 0 for a in algorithms}
    depth = 0
    for page in sweep:
        annotated = annotate_serp(page.serp, annotations)
        algo = page.serp.algorithm.value
        serps_per_algo[algo] += 1
        depth = max(depth, page.serp.page_size)
        for r in annotated.results:
            ranks[STANCE_NAMES[r.stance]][algo].append(r.rank)

    for algo in algorithms:
        n_serps = serps_per_algo[algo]
        if not n_serps:
            continue
        section.rank_distribution[algo] = {}
        for stance in STANCE_ORDER:
            at_rank = [0] * depth
            for r in ranks[stance][algo]:
                at_rank[r - 1] += 1
            section.rank_distribution[algo][stance] = [100.0 * c / n_serps for c in at_rank]

    for stance in STANCE_ORDER:
        section.rank_tests[stance] = run_battery(
            {a: [float(r) for r in ranks[stance][a]] for a in algorithms}, alpha, pairwise=False
        )
    return section


# -------------------------------
# RQ1c: ratings and popularity
# -------------------------------
def _metadata_by_stance(item_ids: Iterable[str], catalog: Catalog) -> Dict[str, Dict[str, List[float]]]:
    out: Dict[str, Dict[str, List[float]]] = {"avg_rating": {}, "num_ratings": {}}
    for item_id in sorted(set(item_ids)):
        if item_id not in catalog:
            continue
        item = catalog.get(item_id)
        if item.stance is None:
            continue
        stance = STANCE_NAMES[item.stance]
        out["avg_rating"].setdefault(stance, []).append(item.avg_rating)
        out["num_ratings"].setdefault(stance, []).append(float(item.num_ratings))
    return out


def popularity_section(runlog: RunLog, catalog: Catalog, alpha: float) -> PopularitySection:
    search_ids = _all_item_ids([*runlog.serps(), *runlog.sweep])
    rec_ids = _all_item_ids(runlog.homepages())
    section = PopularitySection()
    for name, ids, target in (
        ("search", search_ids, section.search_items),
        ("recommendation", rec_ids, section.recommendation_items),
    ):
        by_stance = _metadata_by_stance(ids, catalog)
        for metric, groups in by_stance.items():
            ordered = {s: groups[s] for s in STANCE_ORDER if s in groups}
            target[metric] = {s: summarize(v) for s, v in ordered.items()}
            section.tests[f"{name}.{metric}"] = run_battery(ordered, alpha, pairwise=False)
    return section


# -------------------------------
# Entry point
# -------------------------------
def analyze(
    runlog: RunLog,
    annotations: Mapping[str, AnnotationClass],
    catalog: Optional[Catalog] = None,
    alpha: float = 0.05,
    bins: int = 10,
) -> AnalysisReport:
    """Score every page of `runlog` and run the analysis battery.

    `catalog` is needed only for the rating/popularity section.

    Raises:
        AnnotationGapError: Some captured item has no annotation.
    """
    check_annotations(runlog, annotations)
    undefined: List[UndefinedScore] = []
    serps = runlog.serps()
    homepages = runlog.homepages()
    serp_scores = score_pages(serps, annotations, undefined)
    home_scores = score_pages(homepages, annotations, undefined)
    sweep_scores = score_pages(runlog.sweep, annotations, undefined)

    serp_frame = scores_frame(serp_scores)
    after_search = scores_frame([s for s in home_scores if s.capture_label == CaptureLabel.AFTER_SEARCH.value])
    if not serp_frame.empty:
        serp_frame["query_stance_name"] = serp_frame["query_stance"].map(
            lambda s: STANCE_NAMES.get(int(s)) if pd.notna(s) else None
        )
    else:
        serp_frame["query_stance_name"] = pd.Series(dtype=object)
    treated_serps = serp_frame[serp_frame["treatment"].notna()] if not serp_frame.empty else serp_frame
    treated_homes = after_search[after_search["treatment"].notna()] if not after_search.empty else after_search

    report = AnalysisReport(
        counts={
            "serps": len(serps),
            "homepages": len(homepages),
            "sweep_serps": len(runlog.sweep),
            "scored_serps": len(serp_scores),
            "scored_homepages": len(home_scores),
            "scored_sweep_serps": len(sweep_scores),
            "undefined": len(undefined),
        },
        undefined=undefined,
        rq1a=algorithm_section(runlog.sweep, sweep_scores, annotations, alpha) if runlog.sweep else None,
        rq1b=compare(serp_frame, "query_stance_name", STANCE_ORDER, alpha),
        rq1c=popularity_section(runlog, catalog, alpha) if catalog is not None else None,
        rq2=ActivitySection(
            serp_ms=compare(serp_frame, "activity", ACTIVITY_ORDER, alpha),
            fserp_ms=compare(after_search, "activity", ACTIVITY_ORDER, alpha),
        ),
        rq3=ActivitySection(
            serp_ms=compare(treated_serps, "treatment", TREATMENT_ORDER, alpha),
            fserp_ms=compare(treated_homes, "treatment", TREATMENT_ORDER, alpha),
        ),
        frequency={
            "serp_ms": frequency_table([s.score for s in serp_scores], bins),
            "fserp_ms": frequency_table([s.score for s in home_scores], bins),
        },
        scores=[*serp_scores, *home_scores, *sweep_scores],
    )
    logger.info(
        f"[REPORT] Scored {len(serp_scores)} SERPs and {len(home_scores)} homepages "
        f"({len(undefined)} undefined)"
    )
    return report
