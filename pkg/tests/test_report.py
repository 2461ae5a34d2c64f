from __future__ import annotations

import datetime
import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import pytest

from corpus_service.annotation import AnnotationClass
from corpus_service.queries import AnnotatedQuery
from experiment_service.plan import ActivityKind, PlanOverrides, build_plan
from experiment_service.protocol import run_protocol
from experiment_service.runlog import CapturedPage, PageKind, RunLog
from experiment_service.treatments import select_treatments
from platform_service.catalog import Catalog, default_queries, generate_catalog
from platform_service.config import PersonalizationConfig
from platform_service.simulator import SimulatedMarketplace
from report_service.analysis import AnalysisReport, analyze
from report_service.cli import EXIT_CONFIG, EXIT_DATA, EXIT_FAILURE, EXIT_OK, main
from report_service.frequency import frequency_table
from report_service.writers import load_analysis, report_json, save_analysis, write_report
from scoring_service.pages import SearchAlgorithm, SerpPage, rank_items
from utils.errors import AnnotationGapError, ConfigurationError, DomainError, TransientPlatformError
from utils.file_helpers import read_jsonl, write_jsonl, write_text


def run_audit(
    catalog: Catalog,
    queries: List[AnnotatedQuery],
    seed: int,
    days: int,
    bubble_weight: float = 2.0,
    sweep: bool = True,
    max_queries: Optional[int] = None,
) -> RunLog:
    config = PersonalizationConfig(homepage_bubble_weight=bubble_weight, rng_seed=seed)
    platform = SimulatedMarketplace(catalog, config)
    treatments = select_treatments(catalog, queries, platform, seed=seed)
    overrides = PlanOverrides(days=days, algorithm_sweep=sweep, max_queries=max_queries)
    plan = build_plan(treatments, queries, overrides)
    return run_protocol(plan, platform, retries=3)


def _means(groups) -> Dict[str, float]:
    return {k: v.mean for k, v in groups.items()}


@pytest.fixture(scope="module")
def bubble_run(catalog: Catalog, queries: List[AnnotatedQuery]) -> RunLog:
    return run_audit(catalog, queries, seed=7, days=2)


@pytest.fixture(scope="module")
def bubble_report(bubble_run: RunLog, catalog: Catalog) -> AnalysisReport:
    return analyze(bubble_run, catalog.annotations(), catalog=catalog)


# -------------------------------
# Frequency tables
# -------------------------------
def test_frequency_table_examples() -> None:
    assert frequency_table([-1.0, 1.0], bins=2).counts == [1, 1]
    assert frequency_table([0.0, 0.0, 0.0], bins=4).total == 3
    table = frequency_table([-1.0, 0.0, 1.0], bins=4)
    assert table.edges == [-1.0, -0.5, 0.0, 0.5, 1.0]
    assert table.rows()[0] == {"bin_low": -1.0, "bin_high": -0.5, "count": 1}


def test_uniform_grid_fills_bins_evenly() -> None:
    table = frequency_table(np.linspace(-1.0, 1.0, 201).tolist(), bins=4)
    assert table.total == 201
    assert max(table.counts) - min(table.counts) <= 1


def test_frequency_table_needs_a_bin() -> None:
    with pytest.raises(DomainError):
        frequency_table([0.0], bins=0)


# -------------------------------
# Analysis
# -------------------------------
def test_bubble_run_separates_treatments_on_the_homepage_only(bubble_report: AnalysisReport) -> None:
    fserp = bubble_report.rq3.fserp_ms
    serp = bubble_report.rq3.serp_ms
    assert fserp.tests.kruskal_wallis.p_value < 0.01
    assert serp.tests.kruskal_wallis.p_value > 0.05
    means = _means(fserp.groups)
    assert means["pro"] > means["mix"] > means["anti"]
    assert means["pro"] > 0.5 and means["anti"] < -0.5


def test_search_results_do_not_depend_on_activity(bubble_report: AnalysisReport) -> None:
    assert bubble_report.rq2.serp_ms.tests.kruskal_wallis.p_value > 0.05
    assert set(bubble_report.rq2.serp_ms.groups) == {a.value for a in ActivityKind}


def test_search_only_homepages_score_zero(bubble_report: AnalysisReport) -> None:
    search_only = bubble_report.rq2.fserp_ms.groups["search_only"]
    assert search_only.mean == 0.0
    assert search_only.min == search_only.max == 0.0


def test_serp_scores_follow_query_stance(bubble_report: AnalysisReport) -> None:
    means = _means(bubble_report.rq1b.groups)
    assert means["pro"] > means["neutral"] > means["anti"]
    assert bubble_report.rq1b.tests.kruskal_wallis.p_value < 0.01
    assert len(bubble_report.rq1b.tests.pairwise) == 3


def test_algorithm_section_covers_every_algorithm(bubble_report: AnalysisReport) -> None:
    section = bubble_report.rq1a
    assert set(section.rank_distribution) == {a.value for a in SearchAlgorithm}
    for by_stance in section.rank_distribution.values():
        assert set(by_stance) == {"pro", "neutral", "anti"}
        assert all(len(percent) == 20 for percent in by_stance.values())
    assert set(section.rank_tests) == {"pro", "neutral", "anti"}


def test_popularity_section_reflects_the_rating_pattern(bubble_report: AnalysisReport) -> None:
    ratings = bubble_report.rq1c.search_items["avg_rating"]
    assert ratings["pro"].mean > ratings["anti"].mean
    assert "search.num_ratings" in bubble_report.rq1c.tests


def test_counts_are_conserved(bubble_run: RunLog, bubble_report: AnalysisReport) -> None:
    counts = bubble_report.counts
    assert counts["serps"] == 13 * 29 * 2
    assert counts["scored_serps"] + counts["scored_homepages"] + counts["scored_sweep_serps"] + counts[
        "undefined"
    ] == counts["serps"] + counts["homepages"] + counts["sweep_serps"]
    assert len(bubble_report.scores) == counts["scored_serps"] + counts["scored_homepages"] + counts["scored_sweep_serps"]


def test_without_bubble_weight_homepages_do_not_separate(catalog: Catalog, queries) -> None:
    runlog = run_audit(catalog, queries, seed=7, days=2, bubble_weight=0.0, sweep=False, max_queries=4)
    report = analyze(runlog, catalog.annotations())
    assert report.rq3.fserp_ms.tests.kruskal_wallis.p_value > 0.05
    assert report.rq1a is None and report.rq1c is None


def test_all_neutral_annotations_give_null_results(bubble_run: RunLog, catalog: Catalog) -> None:
    neutral = {item.item_id: AnnotationClass.NEUTRAL for item in catalog}
    report = analyze(bubble_run, neutral)
    assert {s.score for s in report.scores} == {0.0}
    for section in (report.rq2, report.rq3):
        for comparison in (section.serp_ms, section.fserp_ms):
            assert comparison.tests.kruskal_wallis.p_value == 1.0


def test_smoke_one_day_run(catalog: Catalog, queries) -> None:
    runlog = run_audit(catalog, queries, seed=3, days=1, sweep=False, max_queries=2)
    report = analyze(runlog, catalog.annotations(), catalog=catalog, bins=5)
    assert report.counts["serps"] == 26
    assert report.frequency["serp_ms"].total == report.counts["scored_serps"]
    assert report.frequency["fserp_ms"].bins == 5


def test_missing_annotations_are_listed(bubble_run: RunLog, catalog: Catalog) -> None:
    annotations = catalog.annotations()
    dropped = bubble_run.serps()[0].serp.item_ids[0]
    del annotations[dropped]
    with pytest.raises(AnnotationGapError) as info:
        analyze(bubble_run, annotations)
    assert info.value.item_ids == [dropped]


def test_pages_without_scorable_items_are_itemized() -> None:
    at = datetime.datetime(2022, 1, 3, 11)

    def serp_page(query: str, ids: List[str]) -> CapturedPage:
        return CapturedPage(
            day=0,
            account_id="search-only",
            activity=ActivityKind.SEARCH_ONLY,
            kind=PageKind.SERP,
            query=query,
            query_stance=0,
            captured_at=at,
            serp=SerpPage(query=query, results=rank_items(ids), captured_at=at),
        )

    runlog = RunLog(pages=[serp_page("vaccine", ["p", "f"]), serp_page("vaccines", ["f", "r"])])
    annotations = {"p": AnnotationClass.PRO, "f": AnnotationClass.NON_ENGLISH, "r": AnnotationClass.REMOVED}
    report = analyze(runlog, annotations)
    assert report.counts["scored_serps"] == 1
    assert [u.page_id for u in report.undefined] == ["d0/search-only/serp/featured/vaccines"]
    assert report.scores[0].score == 1.0


# -------------------------------
# Serialization
# -------------------------------
def test_json_report_is_deterministic(bubble_run: RunLog, catalog: Catalog, bubble_report: AnalysisReport) -> None:
    again = analyze(bubble_run, catalog.annotations(), catalog=catalog)
    assert report_json(again) == report_json(bubble_report)
    data = json.loads(report_json(bubble_report))
    assert list(data) == sorted(data)
    assert "scores" not in data


def test_saved_analysis_reloads_identically(tmp_path: Path, bubble_report: AnalysisReport) -> None:
    save_analysis(tmp_path / "analysis.json", bubble_report)
    loaded = load_analysis(tmp_path / "analysis.json")
    assert report_json(loaded) == report_json(bubble_report)
    assert len(loaded.scores) == len(bubble_report.scores)


def test_csv_report_tables(tmp_path: Path, bubble_report: AnalysisReport) -> None:
    paths = write_report(bubble_report, tmp_path, "csv")
    assert sorted(p.name for p in paths) == ["frequency.csv", "scores.csv", "tests.csv", "undefined.csv"]
    scores = pd.read_csv(tmp_path / "scores.csv")
    assert len(scores) == len(bubble_report.scores)
    assert {"day", "account_id", "activity", "treatment", "capture_label", "query", "score"} <= set(scores.columns)
    tests = pd.read_csv(tmp_path / "tests.csv")
    assert "rq3.fserp_ms" in set(tests["section"])
    with pytest.raises(ConfigurationError):
        write_report(bubble_report, tmp_path, "xlsx")


# -------------------------------
# Command line
# -------------------------------
def test_cli_pipeline(tmp_path: Path) -> None:
    data, run, report = tmp_path / "data", tmp_path / "run", tmp_path / "report"
    write_text(tmp_path / "plan.yaml", "days: 1\nmax_queries: 2\nalgorithm_sweep: false\n")

    assert main(["gen-catalog", "--seed", "7", "--out", str(data)]) == EXIT_OK
    assert len(read_jsonl(data / "queries.jsonl", label="TEST")) == len(default_queries())

    assert main([
        "run", "--plan", str(tmp_path / "plan.yaml"), "--catalog", str(data / "catalog.jsonl"),
        "--seed", "7", "--out", str(run),
    ]) == EXIT_OK
    assert (run / "events.jsonl").exists() and (run / "plan.json").exists()

    assert main([
        "analyze", "--run", str(run), "--annotations", str(data / "annotations.jsonl"),
        "--catalog", str(data / "catalog.jsonl"), "--out", str(run),
    ]) == EXIT_OK
    assert main(["report", "--analysis", str(run / "analysis.json"), "--format", "csv", "--out", str(report)]) == EXIT_OK
    assert (report / "scores.csv").exists()
    assert main(["report", "--analysis", str(run / "analysis.json"), "--out", str(report)]) == EXIT_OK
    assert json.loads((report / "report.json").read_text(encoding="utf-8"))["counts"]["serps"] == 26


def test_cli_curate(tmp_path: Path) -> None:
    write_jsonl(tmp_path / "ac.jsonl", [
        {"text": "vaccines", "source": "autocomplete", "seed": "vaccine"},
        {"text": "vaccine", "source": "autocomplete", "seed": "vaccine"},
        {"text": "vaccines did not cause rachels autism", "source": "autocomplete", "seed": "vaccine"},
    ])
    code = main([
        "curate", "--provider", f"autocomplete={tmp_path / 'ac.jsonl'}",
        "--topic", "vaccine", "--seeds", "vaccine", "--out", str(tmp_path / "corpus"),
    ])
    assert code == EXIT_OK
    assert [r["text"] for r in read_jsonl(tmp_path / "corpus" / "shortlist.jsonl", label="TEST")] == ["vaccines"]
    assert len(read_jsonl(tmp_path / "corpus" / "candidates.jsonl", label="TEST")) == 3


def test_cli_exit_codes(tmp_path: Path) -> None:
    assert main(["run", "--catalog", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path / "run")]) == EXIT_CONFIG
    assert main(["curate", "--provider", "nonsense", "--topic", "x", "--seeds", "x", "--out", str(tmp_path)]) == EXIT_CONFIG

    write_text(tmp_path / "plan.yaml", "dayz: 1\n")
    catalog = tmp_path / "catalog.jsonl"
    write_jsonl(catalog, [{"item_id": "a", "title": "a", "stance_class": 9}])
    assert main(["run", "--plan", str(tmp_path / "plan.yaml"), "--catalog", str(catalog), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["run", "--catalog", str(catalog), "--out", str(tmp_path / "run")]) == EXIT_DATA

    record = {"item_id": "a", "title": "a", "stance_class": 1, "avg_rating": 4.0, "num_ratings": 3, "price": 5.0, "arrival_date": 1}
    duplicated = tmp_path / "duplicated.jsonl"
    write_jsonl(duplicated, [record, record])
    assert main(["run", "--catalog", str(duplicated), "--out", str(tmp_path / "dup-run")]) == EXIT_DATA


def test_cli_aborted_run_exits_with_failure(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    data, run = tmp_path / "data", tmp_path / "run"
    assert main(["gen-catalog", "--seed", "7", "--out", str(data)]) == EXIT_OK
    write_text(tmp_path / "plan.yaml", "days: 1\nmax_queries: 1\nalgorithm_sweep: false\n")

    def unavailable(self, account_id: str, item_id: str):
        raise TransientPlatformError(f"[PLATFORM] {account_id} could not open {item_id}")

    monkeypatch.setattr(SimulatedMarketplace, "browse", unavailable)
    code = main([
        "run", "--plan", str(tmp_path / "plan.yaml"), "--catalog", str(data / "catalog.jsonl"),
        "--seed", "7", "--out", str(run),
    ])
    assert code == EXIT_FAILURE
    assert (run / "events.jsonl").exists()
    assert not (run / "pages.jsonl").exists()


# -------------------------------
# End to end over several seeds
# -------------------------------
def _detects_bubble(seed: int) -> Tuple[bool, bool]:
    catalog = generate_catalog(seed)
    queries = default_queries()
    bubble = analyze(run_audit(catalog, queries, seed, days=14, sweep=False), catalog.annotations())
    flat = analyze(
        run_audit(catalog, queries, seed, days=2, bubble_weight=0.0, sweep=False, max_queries=6), catalog.annotations()
    )
    fserp = _means(bubble.rq3.fserp_ms.groups)
    detected = (
        bubble.rq3.fserp_ms.tests.kruskal_wallis.p_value < 0.01
        and fserp["pro"] > fserp["mix"] > fserp["anti"]
        and bubble.rq3.serp_ms.tests.kruskal_wallis.p_value > 0.05
        and bubble.rq2.serp_ms.tests.kruskal_wallis.p_value > 0.05
        and abs(bubble.rq2.fserp_ms.groups["search_only"].mean) <= 1e-12
    )
    stance = _means(bubble.rq1b.groups)
    detected = detected and stance["pro"] > stance["neutral"] > stance["anti"]
    return detected, flat.rq3.fserp_ms.tests.kruskal_wallis.p_value > 0.05


@pytest.mark.slow
def test_bubble_detection_holds_across_seeds() -> None:
    outcomes = [_detects_bubble(seed) for seed in range(20)]
    assert sum(d for d, _ in outcomes) >= 18
    assert all(f for _, f in outcomes)
