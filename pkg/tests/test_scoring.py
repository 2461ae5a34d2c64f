from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Sequence

import numpy as np
import pytest
from pydantic import ValidationError

from corpus_service.annotation import AnnotationClass
from scoring_service.pages import (
    FederatedPage,
    RankedResult,
    RecComponent,
    SerpPage,
    annotate_federated,
    annotate_serp,
    federated_from_stances,
    rank_items,
    serp_from_stances,
)
from scoring_service.scores import fserp_ms, serp_ms
from utils.errors import AnnotationGapError, DataError, UndefinedScoreError

STANCES = (-1, 0, 1)
TOL = 1e-12


def _repeated_mean(values: Sequence) -> Fraction:
    """Mean of a list in which the value at rank r is repeated n - r + 1 times."""
    n = len(values)
    expanded = [Fraction(v) for pos, v in enumerate(values) for _ in range(n - pos)]
    return sum(expanded, Fraction(0)) / len(expanded)


# -------------------------------
# SERP-MS
# -------------------------------
@pytest.mark.parametrize(
    "stances, expected",
    [
        ([-1, -1, -1], -1.0),
        ([1, 0, -1], 1 / 3),
        ([0] * 20, 0.0),
        ([1], 1.0),
        ([-1, 1], -1 / 3),
    ],
)
def test_serp_ms_examples(stances: list[int], expected: float) -> None:
    assert serp_ms(serp_from_stances(stances)) == pytest.approx(expected, abs=TOL)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_serp_ms_matches_repeated_mean_for_every_stance_sequence(n: int) -> None:
    for stances in itertools.product(STANCES, repeat=n):
        expected = float(_repeated_mean(stances))
        assert serp_ms(serp_from_stances(stances)) == pytest.approx(expected, abs=TOL)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_serp_ms_bounds_and_antisymmetry(n: int) -> None:
    for stances in itertools.product(STANCES, repeat=n):
        score = serp_ms(serp_from_stances(stances))
        assert -1.0 <= score <= 1.0
        assert serp_ms(serp_from_stances([-s for s in stances])) == pytest.approx(-score, abs=TOL)
        assert (score == pytest.approx(1.0, abs=TOL)) == all(s == 1 for s in stances)
        assert (score == pytest.approx(-1.0, abs=TOL)) == all(s == -1 for s in stances)


def test_serp_ms_increases_when_a_stance_moves_toward_misinformation() -> None:
    for stances in itertools.product(STANCES, repeat=4):
        base = serp_ms(serp_from_stances(stances))
        for pos, s in enumerate(stances):
            if s == 1:
                continue
            raised = list(stances)
            raised[pos] = s + 1
            assert serp_ms(serp_from_stances(raised)) > base


def test_higher_ranks_weigh_more() -> None:
    assert serp_ms(serp_from_stances([1, 0, 0])) > serp_ms(serp_from_stances([0, 0, 1]))


def test_empty_serp_is_undefined() -> None:
    with pytest.raises(UndefinedScoreError):
        serp_ms(SerpPage(query="vaccine", results=[]))


def test_unannotated_result_is_a_data_error() -> None:
    with pytest.raises(DataError):
        serp_ms(SerpPage(query="vaccine", results=rank_items(["a", "b"])))


def test_serp_ranks_must_be_contiguous() -> None:
    with pytest.raises(ValidationError):
        SerpPage(
            query="vaccine",
            results=[RankedResult(item_id="a", rank=1), RankedResult(item_id="b", rank=3)],
        )


def test_serp_cannot_exceed_page_size() -> None:
    with pytest.raises(ValidationError):
        SerpPage(query="vaccine", results=rank_items(["a", "b", "c"]), page_size=2)


# -------------------------------
# FSERP-MS
# -------------------------------
def test_fserp_ms_examples() -> None:
    assert fserp_ms(federated_from_stances([[1, 0, -1]])) == pytest.approx(1 / 3, abs=TOL)
    assert fserp_ms(federated_from_stances([[1, 1], [-1, -1]])) == pytest.approx(1 / 3, abs=TOL)
    assert fserp_ms(federated_from_stances([[1, 1], [1], [1, 1, 1]])) == pytest.approx(1.0, abs=TOL)


COMPONENTS = [c for n in range(1, 6) for c in itertools.product(STANCES, repeat=n)]


def test_single_component_equals_serp_ms() -> None:
    for stances in COMPONENTS:
        assert fserp_ms(federated_from_stances([stances])) == pytest.approx(
            serp_ms(serp_from_stances(stances)), abs=TOL
        )


def _check_nested_repeated_mean(layout) -> None:
    expected = float(_repeated_mean([_repeated_mean(c) for c in layout]))
    score = fserp_ms(federated_from_stances(layout))
    assert score == pytest.approx(expected, abs=TOL)
    assert -1.0 <= score <= 1.0


@pytest.mark.parametrize("m", [1, 2])
def test_fserp_ms_matches_nested_repeated_means_for_short_components(m: int) -> None:
    short = [c for c in COMPONENTS if len(c) <= 3]
    for layout in itertools.product(short, repeat=m):
        _check_nested_repeated_mean(layout)


@pytest.mark.parametrize("seed", range(4))
def test_fserp_ms_matches_nested_repeated_means_for_random_layouts(seed: int) -> None:
    rng = np.random.default_rng(seed)
    for _ in range(250):
        m = int(rng.integers(1, 6))
        layout = [COMPONENTS[int(i)] for i in rng.integers(0, len(COMPONENTS), size=m)]
        _check_nested_repeated_mean(layout)


def test_federated_page_without_components_is_undefined() -> None:
    with pytest.raises(UndefinedScoreError):
        fserp_ms(FederatedPage(components=[]))


def test_empty_component_is_undefined() -> None:
    with pytest.raises(UndefinedScoreError):
        fserp_ms(federated_from_stances([[1, 0], []]))


def test_component_ranks_must_be_contiguous() -> None:
    with pytest.raises(ValidationError):
        FederatedPage(
            components=[
                RecComponent(heading="a", rank=1, items=rank_items(["x"], [0])),
                RecComponent(heading="b", rank=3, items=rank_items(["y"], [0])),
            ]
        )


# -------------------------------
# Annotation
# -------------------------------
ANNOTATIONS = {
    "a": AnnotationClass.PRO,
    "b": AnnotationClass.NON_ENGLISH,
    "c": AnnotationClass.ANTI,
    "d": AnnotationClass.REMOVED,
    "e": AnnotationClass.OFF_TOPIC,
}


def test_annotate_serp_drops_ignored_classes_and_recompacts_ranks() -> None:
    page = SerpPage(query="vaccine", results=rank_items(["a", "b", "c", "d", "e"]))
    annotated = annotate_serp(page, ANNOTATIONS)
    assert [(r.item_id, r.rank, r.stance) for r in annotated.results] == [
        ("a", 1, 1),
        ("c", 2, -1),
        ("e", 3, 0),
    ]
    assert serp_ms(annotated) == pytest.approx((3 - 2 + 0) / 6, abs=TOL)


def test_annotate_serp_of_only_ignored_items_leaves_an_undefined_page() -> None:
    annotated = annotate_serp(SerpPage(query="vaccine", results=rank_items(["b", "d"])), ANNOTATIONS)
    assert annotated.results == []
    with pytest.raises(UndefinedScoreError):
        serp_ms(annotated)


def test_annotate_serp_reports_every_missing_item() -> None:
    page = SerpPage(query="vaccine", results=rank_items(["a", "zz", "yy"]))
    with pytest.raises(AnnotationGapError) as info:
        annotate_serp(page, ANNOTATIONS)
    assert info.value.item_ids == ["yy", "zz"]


def test_annotate_federated_recompacts_every_component() -> None:
    page = FederatedPage(
        components=[
            RecComponent(heading="one", rank=1, items=rank_items(["b", "a"])),
            RecComponent(heading="two", rank=2, items=rank_items(["d", "e", "c"])),
        ]
    )
    annotated = annotate_federated(page, ANNOTATIONS)
    assert [[(r.item_id, r.rank) for r in c.items] for c in annotated.components] == [
        [("a", 1)],
        [("e", 1), ("c", 2)],
    ]
    assert fserp_ms(annotated) == pytest.approx((2 * 1.0 + 1 * (-1 / 3)) / 3, abs=TOL)
