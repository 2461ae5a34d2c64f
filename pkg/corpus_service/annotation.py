"""
Item annotation scale and its normalization.

Annotators label every item on a 6-class scale:

    -1  opposes / debunks misinformation, or promotes vaccination
     0  neutral toward the topic
     1  promotes or supports misinformation
     2  not about the topic
     3  non-English
     4  removed from the platform

Scores are computed on the 3-point normalized scale: -1, 0 and 1 map to
themselves, 2 maps to 0 and 3/4 are dropped (no normalized stance).
"""

from __future__ import annotations

from enum import IntEnum
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Union

from pydantic import BaseModel, field_validator

from utils.errors import DomainError
from utils.file_helpers import read_models, write_jsonl


class AnnotationClass(IntEnum):
    ANTI = -1
    NEUTRAL = 0
    PRO = 1
    OFF_TOPIC = 2
    NON_ENGLISH = 3
    REMOVED = 4


_NORMALIZED: Dict[AnnotationClass, Optional[int]] = {
    AnnotationClass.ANTI: -1,
    AnnotationClass.NEUTRAL: 0,
    AnnotationClass.PRO: 1,
    AnnotationClass.OFF_TOPIC: 0,
    AnnotationClass.NON_ENGLISH: None,
    AnnotationClass.REMOVED: None,
}

STANCE_NAMES: Dict[int, str] = {1: "pro", 0: "neutral", -1: "anti"}


def as_annotation_class(raw: Union[int, AnnotationClass]) -> AnnotationClass:
    if isinstance(raw, bool):
        raise DomainError(f"[CORPUS] Annotation value must be an integer, got {raw!r}.")
    try:
        return AnnotationClass(int(raw))
    except (TypeError, ValueError) as e:
        raise DomainError(
            f"[CORPUS] Annotation value {raw!r} is outside {{-1, 0, 1, 2, 3, 4}}."
        ) from e


def normalize_annotation(value: Union[int, AnnotationClass]) -> Optional[int]:
    """Map a raw annotation class onto the 3-point stance scale.

    Returns:
        -1, 0 or 1; None for classes that are ignored in scoring (3 and 4).

    Raises:
        DomainError: If the raw value is not one of the six classes.
    """
    return _NORMALIZED[as_annotation_class(value)]


class ItemAnnotation(BaseModel):
    """One line of an annotations file: {item_id, annotation}."""

    item_id: str
    annotation: AnnotationClass

    @field_validator("annotation", mode="before")
    @classmethod
    def _check_annotation(cls, v):
        return as_annotation_class(v)


def load_annotations(path: Path) -> Dict[str, AnnotationClass]:
    records = read_models(Path(path), ItemAnnotation, label="CORPUS")
    return {r.item_id: r.annotation for r in records}


def save_annotations(path: Path, annotations: Mapping[str, AnnotationClass]) -> int:
    return write_jsonl(
        Path(path),
        (ItemAnnotation(item_id=k, annotation=v) for k, v in sorted(annotations.items())),
    )


def stance_counts(annotations: Iterable[AnnotationClass]) -> Dict[str, int]:
    """Count normalized stances (ignored classes are counted under 'ignored')."""
    counts = {"pro": 0, "neutral": 0, "anti": 0, "ignored": 0}
    for a in annotations:
        s = normalize_annotation(a)
        counts["ignored" if s is None else STANCE_NAMES[s]] += 1
    return counts
