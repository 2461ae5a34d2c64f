"""
Experiment plan: 13 audit accounts and their daily schedule.

Twelve accounts cover the activity x treatment grid

    browse / wishlist / cart  x  pro / neutral / anti / mix

and one account only searches. Every day the treatment accounts act on their
12 items at `activity_time`; at `search_time` all accounts search the audit
queries in plan order, `inter_search_gap_minutes` apart.

Plan files are YAML:

    days: 14
    activity_time: "09:00"
    search_time: "11:00"
    inter_search_gap_minutes: 20
    queries: queries.jsonl        # relative to the plan file
    algorithm_sweep: true
    platform:
      homepage_bubble_weight: 2.0
"""

from __future__ import annotations

import datetime
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from corpus_service.queries import AnnotatedQuery
from experiment_service.treatments import Treatment, TreatmentName
from utils.errors import ConfigurationError
from utils.file_helpers import read_json, read_yaml, write_text
from utils.routing import resolve_path
from utils.time_utils import parse_clock_time

logger = logging.getLogger(__name__)

DEFAULT_START_DATE = datetime.date(2022, 1, 3)
MINUTES_PER_DAY = 24 * 60


class ActivityKind(str, Enum):
    SEARCH_ONLY = "search_only"
    BROWSE = "browse"
    WISHLIST = "wishlist"
    CART = "cart"


TREATED_ACTIVITIES = (ActivityKind.BROWSE, ActivityKind.WISHLIST, ActivityKind.CART)
TREATMENT_ORDER = (TreatmentName.PRO, TreatmentName.NEUTRAL, TreatmentName.ANTI, TreatmentName.MIX)
SEARCH_ONLY_ACCOUNT = "search-only"


def account_id_for(activity: ActivityKind, treatment: Optional[TreatmentName]) -> str:
    if activity == ActivityKind.SEARCH_ONLY:
        return SEARCH_ONLY_ACCOUNT
    return f"{activity.value}-{treatment.value}"


class AccountSpec(BaseModel):
    account_id: str
    activity: ActivityKind
    treatment: Optional[Treatment] = None

    @model_validator(mode="after")
    def _treatment_iff_active(self) -> "AccountSpec":
        if (self.activity == ActivityKind.SEARCH_ONLY) != (self.treatment is None):
            raise ValueError(
                f"account '{self.account_id}': search_only accounts have no treatment, all others need one"
            )
        return self

    @property
    def treatment_name(self) -> Optional[str]:
        return self.treatment.name.value if self.treatment else None


class PlanOverrides(BaseModel):
    days: Optional[int] = None
    activity_time: Optional[datetime.time] = None
    search_time: Optional[datetime.time] = None
    inter_search_gap_minutes: Optional[int] = None
    carry_over_threshold_minutes: Optional[int] = None
    page_size: Optional[int] = None
    start_date: Optional[datetime.date] = None
    algorithm_sweep: Optional[bool] = None
    max_queries: Optional[int] = Field(default=None, ge=1)

    @field_validator("activity_time", "search_time", mode="before")
    @classmethod
    def _parse_time(cls, v):
        return None if v is None else parse_clock_time(v)


class ExperimentPlan(BaseModel):
    accounts: List[AccountSpec]
    queries: List[AnnotatedQuery]
    days: int = Field(default=14, ge=1)
    activity_time: datetime.time = datetime.time(9, 0)
    search_time: datetime.time = datetime.time(11, 0)
    inter_search_gap_minutes: int = Field(default=20, ge=1)
    carry_over_threshold_minutes: int = Field(default=11, ge=0)
    page_size: int = Field(default=20, ge=1)
    start_date: datetime.date = DEFAULT_START_DATE
    algorithm_sweep: bool = True

    @field_validator("activity_time", "search_time", mode="before")
    @classmethod
    def _parse_time(cls, v):
        return parse_clock_time(v)

    @model_validator(mode="after")
    def _check_plan(self) -> "ExperimentPlan":
        if not self.queries:
            raise ValueError("plan needs at least one query")
        texts = [q.text.lower() for q in self.queries]
        if len(set(texts)) != len(texts):
            raise ValueError("query texts must be unique within a plan")

        ids = [a.account_id for a in self.accounts]
        if len(set(ids)) != len(ids):
            raise ValueError("account ids must be unique")
        grid = [(a.activity, a.treatment.name) for a in self.accounts if a.treatment is not None]
        expected = {(act, t) for act in TREATED_ACTIVITIES for t in TREATMENT_ORDER}
        if len(grid) != len(expected) or set(grid) != expected:
            raise ValueError("accounts must cover every activity x treatment pair exactly once")
        if sum(a.activity == ActivityKind.SEARCH_ONLY for a in self.accounts) != 1:
            raise ValueError("plan needs exactly one search_only account")

        if self.inter_search_gap_minutes < self.carry_over_threshold_minutes:
            raise ValueError(
                f"inter_search_gap_minutes ({self.inter_search_gap_minutes}) is below the "
                f"carry-over threshold ({self.carry_over_threshold_minutes})"
            )
        if self.activity_time >= self.search_time:
            raise ValueError("activity_time must come before search_time")
        if self.minute_of_day(self.search_time) + self.search_window_minutes >= MINUTES_PER_DAY:
            raise ValueError("the search schedule does not fit in one day")
        return self

    @staticmethod
    def minute_of_day(t: datetime.time) -> int:
        return t.hour * 60 + t.minute

    @property
    def search_window_minutes(self) -> int:
        """Minutes from the before-search capture to the after-search capture."""
        return len(self.queries) * self.inter_search_gap_minutes

    @property
    def treated_accounts(self) -> List[AccountSpec]:
        return [a for a in self.accounts if a.treatment is not None]

    def account(self, account_id: str) -> AccountSpec:
        for a in self.accounts:
            if a.account_id == account_id:
                return a
        raise KeyError(account_id)


def build_plan(
    treatments: Mapping[str, Treatment],
    queries: Sequence[AnnotatedQuery],
    overrides: Optional[PlanOverrides] = None,
) -> ExperimentPlan:
    """Lay out the 13 accounts and apply plan overrides.

    Raises:
        ConfigurationError: A treatment is missing or the resulting plan is invalid.
    """
    missing = [t.value for t in TREATMENT_ORDER if t.value not in treatments]
    if missing:
        raise ConfigurationError(f"[EXPERIMENT] Missing treatments: {', '.join(missing)}")

    overrides = overrides or PlanOverrides()
    queries = list(queries)
    if overrides.max_queries is not None:
        queries = queries[: overrides.max_queries]

    accounts = [
        AccountSpec(account_id=account_id_for(act, t), activity=act, treatment=treatments[t.value])
        for act in TREATED_ACTIVITIES
        for t in TREATMENT_ORDER
    ]
    accounts.append(AccountSpec(account_id=SEARCH_ONLY_ACCOUNT, activity=ActivityKind.SEARCH_ONLY))

    fields = overrides.model_dump(exclude_none=True, exclude={"max_queries"})
    try:
        plan = ExperimentPlan(accounts=accounts, queries=queries, **fields)
    except ValidationError as e:
        raise ConfigurationError(f"[EXPERIMENT] Invalid plan: {e}") from e
    logger.info(
        f"[EXPERIMENT] Plan: {len(plan.accounts)} accounts, {len(plan.queries)} queries, {plan.days} days"
    )
    return plan


class PlanFile(BaseModel):
    """Parsed plan file: overrides, an optional queries path and a platform section."""

    overrides: PlanOverrides = Field(default_factory=PlanOverrides)
    queries_path: Optional[Path] = None
    platform: Dict[str, Any] = Field(default_factory=dict)


def load_plan_file(path: Path) -> PlanFile:
    path = Path(path)
    data = read_yaml(path, label="EXPERIMENT")
    platform = data.pop("platform", None) or {}
    queries = data.pop("queries", None)
    unknown = sorted(set(data) - set(PlanOverrides.model_fields))
    if unknown:
        raise ConfigurationError(f"[EXPERIMENT] Unknown plan keys in {path}: {', '.join(unknown)}")
    if not isinstance(platform, dict):
        raise ConfigurationError(f"[EXPERIMENT] 'platform' in {path} must be a mapping.")
    try:
        overrides = PlanOverrides.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"[EXPERIMENT] Invalid plan file {path}: {e}") from e
    return PlanFile(
        overrides=overrides,
        queries_path=resolve_path(queries, path) if queries else None,
        platform=platform,
    )


def save_plan(path: Path, plan: ExperimentPlan) -> Path:
    return write_text(Path(path), plan.model_dump_json(indent=2))


def load_plan(path: Path) -> ExperimentPlan:
    data = read_json(Path(path), label="EXPERIMENT")
    try:
        return ExperimentPlan.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"[EXPERIMENT] Invalid saved plan {path}: {e}") from e
