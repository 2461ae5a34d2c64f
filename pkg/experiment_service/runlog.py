"""
Run log: every page captured and every step executed during a protocol run.

On disk a run is a directory:

    events.jsonl   one record per executed step (append-only)
    pages.jsonl    one CapturedPage per line (SERPs and homepages)
    sweep.jsonl    SERPs of the five-algorithm sweep (optional)
    plan.json      the resolved ExperimentPlan
"""

from __future__ import annotations

import datetime
import logging
from collections import Counter
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from experiment_service.clock import StepKind
from experiment_service.plan import ActivityKind, ExperimentPlan, load_plan, save_plan
from scoring_service.pages import CaptureLabel, FederatedPage, SerpPage
from utils.errors import DataError
from utils.file_helpers import read_models, write_jsonl

logger = logging.getLogger(__name__)

SWEEP_ACCOUNT = "algorithm-sweep"


class PageKind(str, Enum):
    SERP = "serp"
    HOMEPAGE = "homepage"


class CapturedPage(BaseModel):
    day: int = Field(ge=0)
    account_id: str
    activity: ActivityKind
    treatment: Optional[str] = None
    kind: PageKind
    label: Optional[CaptureLabel] = None
    query: Optional[str] = None
    query_stance: Optional[int] = None
    captured_at: datetime.datetime
    serp: Optional[SerpPage] = None
    homepage: Optional[FederatedPage] = None

    @model_validator(mode="after")
    def _check_payload(self) -> "CapturedPage":
        if self.kind == PageKind.SERP and (self.serp is None or self.query is None):
            raise ValueError("a captured SERP needs a query and a serp payload")
        if self.kind == PageKind.HOMEPAGE and (self.homepage is None or self.label is None):
            raise ValueError("a captured homepage needs a capture label and a homepage payload")
        return self

    @property
    def page_id(self) -> str:
        if self.kind == PageKind.SERP:
            algo = self.serp.algorithm.value if self.serp else ""
            return f"d{self.day}/{self.account_id}/serp/{algo}/{self.query}"
        return f"d{self.day}/{self.account_id}/{self.label.value}"

    @property
    def key(self) -> Tuple[int, str, Optional[CaptureLabel], Optional[str]]:
        return (self.day, self.account_id, self.label, self.query)


class EventRecord(BaseModel):
    day: int
    account_id: str
    at: datetime.datetime
    kind: StepKind
    activity: Optional[ActivityKind] = None
    item_id: Optional[str] = None
    query: Optional[str] = None


class RunLog(BaseModel):
    pages: List[CapturedPage] = Field(default_factory=list)
    events: List[EventRecord] = Field(default_factory=list)
    sweep: List[CapturedPage] = Field(default_factory=list)

    @property
    def actions(self) -> List[EventRecord]:
        return [e for e in self.events if e.kind == StepKind.ACTIVITY]

    def serps(self) -> List[CapturedPage]:
        return [p for p in self.pages if p.kind == PageKind.SERP]

    def homepages(self, label: Optional[CaptureLabel] = None) -> List[CapturedPage]:
        return [
            p for p in self.pages
            if p.kind == PageKind.HOMEPAGE and (label is None or p.label == label)
        ]

    def index(self) -> Dict[Tuple[int, str, Optional[CaptureLabel], Optional[str]], CapturedPage]:
        return {p.key: p for p in self.pages}

    def counts(self) -> Dict[str, int]:
        c: Counter = Counter()
        for p in self.pages:
            c[p.kind.value if p.kind == PageKind.SERP else p.label.value] += 1
        return {k: c.get(k, 0) for k in ("serp", *(lbl.value for lbl in CaptureLabel))}


def expected_counts(plan: ExperimentPlan) -> Dict[str, int]:
    """Closed-form page counts of a complete run of `plan`."""
    n_accounts = len(plan.accounts)
    return {
        "serp": plan.days * n_accounts * len(plan.queries),
        CaptureLabel.AFTER_ACTION.value: plan.days * len(plan.treated_accounts),
        CaptureLabel.BEFORE_SEARCH.value: plan.days * n_accounts,
        CaptureLabel.AFTER_SEARCH.value: plan.days * n_accounts,
    }


def check_complete(runlog: RunLog, plan: ExperimentPlan) -> None:
    """Verify per day and account that every checkpoint was captured exactly once.

    Raises:
        DataError: naming the first missing or duplicated checkpoint.
    """
    seen: Counter = Counter(p.key for p in runlog.pages)
    dupes = [k for k, n in seen.items() if n > 1]
    if dupes:
        raise DataError(f"[EXPERIMENT] Duplicate captures in run log, e.g. {dupes[0]}")
    for day in range(plan.days):
        for account in plan.accounts:
            wanted: List[Tuple[Optional[CaptureLabel], Optional[str]]] = [
                (CaptureLabel.BEFORE_SEARCH, None),
                (CaptureLabel.AFTER_SEARCH, None),
                *((None, q.text) for q in plan.queries),
            ]
            if account.treatment is not None:
                wanted.append((CaptureLabel.AFTER_ACTION, None))
            for label, query in wanted:
                if (day, account.account_id, label, query) not in seen:
                    what = label.value if label else f"SERP '{query}'"
                    raise DataError(
                        f"[EXPERIMENT] Run log incomplete: day {day}, account '{account.account_id}' has no {what}"
                    )
    if runlog.counts() != expected_counts(plan):
        raise DataError(f"[EXPERIMENT] Run log holds pages outside the plan: {runlog.counts()}")


# -------------------------------
# Persistence
# -------------------------------
EVENTS_FILE = "events.jsonl"
PAGES_FILE = "pages.jsonl"
SWEEP_FILE = "sweep.jsonl"
PLAN_FILE = "plan.json"


def save_runlog(
    out_dir: Path,
    runlog: RunLog,
    plan: Optional[ExperimentPlan] = None,
    write_events: bool = True,
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if write_events:
        write_jsonl(out_dir / EVENTS_FILE, runlog.events)
    write_jsonl(out_dir / PAGES_FILE, runlog.pages)
    write_jsonl(out_dir / SWEEP_FILE, runlog.sweep)
    if plan is not None:
        save_plan(out_dir / PLAN_FILE, plan)
    logger.info(
        f"[EXPERIMENT] Saved run log to {out_dir} ({len(runlog.pages)} pages, {len(runlog.events)} events)"
    )
    return out_dir


def load_runlog(run_dir: Path) -> RunLog:
    run_dir = Path(run_dir)
    pages = read_models(run_dir / PAGES_FILE, CapturedPage, label="EXPERIMENT")
    events = (
        read_models(run_dir / EVENTS_FILE, EventRecord, label="EXPERIMENT")
        if (run_dir / EVENTS_FILE).exists() else []
    )
    sweep = (
        read_models(run_dir / SWEEP_FILE, CapturedPage, label="EXPERIMENT")
        if (run_dir / SWEEP_FILE).exists() else []
    )
    return RunLog(pages=pages, events=events, sweep=sweep)


def load_run_plan(run_dir: Path) -> Optional[ExperimentPlan]:
    path = Path(run_dir) / PLAN_FILE
    return load_plan(path) if path.exists() else None
