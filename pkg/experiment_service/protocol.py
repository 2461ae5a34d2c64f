"""
Protocol runner: drives every audit account through the daily schedule.

Per day and account (all times virtual):

    00:00            start_session (daily browser reset, history kept)
    activity_time    treated accounts act on their 12 items, then capture
                     the after-action homepage
    search_time      capture the before-search homepage, then search query i
                     at search_time + i * gap
    + Q * gap        capture the after-search homepage

All accounts share the same timestamps, so searches for the same query happen
simultaneously across accounts. Platform location is not simulated; every
account sees the same marketplace.

Usage:

    runlog = run_protocol(plan, SimulatedMarketplace(catalog, config))
"""

from __future__ import annotations

import datetime
import logging
from pathlib import Path
from typing import Dict, List, Optional

from tenacity import Retrying, before_sleep_log, retry_if_exception_type, stop_after_attempt

from experiment_service.clock import Event, EventQueue, StepKind, VirtualClock
from experiment_service.plan import AccountSpec, ActivityKind, ExperimentPlan
from experiment_service.runlog import SWEEP_ACCOUNT, CapturedPage, EventRecord, PageKind, RunLog
from platform_service.adapter import PlatformAdapter
from scoring_service.pages import CaptureLabel, SearchAlgorithm
from utils.errors import ProtocolError, TransientPlatformError
from utils.file_helpers import append_jsonl, write_jsonl
from utils.settings import get_settings
from utils.time_utils import at_clock, day_start, format_virtual

logger = logging.getLogger(__name__)

_CAPTURE_LABELS = {
    StepKind.AFTER_ACTION: CaptureLabel.AFTER_ACTION,
    StepKind.BEFORE_SEARCH: CaptureLabel.BEFORE_SEARCH,
    StepKind.AFTER_SEARCH: CaptureLabel.AFTER_SEARCH,
}


def schedule_day(queue: EventQueue, plan: ExperimentPlan, day: int) -> None:
    midnight = day_start(plan.start_date, day)
    act_at = at_clock(midnight, plan.activity_time)
    search_at = at_clock(midnight, plan.search_time)
    gap = datetime.timedelta(minutes=plan.inter_search_gap_minutes)

    for account in plan.accounts:
        aid = account.account_id
        step = 0
        queue.push(midnight, aid, step, day, StepKind.SESSION)
        if account.treatment is not None:
            for item_id in account.treatment.items:
                step += 1
                queue.push(act_at, aid, step, day, StepKind.ACTIVITY, item_id=item_id)
            step += 1
            queue.push(act_at, aid, step, day, StepKind.AFTER_ACTION)
        step += 1
        queue.push(search_at, aid, step, day, StepKind.BEFORE_SEARCH)
        for i in range(len(plan.queries)):
            step += 1
            queue.push(search_at + i * gap, aid, step, day, StepKind.SEARCH, query_index=i)
        step += 1
        queue.push(search_at + len(plan.queries) * gap, aid, step, day, StepKind.AFTER_SEARCH)


class ProtocolRunner:
    def __init__(
        self,
        plan: ExperimentPlan,
        platform: PlatformAdapter,
        clock: VirtualClock,
        retries: int,
        events_path: Optional[Path] = None,
    ) -> None:
        self.plan = plan
        self.platform = platform
        self.clock = clock
        self.events_path = events_path
        self.accounts: Dict[str, AccountSpec] = {a.account_id: a for a in plan.accounts}
        self.runlog = RunLog()
        self._retrying = Retrying(
            stop=stop_after_attempt(retries),
            retry=retry_if_exception_type(TransientPlatformError),
            before_sleep=before_sleep_log(logger, logging.WARNING),
            reraise=True,
        )

    # -------------------------------
    # Execution
    # -------------------------------
    def run(self) -> RunLog:
        if self.events_path is not None:
            write_jsonl(self.events_path, [])
        for account in self.plan.accounts:
            self.platform.register_account(account.account_id)

        queue = EventQueue()
        for day in range(self.plan.days):
            schedule_day(queue, self.plan, day)

        current_day = -1
        while len(queue):
            event = queue.pop()
            if event.day != current_day:
                current_day = event.day
                logger.info(f"[EXPERIMENT] Day {current_day + 1}/{self.plan.days}")
            try:
                self.clock.advance_to(event.time)
                self._retrying(self._execute, event)
            except ProtocolError:
                raise
            except Exception as e:
                raise ProtocolError(event.day, event.account_id, event.describe(), e) from e
        return self.runlog

    def _execute(self, event: Event) -> None:
        account = self.accounts[event.account_id]
        now = self.clock.now
        logger.debug(f"[EXPERIMENT] {format_virtual(now)} {event.account_id} {event.describe()}")

        record = EventRecord(day=event.day, account_id=event.account_id, at=now, kind=event.kind)
        if event.kind == StepKind.SESSION:
            self.platform.start_session(event.account_id, event.day)
        elif event.kind == StepKind.ACTIVITY:
            self._act(account, event.item_id)
            record.activity = account.activity
            record.item_id = event.item_id
        elif event.kind == StepKind.SEARCH:
            query = self.plan.queries[event.query_index]
            page = self.platform.search(
                event.account_id, query.text, SearchAlgorithm.FEATURED, self.plan.page_size, at=now
            )
            record.query = query.text
            self._capture(account, event.day, now, PageKind.SERP, serp=page, query=query.text, query_stance=query.stance)
        else:
            label = _CAPTURE_LABELS[event.kind]
            page = self.platform.homepage(event.account_id, at=now, label=label)
            self._capture(account, event.day, now, PageKind.HOMEPAGE, homepage=page, label=label)

        self.runlog.events.append(record)
        if self.events_path is not None:
            append_jsonl(self.events_path, record)

    def _act(self, account: AccountSpec, item_id: str) -> None:
        if account.activity == ActivityKind.BROWSE:
            self.platform.browse(account.account_id, item_id)
        elif account.activity == ActivityKind.WISHLIST:
            self.platform.add_to_wishlist(account.account_id, item_id)
        elif account.activity == ActivityKind.CART:
            self.platform.add_to_cart(account.account_id, item_id)

    def _capture(self, account: AccountSpec, day: int, now: datetime.datetime, kind: PageKind, **payload) -> None:
        self.runlog.pages.append(
            CapturedPage(
                day=day,
                account_id=account.account_id,
                activity=account.activity,
                treatment=account.treatment_name,
                kind=kind,
                captured_at=now,
                **payload,
            )
        )


def sweep_algorithms(
    plan: ExperimentPlan,
    platform: PlatformAdapter,
    at: Optional[datetime.datetime] = None,
    account_id: str = SWEEP_ACCOUNT,
) -> List[CapturedPage]:
    """Search every plan query with all five algorithms from a history-free account."""
    platform.register_account(account_id)
    at = at or day_start(plan.start_date, 0)
    pages: List[CapturedPage] = []
    for query in plan.queries:
        for algorithm in SearchAlgorithm:
            serp = platform.search(account_id, query.text, algorithm, plan.page_size, at=at)
            pages.append(
                CapturedPage(
                    day=0,
                    account_id=account_id,
                    activity=ActivityKind.SEARCH_ONLY,
                    kind=PageKind.SERP,
                    query=query.text,
                    query_stance=query.stance,
                    captured_at=at,
                    serp=serp,
                )
            )
    logger.info(f"[EXPERIMENT] Algorithm sweep captured {len(pages)} SERPs")
    return pages


def run_protocol(
    plan: ExperimentPlan,
    platform: PlatformAdapter,
    clock: Optional[VirtualClock] = None,
    retries: Optional[int] = None,
    events_path: Optional[Path] = None,
) -> RunLog:
    """Execute the plan against `platform` on a virtual clock.

    Raises:
        ProtocolError: A platform step failed (after retrying transient failures).
    """
    clock = clock or VirtualClock(day_start(plan.start_date, 0))
    retries = retries if retries is not None else get_settings().action_retries
    sweep = sweep_algorithms(plan, platform, at=clock.now) if plan.algorithm_sweep else []
    runlog = ProtocolRunner(plan, platform, clock, retries, events_path).run()
    runlog.sweep = sweep
    logger.info(f"[EXPERIMENT] Protocol finished: {runlog.counts()}")
    return runlog
