"""
Exception hierarchy shared by every service package.

Messages carry a bracketed component label (e.g. ``[SCORING]``) so a failure
surfaced by the CLI says which stage raised it. The CLI maps the two main
branches onto exit codes:

    ConfigurationError -> 2
    DataError          -> 3
    anything else      -> 1
"""

from __future__ import annotations

from typing import Iterable, Optional


class AuditError(Exception):
    """Base class for all audit pipeline errors."""


class ConfigurationError(AuditError):
    """Missing or invalid configuration: fixtures, plan files, provider lists."""


class DataError(AuditError):
    """Input data violates a contract of the pipeline."""


class DomainError(DataError, ValueError):
    """An argument lies outside the domain of the operation."""


class UndefinedScoreError(DataError):
    """A misinformation score is undefined for the given page (e.g. empty SERP)."""


class InsufficientCorpusError(DataError):
    def __init__(self, stance: str, found: int, required: int) -> None:
        self.stance = stance
        self.found = found
        self.required = required
        super().__init__(
            f"[EXPERIMENT] Stance group '{stance}' has {found} items, {required} required."
        )


class AnnotationGapError(DataError):
    def __init__(self, item_ids: Iterable[str]) -> None:
        self.item_ids = sorted(set(item_ids))
        preview = ", ".join(self.item_ids[:20])
        more = "" if len(self.item_ids) <= 20 else f" (+{len(self.item_ids) - 20} more)"
        super().__init__(f"[REPORT] Missing annotations for items: {preview}{more}")


class ItemNotFoundError(DataError):
    def __init__(self, item_id: str) -> None:
        self.item_id = item_id
        super().__init__(f"[PLATFORM] Unknown item_id '{item_id}'.")


class TransientPlatformError(AuditError):
    """A platform action failed in a way that may succeed on retry."""


class ProtocolError(AuditError):
    def __init__(self, day: int, account_id: str, step: str, cause: Optional[BaseException] = None) -> None:
        self.day = day
        self.account_id = account_id
        self.step = step
        detail = f": {cause}" if cause is not None else ""
        super().__init__(
            f"[EXPERIMENT] Run aborted on day {day}, account '{account_id}', step '{step}'{detail}"
        )
