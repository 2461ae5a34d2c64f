"""
The interface the auditor drives.

Any audited platform (the simulated marketplace, or a live adapter built on a
browser driver) exposes the same account-scoped operations. The protocol
runner never touches platform internals; it only calls these methods.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Tuple, runtime_checkable

from scoring_service.pages import CaptureLabel, FederatedPage, SearchAlgorithm, SerpPage


@dataclass
class UserState:
    """History an account builds with the platform. Lists are append-only within a run."""

    account_id: str
    search_history: List[Tuple[str, Optional[datetime.datetime]]] = field(default_factory=list)
    browsing_history: List[str] = field(default_factory=list)
    wish_list: List[str] = field(default_factory=list)
    cart: List[str] = field(default_factory=list)
    session_day: int = 0

    @property
    def has_item_history(self) -> bool:
        return bool(self.browsing_history or self.wish_list or self.cart)


@runtime_checkable
class PlatformAdapter(Protocol):
    def register_account(self, account_id: str) -> UserState: ...

    def start_session(self, account_id: str, day: int) -> None:
        """Daily browser reset: clears session state, keeps account history."""
        ...

    def search(
        self,
        account_id: str,
        query: str,
        algorithm: SearchAlgorithm,
        k: int,
        at: Optional[datetime.datetime] = None,
    ) -> SerpPage: ...

    def homepage(
        self,
        account_id: str,
        at: Optional[datetime.datetime] = None,
        label: Optional[CaptureLabel] = None,
    ) -> FederatedPage: ...

    def browse(self, account_id: str, item_id: str) -> UserState: ...

    def add_to_wishlist(self, account_id: str, item_id: str) -> UserState: ...

    def add_to_cart(self, account_id: str, item_id: str) -> UserState: ...
