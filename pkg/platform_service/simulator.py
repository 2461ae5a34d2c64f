"""
Deterministic simulated marketplace.

Search implements the five sort orders a marketplace search page offers
(featured, average customer review, price ascending/descending, newest
arrivals). The featured order is an explicit stand-in formula:

    score = relevance_weight * term_overlap
          + rating_weight * (avg_rating / 5) * log1p(num_ratings) / log1p(max num_ratings)
          + search_personalization_weight * history_similarity

The homepage recommender mixes global popularity with similarity to the
user's browsing / wish-list / cart history, weighted by the bubble weight β.
A user without item history gets the generic popularity page, which never
depends on search history.
"""

from __future__ import annotations

import datetime
import hashlib
import logging
import math
import threading
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from platform_service.adapter import UserState
from platform_service.catalog import Catalog, Item
from platform_service.config import PersonalizationConfig
from scoring_service.pages import (
    CaptureLabel,
    DEFAULT_PAGE_SIZE,
    FederatedPage,
    RecComponent,
    SearchAlgorithm,
    SerpPage,
    rank_items,
)
from utils.errors import DataError, DomainError

logger = logging.getLogger(__name__)


def parse_algorithm(label: str | SearchAlgorithm) -> SearchAlgorithm:
    try:
        return SearchAlgorithm(label)
    except ValueError:
        valid = ", ".join(a.value for a in SearchAlgorithm)
        raise DomainError(f"[PLATFORM] Unknown search algorithm '{label}'. Expected one of: {valid}") from None


def query_terms(query: str) -> frozenset[str]:
    return frozenset(query.lower().split())


def _stable_hash(text: str) -> int:
    return int(hashlib.sha256(text.encode("utf-8")).hexdigest()[:12], 16)


# -------------------------------
# Similarity to user history
# -------------------------------
def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def _history_profile(user: UserState, config: PersonalizationConfig) -> Counter:
    profile: Counter = Counter()
    for item_id in user.browsing_history:
        profile[item_id] += config.browse_weight
    for item_id in user.wish_list:
        profile[item_id] += config.wishlist_weight
    for item_id in user.cart:
        profile[item_id] += config.cart_weight
    return profile


class HistorySimilarity:
    """Profile-weighted mean of Jaccard term overlap plus a same-stance bonus."""

    def __init__(self, user: UserState, catalog: Catalog, config: PersonalizationConfig) -> None:
        profile = _history_profile(user, config)
        self._entries: List[Tuple[float, frozenset[str], Optional[int]]] = [
            (w, catalog.terms(i), catalog.get(i).stance)
            for i, w in sorted(profile.items())
            if w > 0 and i in catalog
        ]
        self._total = sum(w for w, _, _ in self._entries)
        self._bonus = config.stance_bonus

    def __call__(self, item: Item, terms: frozenset[str]) -> float:
        if self._total <= 0:
            return 0.0
        stance = item.stance
        acc = 0.0
        for w, h_terms, h_stance in self._entries:
            s = _jaccard(terms, h_terms)
            if stance is not None and stance == h_stance:
                s += self._bonus
            acc += w * s
        return acc / self._total


# -------------------------------
# Search
# -------------------------------
def _popularity_norm(max_num_ratings: int) -> float:
    return math.log1p(max_num_ratings) if max_num_ratings > 0 else 0.0


def rank_featured(
    matched: Sequence[Item],
    user: UserState,
    config: PersonalizationConfig,
    *,
    terms: Optional[frozenset[str]] = None,
    catalog: Optional[Catalog] = None,
) -> List[Item]:
    """Order matched items by the featured score; ties by item_id ascending.

    `terms` are the query tokens used for the relevance term. The popularity
    term is normalized by the catalog's largest rating count (or the matched
    set's when no catalog is given). History similarity needs the catalog.
    """
    if not matched:
        return []
    terms = terms or frozenset()
    max_n = catalog.max_num_ratings if catalog is not None else max(i.num_ratings for i in matched)
    norm = _popularity_norm(max_n)
    similarity = None
    if config.search_personalization_weight > 0 and catalog is not None:
        similarity = HistorySimilarity(user, catalog, config)

    def score(item: Item) -> float:
        item_terms = frozenset(item.relevance_terms)
        overlap = len(item_terms & terms) / len(terms) if terms else 0.0
        pop = (item.avg_rating / 5.0) * (math.log1p(item.num_ratings) / norm) if norm > 0 else 0.0
        s = config.relevance_weight * overlap + config.rating_weight * pop
        if similarity is not None:
            s += config.search_personalization_weight * similarity(item, item_terms)
        return s

    scored = [(score(i), i) for i in matched]
    scored.sort(key=lambda p: (-p[0], p[1].item_id))
    return [i for _, i in scored]


def _order(
    matched: List[Item],
    algorithm: SearchAlgorithm,
    user: UserState,
    config: PersonalizationConfig,
    terms: frozenset[str],
    catalog: Catalog,
) -> List[Item]:
    if algorithm == SearchAlgorithm.FEATURED:
        return rank_featured(matched, user, config, terms=terms, catalog=catalog)
    if algorithm == SearchAlgorithm.AVG_CUSTOMER_REVIEW:
        return sorted(matched, key=lambda i: (-i.avg_rating, -i.num_ratings, i.item_id))
    if algorithm == SearchAlgorithm.PRICE_ASCENDING:
        return sorted(matched, key=lambda i: (i.price, i.item_id))
    if algorithm == SearchAlgorithm.PRICE_DESCENDING:
        return sorted(matched, key=lambda i: (-i.price, i.item_id))
    return sorted(matched, key=lambda i: (-i.arrival_date, i.item_id))


def search(
    catalog: Catalog,
    query: str,
    algorithm: SearchAlgorithm | str,
    user: UserState,
    k: int = DEFAULT_PAGE_SIZE,
    config: Optional[PersonalizationConfig] = None,
    at: Optional[datetime.datetime] = None,
) -> SerpPage:
    """Retrieve items sharing a term with the query, order them, return the top k.

    The query is appended to the user's search history.
    """
    algorithm = parse_algorithm(algorithm)
    if k < 1:
        raise DomainError(f"[PLATFORM] Page size k must be >= 1, got {k}.")
    if len(catalog) == 0:
        raise DataError("[PLATFORM] Cannot search an empty catalog.")
    config = config or PersonalizationConfig()
    terms = query_terms(query)
    matched = [item for item in catalog if catalog.terms(item.item_id) & terms]
    ordered = _order(matched, algorithm, user, config, terms, catalog)[:k]
    user.search_history.append((query, at))
    return SerpPage(
        query=query,
        results=rank_items([i.item_id for i in ordered]),
        algorithm=algorithm,
        captured_at=at,
        page_size=k,
    )


# -------------------------------
# Homepage
# -------------------------------
def _slice_components(
    ordered_ids: Sequence[str],
    m: int,
    k: int,
    config: PersonalizationConfig,
    generic: bool,
) -> List[RecComponent]:
    comps: List[RecComponent] = []
    for rank in range(1, m + 1):
        chunk = ordered_ids[(rank - 1) * k: rank * k]
        if not chunk:
            break
        comps.append(RecComponent(heading=config.heading(rank, generic), rank=rank, items=rank_items(list(chunk))))
    return comps


def homepage(
    catalog: Catalog,
    user: UserState,
    config: Optional[PersonalizationConfig] = None,
    m: Optional[int] = None,
    k: Optional[int] = None,
    at: Optional[datetime.datetime] = None,
    label: Optional[CaptureLabel] = None,
) -> FederatedPage:
    """Build the user's homepage of m components with k recommendations each."""
    config = config or PersonalizationConfig()
    m = config.components if m is None else m
    k = config.items_per_component if k is None else k
    if m < 1 or k < 1:
        raise DomainError(f"[PLATFORM] Homepage needs m >= 1 and k >= 1, got m={m}, k={k}.")

    norm = _popularity_norm(catalog.max_num_ratings)
    items = list(catalog)

    beta = config.homepage_bubble_weight
    # generic page for history-free accounts and whenever beta is 0
    if not user.has_item_history or beta == 0:
        ordered = sorted(items, key=lambda i: (-i.num_ratings, i.item_id))
        comps = _slice_components([i.item_id for i in ordered], m, k, config, generic=True)
        return FederatedPage(components=comps, captured_at=at, capture_label=label)

    rng = np.random.default_rng([config.rng_seed, _stable_hash(user.account_id), user.session_day])
    noise = rng.random(len(items)) * config.homepage_noise
    similarity = HistorySimilarity(user, catalog, config)

    scored = []
    for idx, item in enumerate(items):
        pop = math.log1p(item.num_ratings) / norm if norm > 0 else 0.0
        s = pop + float(noise[idx])
        s += beta * similarity(item, catalog.terms(item.item_id))
        scored.append((s, item.item_id))
    scored.sort(key=lambda p: (-p[0], p[1]))
    comps = _slice_components([i for _, i in scored], m, k, config, generic=False)
    return FederatedPage(components=comps, captured_at=at, capture_label=label)


# -------------------------------
# Activities
# -------------------------------
def _check_item(catalog: Catalog, item_id: str) -> None:
    catalog.get(item_id)


def browse(catalog: Catalog, user: UserState, item_id: str) -> UserState:
    _check_item(catalog, item_id)
    user.browsing_history.append(item_id)
    return user


def add_to_wishlist(catalog: Catalog, user: UserState, item_id: str) -> UserState:
    _check_item(catalog, item_id)
    user.browsing_history.append(item_id)
    user.wish_list.append(item_id)
    return user


def add_to_cart(catalog: Catalog, user: UserState, item_id: str) -> UserState:
    _check_item(catalog, item_id)
    user.browsing_history.append(item_id)
    user.cart.append(item_id)
    return user


# -------------------------------
# Adapter implementation
# -------------------------------
class SimulatedMarketplace:
    """PlatformAdapter over an in-memory catalog.

    Mutating calls are serialized by a lock; reads work on the current state.
    With search_personalization_weight == 0 the ranked id lists are cached per
    (query, algorithm, k) because no user state can change them.
    """

    def __init__(self, catalog: Catalog, config: Optional[PersonalizationConfig] = None) -> None:
        self.catalog = catalog
        self.config = config or PersonalizationConfig()
        self.users: Dict[str, UserState] = {}
        self._lock = threading.Lock()
        self._search_cache: Dict[Tuple[str, SearchAlgorithm, int], List[str]] = {}

    def _user(self, account_id: str) -> UserState:
        try:
            return self.users[account_id]
        except KeyError:
            raise DataError(f"[PLATFORM] Unknown account '{account_id}'. Register it first.") from None

    def register_account(self, account_id: str) -> UserState:
        with self._lock:
            if account_id not in self.users:
                self.users[account_id] = UserState(account_id=account_id)
            return self.users[account_id]

    def start_session(self, account_id: str, day: int) -> None:
        with self._lock:
            self._user(account_id).session_day = day

    def search(
        self,
        account_id: str,
        query: str,
        algorithm: SearchAlgorithm | str = SearchAlgorithm.FEATURED,
        k: int = DEFAULT_PAGE_SIZE,
        at: Optional[datetime.datetime] = None,
    ) -> SerpPage:
        algorithm = parse_algorithm(algorithm)
        with self._lock:
            user = self._user(account_id)
            if self.config.search_personalization_weight > 0:
                return search(self.catalog, query, algorithm, user, k, self.config, at)
            key = (" ".join(query.lower().split()), algorithm, k)
            cached = self._search_cache.get(key)
            if cached is None:
                page = search(self.catalog, query, algorithm, user, k, self.config, at)
                self._search_cache[key] = page.item_ids
                return page
            user.search_history.append((query, at))
            return SerpPage(query=query, results=rank_items(cached), algorithm=algorithm, captured_at=at, page_size=k)

    def homepage(
        self,
        account_id: str,
        at: Optional[datetime.datetime] = None,
        label: Optional[CaptureLabel] = None,
    ) -> FederatedPage:
        with self._lock:
            user = self._user(account_id)
            return homepage(self.catalog, user, self.config, at=at, label=label)

    def browse(self, account_id: str, item_id: str) -> UserState:
        with self._lock:
            return browse(self.catalog, self._user(account_id), item_id)

    def add_to_wishlist(self, account_id: str, item_id: str) -> UserState:
        with self._lock:
            return add_to_wishlist(self.catalog, self._user(account_id), item_id)

    def add_to_cart(self, account_id: str, item_id: str) -> UserState:
        with self._lock:
            return add_to_cart(self.catalog, self._user(account_id), item_id)
