from __future__ import annotations

from pathlib import Path
from typing import List

import pytest
from pydantic import ValidationError

from platform_service.adapter import PlatformAdapter, UserState
from platform_service.catalog import Catalog, Item, generate_catalog, load_catalog, save_catalog
from platform_service.config import PersonalizationConfig, load_platform_config
from platform_service.simulator import (
    SimulatedMarketplace,
    add_to_cart,
    add_to_wishlist,
    browse,
    homepage,
    rank_featured,
    search,
)
from scoring_service.pages import CaptureLabel, SearchAlgorithm, annotate_federated
from scoring_service.scores import fserp_ms
from utils.errors import ConfigurationError, DataError, DomainError, ItemNotFoundError
from utils.file_helpers import write_text


def make_item(item_id: str, stance_class: int = 0, **kwargs) -> Item:
    fields = {
        "title": item_id,
        "avg_rating": 4.0,
        "num_ratings": 100,
        "price": 10.0,
        "arrival_date": 1,
        "relevance_terms": ["vaccine"],
    }
    fields.update(kwargs)
    return Item(item_id=item_id, stance_class=stance_class, **fields)


@pytest.fixture
def small_catalog() -> Catalog:
    return Catalog(
        [
            make_item("a", price=1, arrival_date=40, avg_rating=4.0, num_ratings=2000),
            make_item("b", price=2, arrival_date=20, avg_rating=5.0, num_ratings=1),
            make_item("c", price=3, arrival_date=50, avg_rating=3.5, num_ratings=5000),
            make_item("d", price=4, arrival_date=10, avg_rating=4.5, num_ratings=10),
            make_item("e", price=5, arrival_date=30, avg_rating=3.0, num_ratings=10000),
            make_item("x", relevance_terms=["kitchen"]),
        ]
    )


def _ids(items: List[Item]) -> List[str]:
    return [i.item_id for i in items]


def _pro(catalog: Catalog) -> List[str]:
    return [i.item_id for i in catalog if i.item_id.startswith("pro-")][:12]


def _anti(catalog: Catalog) -> List[str]:
    return [i.item_id for i in catalog if i.item_id.startswith("anti-")][:12]


# -------------------------------
# Search algorithms
# -------------------------------
@pytest.mark.parametrize(
    "algorithm, expected",
    [
        (SearchAlgorithm.FEATURED, ["a", "c", "e", "d", "b"]),
        (SearchAlgorithm.AVG_CUSTOMER_REVIEW, ["b", "d", "a", "c", "e"]),
        (SearchAlgorithm.PRICE_ASCENDING, ["a", "b", "c", "d", "e"]),
        (SearchAlgorithm.PRICE_DESCENDING, ["e", "d", "c", "b", "a"]),
        (SearchAlgorithm.NEWEST_ARRIVALS, ["c", "a", "e", "b", "d"]),
    ],
)
def test_search_orders_matched_items_per_algorithm(
    small_catalog: Catalog, user: UserState, algorithm: SearchAlgorithm, expected: List[str]
) -> None:
    page = search(small_catalog, "vaccine", algorithm, user)
    assert page.item_ids == expected
    assert [r.rank for r in page.results] == [1, 2, 3, 4, 5]
    assert page.algorithm == algorithm


def test_search_accepts_algorithm_labels_and_truncates_to_k(small_catalog: Catalog, user: UserState) -> None:
    page = search(small_catalog, "vaccine", "price_descending", user, k=2)
    assert page.item_ids == ["e", "d"]
    assert page.page_size == 2


def test_price_and_arrival_sorts(user: UserState) -> None:
    catalog = Catalog(
        [
            make_item("p5", price=5, arrival_date=10),
            make_item("p3", price=3, arrival_date=30),
            make_item("p9", price=9, arrival_date=20),
        ]
    )
    assert search(catalog, "vaccine", "price_ascending", user).item_ids == ["p3", "p5", "p9"]
    assert search(catalog, "vaccine", "newest_arrivals", user).item_ids == ["p3", "p9", "p5"]


def test_search_appends_to_search_history(small_catalog: Catalog, user: UserState) -> None:
    search(small_catalog, "vaccine", SearchAlgorithm.FEATURED, user)
    search(small_catalog, "kitchen", SearchAlgorithm.FEATURED, user)
    assert [q for q, _ in user.search_history] == ["vaccine", "kitchen"]


def test_search_domain_errors(small_catalog: Catalog, user: UserState) -> None:
    with pytest.raises(DomainError):
        search(small_catalog, "vaccine", "bestsellers", user)
    with pytest.raises(DomainError):
        search(small_catalog, "vaccine", SearchAlgorithm.FEATURED, user, k=0)
    with pytest.raises(DataError):
        search(Catalog([]), "vaccine", SearchAlgorithm.FEATURED, user)


def test_featured_prefers_more_rated_items_at_equal_stars(user: UserState) -> None:
    config = PersonalizationConfig(rating_weight=1.0, relevance_weight=0.0)
    a = make_item("a", avg_rating=5.0, num_ratings=1000)
    b = make_item("b", avg_rating=5.0, num_ratings=10)
    assert _ids(rank_featured([b, a], user, config)) == ["a", "b"]


def test_featured_with_zero_weights_orders_by_item_id(user: UserState) -> None:
    config = PersonalizationConfig(rating_weight=0.0, relevance_weight=0.0)
    items = [make_item(i) for i in ("c", "a", "b")]
    assert _ids(rank_featured(items, user, config)) == ["a", "b", "c"]


def test_featured_follows_average_review_when_popularity_is_equal(user: UserState) -> None:
    config = PersonalizationConfig(rating_weight=1.0, relevance_weight=0.0)
    items = [
        make_item("a", avg_rating=3.0),
        make_item("b", avg_rating=4.5),
        make_item("c", avg_rating=4.0),
        make_item("d", avg_rating=1.5),
    ]
    catalog = Catalog(items)
    featured = search(catalog, "vaccine", SearchAlgorithm.FEATURED, user, config=config)
    by_review = search(catalog, "vaccine", SearchAlgorithm.AVG_CUSTOMER_REVIEW, user, config=config)
    assert featured.item_ids == by_review.item_ids == ["b", "c", "a", "d"]


def test_search_ignores_history_without_search_personalization(catalog: Catalog) -> None:
    config = PersonalizationConfig()
    pro_user = UserState(account_id="one", browsing_history=_pro(catalog))
    anti_user = UserState(account_id="two", browsing_history=_anti(catalog), cart=_anti(catalog))
    for query in ("vaccine", "vaccine injury", "vaccines science"):
        assert (
            search(catalog, query, SearchAlgorithm.FEATURED, pro_user, config=config).item_ids
            == search(catalog, query, SearchAlgorithm.FEATURED, anti_user, config=config).item_ids
        )


def test_stance_queries_retrieve_their_stance_first(catalog: Catalog, user: UserState) -> None:
    page = search(catalog, "vaccine injury", SearchAlgorithm.FEATURED, user)
    top = [catalog.get(i).stance for i in page.item_ids[:5]]
    assert top.count(1) >= 4


# -------------------------------
# Homepage
# -------------------------------
def test_history_free_homepage_is_generic_and_scores_zero(catalog: Catalog, config: PersonalizationConfig) -> None:
    fresh = UserState(account_id="fresh")
    searched = UserState(account_id="searched")
    for q in ("vaccine injury", "vaccine safety"):
        search(catalog, q, SearchAlgorithm.FEATURED, searched, config=config)

    page = homepage(catalog, fresh, config)
    assert page.model_dump() == homepage(catalog, searched, config).model_dump()
    assert len(page.components) == 3
    assert all(len(c.items) == 20 for c in page.components)
    assert [c.heading for c in page.components] == config.generic_headings
    assert all(i.startswith("general-") for i in page.item_ids)
    assert fserp_ms(annotate_federated(page, catalog.annotations())) == 0.0


def test_homepage_without_bubble_weight_ignores_item_history(catalog: Catalog) -> None:
    config = PersonalizationConfig(homepage_bubble_weight=0.0, rng_seed=3)
    fresh = UserState(account_id="same")
    browsed = UserState(account_id="same", browsing_history=_pro(catalog)[:1])
    pro_user = UserState(account_id="same", browsing_history=_pro(catalog), wish_list=_pro(catalog)[:3])
    anti_user = UserState(account_id="same", browsing_history=_anti(catalog), cart=_anti(catalog)[:3])
    expected = homepage(catalog, fresh, config).model_dump()
    for user in (browsed, pro_user, anti_user):
        assert homepage(catalog, user, config).model_dump() == expected
    assert [c["heading"] for c in expected["components"]] == config.generic_headings


def test_homepage_follows_the_stance_of_item_history(catalog: Catalog, config: PersonalizationConfig) -> None:
    annotations = catalog.annotations()
    pro_user = UserState(account_id="pro", browsing_history=_pro(catalog))
    anti_user = UserState(account_id="anti", browsing_history=_anti(catalog))
    pro_score = fserp_ms(annotate_federated(homepage(catalog, pro_user, config), annotations))
    anti_score = fserp_ms(annotate_federated(homepage(catalog, anti_user, config), annotations))
    assert pro_score > 0.5
    assert anti_score < -0.5
    assert pro_score > anti_score


def test_homepage_layout_follows_config(catalog: Catalog) -> None:
    config = PersonalizationConfig(components=5, items_per_component=4)
    user = UserState(account_id="u", wish_list=_pro(catalog))
    page = homepage(catalog, user, config, at=None, label=CaptureLabel.AFTER_ACTION)
    assert [c.rank for c in page.components] == [1, 2, 3, 4, 5]
    assert [len(c.items) for c in page.components] == [4] * 5
    assert page.components[0].heading == config.headings[0]
    assert page.components[4].heading == f"{config.headings[-1]} (5)"
    assert page.capture_label == CaptureLabel.AFTER_ACTION
    with pytest.raises(DomainError):
        homepage(catalog, user, config, m=0)


def test_small_catalog_drops_empty_trailing_components(small_catalog: Catalog) -> None:
    config = PersonalizationConfig(components=3, items_per_component=4)
    page = homepage(small_catalog, UserState(account_id="u"), config)
    assert [len(c.items) for c in page.components] == [4, 2]


def test_homepage_is_deterministic_per_account_and_day(catalog: Catalog, config: PersonalizationConfig) -> None:
    first = UserState(account_id="u", browsing_history=_pro(catalog), session_day=2)
    second = UserState(account_id="u", browsing_history=_pro(catalog), session_day=2)
    assert homepage(catalog, first, config).model_dump() == homepage(catalog, second, config).model_dump()


# -------------------------------
# Activities
# -------------------------------
def test_activities_update_the_documented_histories(small_catalog: Catalog, user: UserState) -> None:
    add_to_wishlist(small_catalog, user, "a")
    assert user.browsing_history == ["a"] and user.wish_list == ["a"] and user.cart == []

    other = UserState(account_id="other")
    browse(small_catalog, other, "b")
    browse(small_catalog, other, "b")
    assert other.browsing_history == ["b", "b"] and other.wish_list == []

    cart_user = UserState(account_id="cart")
    add_to_cart(small_catalog, cart_user, "c")
    assert cart_user.cart == ["c"] and cart_user.wish_list == [] and cart_user.browsing_history == ["c"]


@pytest.mark.parametrize("action", [browse, add_to_wishlist, add_to_cart])
def test_activity_functions_reject_unknown_items(small_catalog: Catalog, action) -> None:
    user = UserState(account_id="u")
    with pytest.raises(ItemNotFoundError):
        action(small_catalog, user, "no-such-item")
    assert not user.has_item_history


def test_activities_reject_unknown_items(marketplace: SimulatedMarketplace) -> None:
    marketplace.register_account("u")
    for action in (marketplace.browse, marketplace.add_to_wishlist, marketplace.add_to_cart):
        with pytest.raises(ItemNotFoundError):
            action("u", "no-such-item")
    assert not marketplace.users["u"].has_item_history


# -------------------------------
# Marketplace adapter
# -------------------------------
def test_marketplace_implements_the_adapter(marketplace: SimulatedMarketplace) -> None:
    assert isinstance(marketplace, PlatformAdapter)


def test_marketplace_requires_registration(marketplace: SimulatedMarketplace) -> None:
    with pytest.raises(DataError):
        marketplace.search("ghost", "vaccine")
    first = marketplace.register_account("u")
    assert marketplace.register_account("u") is first


def test_marketplace_search_matches_direct_search(catalog: Catalog, marketplace: SimulatedMarketplace) -> None:
    marketplace.register_account("u")
    direct = search(catalog, "vaccine safety", SearchAlgorithm.FEATURED, UserState(account_id="d"))
    for _ in range(2):
        page = marketplace.search("u", "vaccine safety", SearchAlgorithm.FEATURED, 20)
        assert page.item_ids == direct.item_ids
    assert len(marketplace.users["u"].search_history) == 2


def test_identical_action_sequences_replay_identically(catalog: Catalog, config: PersonalizationConfig) -> None:
    def session(platform: SimulatedMarketplace) -> list:
        platform.register_account("u")
        platform.start_session("u", 1)
        for item_id in _pro(catalog)[:4]:
            platform.add_to_cart("u", item_id)
        return [
            platform.search("u", "vaccine", SearchAlgorithm.FEATURED, 20).model_dump(),
            platform.homepage("u", label=CaptureLabel.AFTER_SEARCH).model_dump(),
        ]

    assert session(SimulatedMarketplace(catalog, config)) == session(SimulatedMarketplace(catalog, config))


# -------------------------------
# Catalog and configuration
# -------------------------------
def test_generated_catalog_is_deterministic_and_complete() -> None:
    first = generate_catalog(seed=11, n_pro=5, n_neutral=6, n_anti=7, n_off_topic=8, n_non_english=2, n_removed=1)
    second = generate_catalog(seed=11, n_pro=5, n_neutral=6, n_anti=7, n_off_topic=8, n_non_english=2, n_removed=1)
    assert [i.model_dump() for i in first] == [i.model_dump() for i in second]
    assert len(first) == 29
    prefixes = [i.item_id.split("-")[0] for i in first]
    assert {p: prefixes.count(p) for p in set(prefixes)} == {
        "pro": 5, "neutral": 6, "anti": 7, "general": 8, "foreign": 2, "removed": 1,
    }


def test_all_neutral_catalog_has_no_stance(tmp_path: Path) -> None:
    catalog = generate_catalog(seed=1, n_pro=3, n_neutral=3, n_anti=3, n_off_topic=3, all_neutral=True)
    assert {i.stance for i in catalog} <= {0, None}
    save_catalog(tmp_path / "catalog.jsonl", catalog)
    assert [i.item_id for i in load_catalog(tmp_path / "catalog.jsonl")] == [i.item_id for i in catalog]


def test_catalog_rejects_duplicates_and_bad_ratings() -> None:
    with pytest.raises(DataError):
        Catalog([make_item("a"), make_item("a")])
    with pytest.raises(ValidationError):
        make_item("a", avg_rating=0.5, num_ratings=3)
    assert make_item("a", avg_rating=0.0, num_ratings=0).num_ratings == 0
    with pytest.raises(ItemNotFoundError):
        Catalog([make_item("a")]).get("b")


def test_platform_config_file(tmp_path: Path) -> None:
    write_text(tmp_path / "plan.yaml", "days: 2\nplatform:\n  homepage_bubble_weight: 0.0\n  components: 2\n")
    config = load_platform_config(tmp_path / "plan.yaml", overrides={"rng_seed": 5})
    assert config.homepage_bubble_weight == 0.0
    assert config.components == 2
    assert config.rng_seed == 5

    write_text(tmp_path / "bad.yaml", "homepage_bubble_weight: -1\n")
    with pytest.raises(ConfigurationError):
        load_platform_config(tmp_path / "bad.yaml")
