"""
Search-query curation.

Candidate queries are collected from suggestion providers (trend topics for a
subject, autocomplete suggestions for seed queries, manual lists), merged in
provider order, and shortlisted by dropping duplicates, stem-equal variants
("vaccines" / "vaccine") and overly specific queries of five or more words.
Stance annotation of the final set is a separate, manual step; annotated
query files are loaded with `load_annotated_queries`.
"""

from __future__ import annotations

import logging
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Protocol, Sequence, Set, Tuple

from nltk.stem import PorterStemmer
from pydantic import BaseModel, field_validator

from utils.errors import ConfigurationError, DataError
from utils.file_helpers import read_models, write_jsonl

logger = logging.getLogger(__name__)

MAX_QUERY_WORDS = 4

DEFAULT_STOPWORDS: frozenset[str] = frozenset(
    {"a", "an", "the", "and", "or", "of", "for", "to", "in", "on", "is", "are", "do", "does", "did", "not"}
)


class QuerySource(str, Enum):
    TREND_TOPIC = "trend-topic"
    AUTOCOMPLETE = "autocomplete"
    MANUAL = "manual"


def _tokens(text: str) -> List[str]:
    return text.split()


class QueryCandidate(BaseModel):
    text: str
    source: QuerySource
    seed: Optional[str] = None

    @field_validator("text")
    @classmethod
    def _check_text(cls, v: str) -> str:
        v = " ".join(v.split())
        if not v:
            raise ValueError("query text is empty after trimming")
        if len(_tokens(v)) > 12:
            raise ValueError("query text has more than 12 words")
        return v


class AnnotatedQuery(BaseModel):
    text: str
    stance: int

    @field_validator("text")
    @classmethod
    def _check_text(cls, v: str) -> str:
        v = " ".join(v.split())
        if not v:
            raise ValueError("query text is empty after trimming")
        return v

    @field_validator("stance", mode="before")
    @classmethod
    def _check_stance(cls, v) -> int:
        try:
            stance = int(str(v).strip())
        except ValueError:
            raise ValueError(f"stance must parse as -1, 0 or 1, got {v!r}")
        if stance not in (-1, 0, 1):
            raise ValueError(f"stance must be -1, 0 or 1, got {stance}")
        return stance


# -------------------------------
# Suggestion providers
# -------------------------------
class SuggestionProvider(Protocol):
    name: str
    source: QuerySource

    def suggest(self, key: str) -> List[QueryCandidate]:
        """Return candidates for a topic (trend providers) or a seed query."""
        ...


class FileSuggestionProvider:
    """
    Provider backed by a line-delimited fixture of {text, source, seed} records.

    `suggest(key)` returns, in file order, the records whose `seed` equals `key`
    (case-insensitive) plus records with no seed. The fixture is read lazily on
    first use and cached.
    """

    def __init__(self, name: str, path: Path, source: QuerySource) -> None:
        self.name = name
        self.path = Path(path)
        self.source = QuerySource(source)
        self._records: Optional[List[QueryCandidate]] = None

    def _load(self) -> List[QueryCandidate]:
        if self._records is None:
            if not self.path.is_file():
                raise ConfigurationError(
                    f"[CORPUS] Fixture for provider '{self.name}' not found at {self.path}"
                )
            try:
                self._records = read_models(self.path, QueryCandidate, label="CORPUS")
            except (ConfigurationError, DataError) as e:
                raise ConfigurationError(
                    f"[CORPUS] Fixture for provider '{self.name}' is unreadable: {e}"
                ) from e
        return self._records

    def suggest(self, key: str) -> List[QueryCandidate]:
        wanted = key.strip().lower()
        return [
            r for r in self._load()
            if r.seed is None or r.seed.strip().lower() == wanted
        ]

    def __repr__(self) -> str:
        return f"FileSuggestionProvider(name={self.name!r}, source={self.source.value!r})"


def curate_queries(
    providers: Sequence[SuggestionProvider],
    topic: str,
    seeds: Sequence[str],
) -> List[QueryCandidate]:
    """Union of provider outputs in provider order, case-insensitive duplicates removed.

    Trend-topic providers are asked for `topic`; every other provider is asked
    once per seed, in seed order.

    Raises:
        ConfigurationError: No providers, no seeds, or an unreadable provider fixture.
    """
    if not providers:
        raise ConfigurationError("[CORPUS] At least one suggestion provider is required.")
    if not seeds:
        raise ConfigurationError("[CORPUS] At least one seed query is required.")

    seen: Set[str] = set()
    out: List[QueryCandidate] = []
    for provider in providers:
        keys = [topic] if provider.source == QuerySource.TREND_TOPIC else list(seeds)
        for key in keys:
            for cand in provider.suggest(key):
                folded = cand.text.lower()
                if folded in seen:
                    continue
                seen.add(folded)
                out.append(cand)
    logger.info(f"[CORPUS] Curated {len(out)} unique candidates from {len(providers)} providers")
    return out


# -------------------------------
# Shortlisting
# -------------------------------
SimilarityKey = Callable[[str, Set[str]], Tuple[str, ...]]

_stemmer = PorterStemmer()


def stem_key(text: str, stopwords: Set[str]) -> Tuple[str, ...]:
    """Token-wise stems after stopword removal; equal keys mean 'semantically similar'."""
    return tuple(
        _stemmer.stem(tok)
        for tok in _tokens(text.lower())
        if tok not in stopwords
    )


def shortlist(
    candidates: Iterable[QueryCandidate],
    stopwords: Optional[Set[str]] = None,
    similarity_key: SimilarityKey = stem_key,
) -> List[QueryCandidate]:
    """Drop long queries, exact duplicates and stem-equal variants; keep first-seen order.

    A query is "long" when it has more than MAX_QUERY_WORDS whitespace tokens.
    `similarity_key` may be replaced by a stricter matcher; two queries are
    treated as similar when their keys are equal.
    """
    stopwords = {w.lower() for w in (DEFAULT_STOPWORDS if stopwords is None else stopwords)}
    seen_text: Set[str] = set()
    seen_keys: Set[Tuple[str, ...]] = set()
    out: List[QueryCandidate] = []
    for cand in candidates:
        if len(_tokens(cand.text)) > MAX_QUERY_WORDS:
            continue
        folded = cand.text.lower()
        if folded in seen_text:
            continue
        key = similarity_key(cand.text, stopwords)
        # queries made only of stopwords fall back to their literal text
        if not key:
            key = (folded,)
        if key in seen_keys:
            continue
        seen_text.add(folded)
        seen_keys.add(key)
        out.append(cand)
    return out


def load_annotated_queries(path: Path) -> List[AnnotatedQuery]:
    queries = read_models(Path(path), AnnotatedQuery, label="CORPUS")
    seen: Set[str] = set()
    for q in queries:
        if q.text in seen:
            raise DataError(f"[CORPUS] Duplicate query '{q.text}' in {path}")
        seen.add(q.text)
    return queries


def save_candidates(path: Path, candidates: Iterable[QueryCandidate]) -> int:
    return write_jsonl(Path(path), (c.model_dump(mode="json") for c in candidates))


def save_annotated_queries(path: Path, queries: Iterable[AnnotatedQuery]) -> int:
    return write_jsonl(Path(path), (q.model_dump(mode="json") for q in queries))


def load_stopwords(path: Optional[Path]) -> Set[str]:
    """One stopword per line; `None` returns the built-in list."""
    if path is None:
        return set(DEFAULT_STOPWORDS)
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"[CORPUS] Stopword file not found at {path}")
    with open(path, "r", encoding="utf-8") as f:
        return {line.strip().lower() for line in f if line.strip() and not line.startswith("#")}
