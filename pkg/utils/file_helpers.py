"""
Helper functions for reading and writing the pipeline's file formats.

This module centralizes the file handling used across the service packages
(corpus fixtures, catalogs, run logs, reports). Every reader takes a short
``label`` used in error messages, so a bad fixture is reported as e.g.
``[CORPUS] ...`` with the offending path and line number.

Formats:
    - JSON Lines (``.jsonl``): one JSON object per line, blank lines skipped.
    - YAML (``.yaml``/``.yml``): plan and platform configuration.
    - JSON: single documents (resolved plans, analysis reports).

Usage:

    from utils.file_helpers import read_jsonl, write_jsonl

    records = read_jsonl(Path("catalog.jsonl"), label="PLATFORM")
    write_jsonl(Path("out/pages.jsonl"), (p.model_dump(mode="json") for p in pages))
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Iterable, List, Type, TypeVar

import yaml
from pydantic import BaseModel, ValidationError

from utils.errors import ConfigurationError, DataError

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


def _require_file(path: Path, label: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"[{label}] Missing file at {path}")
    if not path.is_file():
        raise ConfigurationError(f"[{label}] Expected a file at {path}")
    return path


def read_jsonl(path: Path, label: str) -> List[dict]:
    """Read a JSON Lines file into a list of dicts.

    Raises:
        ConfigurationError: If the file is missing or unreadable.
        DataError: If a line is not a JSON object.
    """
    path = _require_file(path, label)
    records: List[dict] = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DataError(f"[{label}] {path}:{lineno}: invalid JSON ({e})") from e
                if not isinstance(obj, dict):
                    raise DataError(f"[{label}] {path}:{lineno}: expected a JSON object")
                records.append(obj)
    except OSError as e:
        raise ConfigurationError(f"[{label}] Cannot read {path}: {e}") from e
    return records


def read_models(path: Path, model: Type[ModelT], label: str) -> List[ModelT]:
    """Read a JSON Lines file and validate every record against `model`."""
    out: List[ModelT] = []
    for lineno, record in enumerate(read_jsonl(path, label), 1):
        try:
            out.append(model.model_validate(record))
        except ValidationError as e:
            raise DataError(f"[{label}] {path}: record {lineno} is not a valid {model.__name__}: {e}") from e
    return out


def write_jsonl(path: Path, records: Iterable[Any]) -> int:
    """Write records (dicts or pydantic models) as JSON Lines. Returns the count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(_to_line(rec))
            n += 1
    logger.debug(f"Wrote {n} records to {path}")
    return n


def append_jsonl(path: Path, record: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as f:
        f.write(_to_line(record))


def _to_line(record: Any) -> str:
    if isinstance(record, BaseModel):
        return record.model_dump_json() + "\n"
    return json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n"


def read_yaml(path: Path, label: str) -> dict:
    path = _require_file(path, label)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigurationError(f"[{label}] {path} is not valid YAML: {e}") from e
    except OSError as e:
        raise ConfigurationError(f"[{label}] Cannot read {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"[{label}] {path} must contain a mapping at the top level.")
    return data


def read_json(path: Path, label: str) -> Any:
    path = _require_file(path, label)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"[{label}] {path} is not valid JSON: {e}") from e


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return path
