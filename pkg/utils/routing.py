# utils/routing.py
from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Iterable, Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# `pyproject.toml` and `.git` identify the repo root; `.env` lives next to them.
_MARKERS: Iterable[str] = ("pyproject.toml", ".git")


def find_project_root(start: str | Path) -> Path:
    """Walk upward from 'start' until we find a marker that identifies the repo root."""
    p = Path(start).resolve()
    for a in [p] + list(p.parents):
        if any((a / m).exists() for m in _MARKERS):
            return a
    # Fallback: the package lives one level below the root
    return p.parents[1] if len(p.parents) > 1 else p


def load_project_env(start: str | Path) -> Optional[Path]:
    """
    Load `.env` from the project root (if present) into os.environ.

    Variables that are already set win over the file, so `AUDIT_*` overrides
    from the shell keep working.

    Returns:
        The path of the loaded file, or None when no `.env` exists.
    """
    root = find_project_root(start)
    env_path = root / ".env"
    if not env_path.exists():
        return None
    load_dotenv(env_path, override=False)
    logger.debug(f"Loaded environment from {env_path}")
    return env_path


def resolve_path(value: str | os.PathLike, base: str | Path | None = None) -> Path:
    """
    Resolve a fixture path named inside a config file.

    Relative paths are taken relative to `base` (the directory holding the
    file that mentions them) rather than the process working directory.
    """
    path = Path(value).expanduser()
    if path.is_absolute() or base is None:
        return path.resolve()
    base_path = Path(base)
    if base_path.is_file():
        base_path = base_path.parent
    return (base_path / path).resolve()
