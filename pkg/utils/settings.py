"""
Process-wide settings for the audit pipeline.

Values come from (highest priority first) real environment variables, the
project `.env` file (loaded via utils.routing.load_project_env), and the
defaults below. Every variable uses the ``AUDIT_`` prefix, e.g.::

    AUDIT_LOG_LEVEL=DEBUG
    AUDIT_PAGE_SIZE=20
    AUDIT_ACTION_RETRIES=5
"""

from __future__ import annotations

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from utils.routing import load_project_env


class AuditSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="AUDIT_", extra="ignore")

    log_level: str = "INFO"
    page_size: int = Field(default=20, ge=1)
    components: int = Field(default=3, ge=1)
    default_seed: int = 0
    action_retries: int = Field(default=3, ge=1)
    report_bins: int = Field(default=10, ge=1)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    carry_over_threshold_minutes: int = Field(default=11, ge=0)


@lru_cache(maxsize=1)
def get_settings() -> AuditSettings:
    load_project_env(__file__)
    return AuditSettings()
