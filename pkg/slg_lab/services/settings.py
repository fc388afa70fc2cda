"""Process-level settings using Pydantic.

These never change results: they control logging, the default output directory
and the cap on ensemble workers.
"""

from typing import Literal, Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from slg_lab.constants import DEFAULT_OUT_DIR, LOG_FORMAT, LOG_LEVEL


class LabSettings(BaseSettings):
    """Settings read from SLG_* environment variables."""

    model_config = SettingsConfigDict(env_prefix="SLG_", case_sensitive=False)

    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field(default=LOG_LEVEL)
    log_format: str = Field(default=LOG_FORMAT)
    default_out_dir: str = Field(default=DEFAULT_OUT_DIR)
    max_workers: Optional[int] = Field(default=None, ge=1)

    def worker_count(self, requested: int) -> int:
        """Requested workers, capped by ``max_workers`` when set."""
        if self.max_workers is None:
            return requested
        return min(requested, self.max_workers)


def get_settings() -> LabSettings:
    """Get settings, optionally from environment variables."""
    return LabSettings()
