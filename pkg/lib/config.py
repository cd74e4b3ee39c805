import os
import logging
from dataclasses import dataclass
from typing import Optional

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    """Process-wide settings read from the environment."""
    log_level: str = "WARNING"
    sweep_cap: int = 1_000_000
    oracle_cap: int = 10_000_000
    workers: int = 1
    mc_chunk_size: int = 10_000
    german_credit_path: Optional[str] = None

    @classmethod
    def from_env(cls) -> "Settings":
        """Build settings from SCREENING_* environment variables.

        Returns:
            Settings: Values from the environment, defaults elsewhere
        """
        try:
            return cls(
                log_level=os.getenv("SCREENING_LOG_LEVEL", "WARNING").upper(),
                sweep_cap=int(os.getenv("SCREENING_SWEEP_CAP", "1000000")),
                oracle_cap=int(os.getenv("SCREENING_ORACLE_CAP", "10000000")),
                workers=int(os.getenv("SCREENING_WORKERS", "1")),
                mc_chunk_size=int(os.getenv("SCREENING_MC_CHUNK", "10000")),
                german_credit_path=os.getenv("GERMAN_CREDIT_PATH") or None,
            )
        except ValueError as e:
            logger.error(f"Failed to read settings from environment: {e}")
            raise


def get_settings() -> Settings:
    """Get the current settings."""
    return Settings.from_env()
