import logging
import os

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Settings(BaseSettings):
    """Toolkit settings and configuration"""

    # Project Info
    project_name: str = "Collision Census"
    version: str = "1.0.0"

    # Parallelism (COLLISION_CENSUS_THREADS is the fallback for --threads)
    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)

    # Exact oracle
    oracle_max_nodes: int = 4096
    spectral_tolerance: float = 1e-9

    # Frozen constants standing in for the Θ(·) of the size-estimation bounds
    c_burn: float = 4.0
    c_plan: float = 2.0

    log_level: str = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="COLLISION_CENSUS_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


# Global settings instance
settings = Settings()


def validate_settings():
    """Validate critical configuration on startup"""
    if settings.oracle_max_nodes < 2:
        raise ValueError("oracle_max_nodes must be at least 2")

    if settings.c_burn <= 0 or settings.c_plan <= 0:
        raise ValueError("c_burn and c_plan must be positive")

    if settings.log_level.upper() not in LOG_LEVELS:
        raise ValueError(f"unknown log_level {settings.log_level!r}")

    logger.info("✅ Configuration loaded:")
    logger.info(f"   - Version: {settings.version}")
    logger.info(f"   - Threads: {settings.threads}")
    logger.info(f"   - Oracle size guard: {settings.oracle_max_nodes} nodes")
    logger.info(f"   - c_burn={settings.c_burn}, c_plan={settings.c_plan}")


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    validate_settings()
