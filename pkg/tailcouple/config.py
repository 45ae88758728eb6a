import logging
from functools import lru_cache
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Seed fallback when --seed is not given (TAILCOUPLE_SEED)
    seed: int = 0

    # Estimation defaults
    default_k_exponent: float = 0.45
    default_alpha: float = 0.05

    # Adaptive quadrature
    quad_rel_tol: float = 1e-10
    quad_limit: int = 500

    # Brownian-bridge oracle
    bridge_min_grid: int = 10_000
    bridge_min_reps: int = 1_000
    bridge_grid_size: int = 20_000
    bridge_reps: int = 4_000
    bridge_k_over_n: float = 0.005
    bridge_batch_size: int = 128

    # Simulation lab
    min_replicates: int = 50

    log_level: str = "WARNING"

    model_config = SettingsConfigDict(
        env_prefix="TAILCOUPLE_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


@lru_cache()
def get_settings() -> Settings:
    return Settings()


def configure_logging(level: Optional[str] = None) -> None:
    """Install the `[component] message` log format on the root logger."""
    logging.basicConfig(
        format="[%(name)s] %(message)s",
        level=(level or get_settings().log_level).upper(),
    )
