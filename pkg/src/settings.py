"""Process-wide settings read from the environment (and an optional .env file)."""

import os
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, Field

from src.core.qubo import DEFAULT_EXHAUSTIVE_CAP
from src.tools.tsp_tools import DEFAULT_HELD_KARP_CAP

load_dotenv()


class Settings(BaseModel):
    exhaustive_cap: int = Field(default=DEFAULT_EXHAUSTIVE_CAP, ge=1, le=30)
    held_karp_cap: int = Field(default=DEFAULT_HELD_KARP_CAP, ge=3, le=22)
    reads_per_stream: int = Field(default=5000, ge=1)
    log_level: str = "INFO"


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    env = {
        "exhaustive_cap": os.getenv("QTSP_EXHAUSTIVE_CAP"),
        "held_karp_cap": os.getenv("QTSP_HELD_KARP_CAP"),
        "reads_per_stream": os.getenv("QTSP_READS_PER_STREAM"),
        "log_level": os.getenv("QTSP_LOG_LEVEL"),
    }
    return Settings(**{k: v for k, v in env.items() if v is not None})
