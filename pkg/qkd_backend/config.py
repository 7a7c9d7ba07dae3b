import logging
import os
import sys
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from qkd_backend.errors import ConfigurationError

# Load environment variables
load_dotenv()


class Settings(BaseModel):
    log_level: str = Field("INFO", pattern="^(DEBUG|INFO|WARNING|ERROR|CRITICAL)$")
    workers: int = Field(1, ge=1, le=64)
    chunk_size: int = Field(4096, ge=1)
    max_api_pairs: int = Field(1_000_000, ge=0)
    host: str = "0.0.0.0"
    port: int = Field(8000, ge=1, le=65535)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Read settings from the environment (and .env, if present)"""
    raw = {
        "log_level": os.getenv("QKD_LOG_LEVEL", "INFO").upper(),
        "workers": os.getenv("QKD_WORKERS", "1"),
        "chunk_size": os.getenv("QKD_CHUNK_SIZE", "4096"),
        "max_api_pairs": os.getenv("QKD_MAX_API_PAIRS", "1000000"),
        "host": os.getenv("HOST", "0.0.0.0"),
        "port": os.getenv("PORT", "8000"),
    }
    try:
        return Settings(**raw)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e


def setup_logging(level: str = "INFO") -> None:
    """Configure root logging; records go to stderr, never stdout"""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
