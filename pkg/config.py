import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

# Load environment variables
load_dotenv()


class Settings(BaseModel):
    debug: bool = False
    log_level: str = "WARNING"
    log_file: Optional[str] = None
    # Oracle and enumeration caps
    max_oracle_edges: int = Field(default=20, ge=1)
    max_plan_nodes: int = Field(default=8, ge=1)
    max_block_nodes: int = Field(default=6, ge=1)


def _flag(value: Optional[str]) -> bool:
    return (value or "").strip().lower() in ("1", "true", "yes", "on")


def get_settings() -> Settings:
    """Read settings from the environment (and a .env file if present)"""
    values = {
        "debug": _flag(os.getenv("COVER_ENGINE_DEBUG")),
        "log_level": os.getenv("COVER_ENGINE_LOG_LEVEL", "WARNING"),
        "log_file": os.getenv("COVER_ENGINE_LOG_FILE") or None,
    }
    for name, env in (
        ("max_oracle_edges", "COVER_ENGINE_MAX_ORACLE_EDGES"),
        ("max_plan_nodes", "COVER_ENGINE_MAX_PLAN_NODES"),
        ("max_block_nodes", "COVER_ENGINE_MAX_BLOCK_NODES"),
    ):
        raw = os.getenv(env)
        if raw:
            values[name] = raw
    return Settings(**values)
