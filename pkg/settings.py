import os
from typing import ClassVar, Optional
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

load_dotenv()  # Load environment variables from .env file

TOOLKIT_VERSION = "0.3.0"


class Settings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    max_carleman_dim: int = Field(default=1_000_000, ge=1)
    max_grid_nodes: int = Field(default=1_000_000, ge=1)
    max_sweep_cells: int = Field(default=4096, ge=1)
    max_dense_dim: int = Field(default=64, ge=1)
    blowup_cap: float = Field(default=1e12, gt=0)
    log_level: str = "INFO"
    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)

    _instance: ClassVar[Optional["Settings"]] = None

    @classmethod
    def from_env(cls) -> "Settings":
        # Only variables that are actually set override the defaults
        env_map = {
            "max_carleman_dim": "RDE_MAX_CARLEMAN_DIM",
            "max_grid_nodes": "RDE_MAX_GRID_NODES",
            "max_sweep_cells": "RDE_MAX_SWEEP_CELLS",
            "max_dense_dim": "RDE_MAX_DENSE_DIM",
            "blowup_cap": "RDE_BLOWUP_CAP",
            "log_level": "RDE_LOG_LEVEL",
            "threads": "RDE_THREADS",
        }
        values = {
            field: os.environ[var]
            for field, var in env_map.items()
            if os.environ.get(var, "") != ""
        }
        return cls(**values)

    @classmethod
    def get(cls) -> "Settings":
        if cls._instance is None:
            cls._instance = cls.from_env()
        return cls._instance

    @classmethod
    def reset(cls) -> None:
        cls._instance = None
