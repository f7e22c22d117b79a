"""Engine configuration with optional TOML overrides.

Every knob has a compiled-in default; a config file (``--config`` flag or
``WEAVE_CONFIG`` env var) may override any subset. Env vars ``WEAVE_TIER``,
``WEAVE_CACHE_DIR`` and ``WEAVE_API_TOKEN`` are read where they apply, not
here.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 path
    import tomli as tomllib


@dataclass(frozen=True)
class Config:
    # VRAM thresholds (MB) separating low/medium and medium/high tiers.
    tier_medium_mb: int = 8192
    tier_high_mb: int = 24576
    # Plan-cost multipliers per precision; makes tier choice visible in cost.
    precision_factors: dict = field(
        default_factory=lambda: {"int4": 1.0, "int8": 1.2, "fp16": 1.5}
    )
    max_repair_attempts: int = 2
    default_timeout_ms: int = 60000
    event_buffer_size: int = 1024
    # HTTP retry schedule: base delay doubles each attempt, max 3 tries.
    backoff_base_ms: int = 500
    backoff_factor: float = 2.0
    backoff_max_tries: int = 3


def load_config(path: str | os.PathLike | None = None) -> Config:
    """Load overrides from `path`, the WEAVE_CONFIG env var, or defaults."""
    cfg = Config()
    candidate = path or os.environ.get("WEAVE_CONFIG")
    if not candidate:
        return cfg
    data = tomllib.loads(Path(candidate).read_text(encoding="utf-8"))
    known = {f for f in cfg.__dataclass_fields__}
    overrides = {k: v for k, v in data.items() if k in known}
    if "precision_factors" in overrides:
        merged = dict(cfg.precision_factors)
        merged.update(overrides["precision_factors"])
        overrides["precision_factors"] = merged
    return replace(cfg, **overrides)
