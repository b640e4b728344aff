"""Pipeline configuration: defaults, key-value config file, env override.

File format: one `key = value` per line, '#' starts a comment, unknown
keys are rejected. The STREAMMAP_CONFIG env var points at a config file;
CLI flags override file values.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

ENV_CONFIG = "STREAMMAP_CONFIG"


@dataclass(frozen=True)
class PipelineConfig:
    tick_ms: int = 2000
    theta: float = 0.3
    k: int = 10
    window_capacity: int = 500
    window_max_age_ms: int | None = None
    cell_divisor: float = 10.0  # cell_size = median component diameter / this
    margin_cells: float = 1.0
    refresh_utilization: float = 0.25
    refresh_period_ticks: int = 300
    layout_max_iter: int = 200
    layout_rtol: float = 1e-4
    seed: int = 0
    replay_speed: float = 0.0
    palette_path: str | None = None
    stopwords_path: str | None = None

    def __post_init__(self):
        checks = [
            (self.tick_ms > 0, "tick_ms must be positive"),
            (0.0 < self.theta <= 1.0, "theta must be in (0, 1]"),
            (self.k > 0, "k must be positive"),
            (self.window_capacity > 0, "window_capacity must be positive"),
            (self.window_max_age_ms is None or self.window_max_age_ms > 0,
             "window_max_age_ms must be positive when set"),
            (self.cell_divisor > 0, "cell_divisor must be positive"),
            (self.margin_cells >= 0, "margin_cells must be non-negative"),
            (0.0 <= self.refresh_utilization <= 1.0,
             "refresh_utilization must be in [0, 1]"),
            (self.refresh_period_ticks > 0, "refresh_period_ticks must be positive"),
            (self.layout_max_iter > 0, "layout_max_iter must be positive"),
            (self.layout_rtol > 0, "layout_rtol must be positive"),
            (self.seed >= 0, "seed must be non-negative"),
            (self.replay_speed >= 0, "replay_speed must be non-negative"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)


_FIELDS = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    if name in ("palette_path", "stopwords_path"):
        return raw or None
    if name == "window_max_age_ms":
        return None if raw in ("", "none") else int(raw)
    if name in ("theta", "cell_divisor", "margin_cells", "refresh_utilization",
                "layout_rtol", "replay_speed"):
        return float(raw)
    return int(raw)


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def load_config(path: str | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Defaults, then STREAMMAP_CONFIG or `path`, then explicit overrides."""
    values: dict = {}
    path = path or os.environ.get(ENV_CONFIG)
    if path:
        with open(path, "r", encoding="utf-8") as fp:
            values.update(parse_config_text(fp.read()))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)


def dump_config(config: PipelineConfig) -> str:
    lines = ["# streammap pipeline configuration"]
    for f in dataclasses.fields(PipelineConfig):
        value = getattr(config, f.name)
        lines.append(f"{f.name} = {'' if value is None else value}")
    return "\n".join(lines) + "\n"
