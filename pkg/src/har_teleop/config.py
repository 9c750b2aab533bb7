"""Service configuration file: one JSON object, strict keys."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Union

from .pipeline import PipelineConfig


@dataclass(frozen=True)
class ServiceConfig:
    """Everything the long-running service needs to come up."""

    model_path: str
    trajectory_library_path: Optional[str] = None
    window_size: int = 40
    fps: float = 20.0
    k_consecutive: int = 5
    queue_capacity: int = 64
    metrics_every: int = 20
    host: str = "127.0.0.1"
    port: int = 8765
    static_dir: Optional[str] = None

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            window_size=self.window_size,
            fps=self.fps,
            k_consecutive=self.k_consecutive,
            queue_capacity=self.queue_capacity,
            metrics_every=self.metrics_every,
        )


def load_service_config(path: Union[str, Path]) -> ServiceConfig:
    """Parse a config file, rejecting unknown keys so typos surface early."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError("config file must hold a JSON object")
    known = {f.name for f in fields(ServiceConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "model_path" not in raw:
        raise ValueError("config file must set model_path")
    return ServiceConfig(**raw)


def save_service_config(path: Union[str, Path], config: ServiceConfig) -> None:
    obj = {f.name: getattr(config, f.name) for f in fields(ServiceConfig)}
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")
