"""Adapter configuration: model ids, device, optional denoising."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

DEFAULT_DIARIZATION_MODEL = "pyannote/speaker-diarization-community-1"
DEFAULT_ASR_MODEL = "bengaliAI/tugstugi_bengaliai-asr_whisper-medium"


@dataclass(frozen=True)
class AdapterConfig:
    diarization_model_id: str = DEFAULT_DIARIZATION_MODEL
    asr_model_id: str = DEFAULT_ASR_MODEL
    device: str = "cpu"
    enable_denoise: bool = False

    def __post_init__(self):
        if not self.diarization_model_id:
            raise ValueError("diarization_model_id must be non-empty")
        if not self.asr_model_id:
            raise ValueError("asr_model_id must be non-empty")


def load_config(path: str | Path | None = None, **overrides) -> AdapterConfig:
    """Read an optional JSON/TOML config file; keyword overrides win."""
    values: dict = {}
    if path is not None:
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        doc = tomllib.loads(text) if path.suffix.lower() == ".toml" else json.loads(text)
        known = {f.name for f in fields(AdapterConfig)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(doc)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return AdapterConfig(**values)
