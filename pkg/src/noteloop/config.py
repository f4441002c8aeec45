"""Engine and service configuration.

Plain JSON on disk; every field has a default so ``{}`` is a valid
config.  The customized keyword set (note-form words offered in the left
panel) is part of the config and is pinned into the session manifest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path


@dataclass
class EngineConfig:
    customized_keywords: tuple[str, ...] = ("What", "Why", "How", "?")
    backend: str = "mock"  # mock | hosted
    model: str = "gpt-4"
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    timeout_ms: int = 10_000
    api_key_env: str = "NOTELOOP_API_KEY"
    mock_latency_extraction_ms: int = 4290
    mock_latency_derivation_ms: int = 1410
    mock_latency_organization_ms: int = 2890
    mock_jitter_ms: int = 0
    mock_seed: int = 0
    sessions_dir: str = "sessions"
    host: str = "127.0.0.1"
    port: int = 8787
    auth_token: str = ""
    frontend_dir: str = ""

    @property
    def wh_words(self) -> tuple[str, ...]:
        return tuple(w for w in self.customized_keywords if w != "?")

    def mock_latencies(self) -> dict[str, int]:
        return {
            "extraction": self.mock_latency_extraction_ms,
            "derive_contextual": self.mock_latency_derivation_ms,
            "derive_exclusive": self.mock_latency_derivation_ms,
            "organize": self.mock_latency_organization_ms,
        }

    @classmethod
    def from_file(cls, path: str | Path) -> "EngineConfig":
        data = json.loads(Path(path).read_text("utf-8"))
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        if "customized_keywords" in data:
            data = dict(data)
            data["customized_keywords"] = tuple(data["customized_keywords"])
        return cls(**data)

    def manifest_fields(self) -> list[tuple[str, str]]:
        """Config snapshot pinned into a session manifest."""
        return [
            ("backend", self.backend),
            ("model", self.model),
            ("customized_keywords", "|".join(self.customized_keywords)),
            ("mock_latency_extraction_ms", str(self.mock_latency_extraction_ms)),
            ("mock_latency_derivation_ms", str(self.mock_latency_derivation_ms)),
            ("mock_latency_organization_ms", str(self.mock_latency_organization_ms)),
            ("mock_jitter_ms", str(self.mock_jitter_ms)),
            ("mock_seed", str(self.mock_seed)),
        ]
