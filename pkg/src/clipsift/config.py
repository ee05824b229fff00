"""Single-document configuration.

One JSON file drives the whole toolchain: feature extraction knobs,
clustering knobs, learner knobs, and service settings. Keys are camelCase
mirrors of the dataclass fields; unknown keys are rejected so typos fail
loudly instead of silently keeping a default.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import UsageError
from .features import FeatureConfig
from .mil import MilConfig
from .shots import ClusteringConfig


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    data_dir: str = "sessions"
    min_labels_for_retrain: int = 6

    def validate(self) -> None:
        if not 0 < self.port < 65536:
            raise UsageError(f"service port {self.port} out of range")
        if self.min_labels_for_retrain < 2:
            raise UsageError("minLabelsForRetrain must be at least 2")


@dataclass
class AppConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    mil: MilConfig = field(default_factory=MilConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def validate(self) -> None:
        self.features.validate()
        self.clustering.validate()
        self.mil.validate()
        self.service.validate()


def _snake(camel: str) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "_", camel).lower()


def _camel(snake: str) -> str:
    head, *rest = snake.split("_")
    return head + "".join(part.title() for part in rest)


def section_to_json(dc) -> dict:
    """CamelCase dict of a config dataclass; tuples become lists."""
    out = {}
    for f in dataclasses.fields(dc):
        value = getattr(dc, f.name)
        if isinstance(value, tuple):
            value = list(value)
        out[_camel(f.name)] = value
    return out


def config_to_json(cfg: AppConfig) -> dict:
    return {
        "features": section_to_json(cfg.features),
        "clustering": section_to_json(cfg.clustering),
        "mil": cfg.mil.to_json(),
        "service": section_to_json(cfg.service),
    }


def _apply_section(defaults, doc: dict, section: str):
    """Overlay camelCase JSON keys onto a dataclass instance."""
    fields = {f.name: f for f in dataclasses.fields(defaults)}
    updates = {}
    for key, value in doc.items():
        name = _snake(key)
        if name not in fields:
            raise UsageError(f"config section {section!r}: unknown key {key!r}")
        if isinstance(value, list):
            value = tuple(value)
        updates[name] = value
    return dataclasses.replace(defaults, **updates)


def config_from_json(doc: dict) -> AppConfig:
    """Strict parse of the config document (unknown sections/keys rejected)."""
    if not isinstance(doc, dict):
        raise UsageError("config document must be a JSON object")
    cfg = AppConfig()
    known = {"features", "clustering", "mil", "service"}
    unknown = set(doc) - known
    if unknown:
        raise UsageError(f"config: unknown sections {sorted(unknown)}")
    if "features" in doc:
        cfg.features = _apply_section(cfg.features, doc["features"], "features")
    if "clustering" in doc:
        cfg.clustering = _apply_section(cfg.clustering, doc["clustering"], "clustering")
    if "mil" in doc:
        allowed = set(cfg.mil.to_json())
        bad = set(doc["mil"]) - allowed
        if bad:
            raise UsageError(f"config section 'mil': unknown keys {sorted(bad)}")
        cfg.mil = MilConfig.from_json({**cfg.mil.to_json(), **doc["mil"]})
    if "service" in doc:
        cfg.service = _apply_section(cfg.service, doc["service"], "service")
    cfg.validate()
    return cfg


def load_config(path: str | Path | None) -> AppConfig:
    """Parse a config file; None means all defaults."""
    if path is None:
        cfg = AppConfig()
        cfg.validate()
        return cfg
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file {p} does not exist")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {p} is not valid JSON: {exc}") from exc
    return config_from_json(doc)
