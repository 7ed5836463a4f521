"""
Project configuration.

A YAML file describes one project: where its repository and snapshot live, which trackers
to fetch, how bugs are labelled, the link patterns, thresholds, time window, variants and
language profiles. Relative paths are resolved against the file's directory and command
line flags override file values.
"""

import logging
import os
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .lexer import ProfileRegistry
from .links import GITHUB_PATTERNS, JIRA_TEMPLATE, LinkPatterns
from .snapshot import DEFAULT_BUG_LABELS, read_json
from .tracer import VARIANTS

logger = logging.getLogger(__name__)

PATH_FIELDS = ("repo_path", "snapshot_dir", "output_dir", "replay_dir", "truth_path")


class TrackerSystem(str, Enum):
    GITHUB = "github"
    JIRA = "jira"


class TrackerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    system: TrackerSystem
    project: str
    base_url: Optional[str] = None
    project_keys: List[str] = Field(default_factory=list)

    @property
    def keys(self) -> List[str]:
        if self.system != TrackerSystem.JIRA:
            return []
        return self.project_keys or [self.project]


class Thresholds(BaseModel):
    max_files: int = Field(default=100, gt=0)
    max_lines: int = Field(default=10000, gt=0)


def _epoch(value: Any) -> Any:
    if isinstance(value, str):
        stamp = datetime.fromisoformat(value)
        if stamp.tzinfo is None:
            stamp = stamp.replace(tzinfo=timezone.utc)
        return int(stamp.timestamp())
    if isinstance(value, datetime):
        return int(value.replace(tzinfo=value.tzinfo or timezone.utc).timestamp())
    return value


class Window(BaseModel):
    start: int
    end: int

    @field_validator("start", "end", mode="before")
    @classmethod
    def parse_time(cls, value):
        return _epoch(value)

    @model_validator(mode="after")
    def check_order(self) -> "Window":
        if self.start >= self.end:
            raise ValueError("window start must precede window end")
        return self

    def as_tuple(self):
        return self.start, self.end


class PatternConfig(BaseModel):
    github: List[str] = Field(default_factory=lambda: list(GITHUB_PATTERNS))
    jira_template: str = JIRA_TEMPLATE

    @field_validator("jira_template")
    @classmethod
    def needs_key(cls, value: str) -> str:
        if "{key}" not in value:
            raise ValueError("Jira pattern template must contain {key}")
        return value


class ProjectConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    project_id: str
    repo_path: Path
    snapshot_dir: Path
    output_dir: Path
    trackers: List[TrackerConfig] = Field(min_length=1)
    bug_labels: List[str] = Field(default_factory=lambda: list(DEFAULT_BUG_LABELS))
    patterns: PatternConfig = Field(default_factory=PatternConfig)
    thresholds: Thresholds = Field(default_factory=Thresholds)
    window: Optional[Window] = None
    variants: List[str] = Field(default_factory=lambda: list(VARIANTS))
    language_profiles: Union[None, str, Dict[str, Any]] = None
    jobs: int = Field(default_factory=lambda: os.cpu_count() or 1, gt=0)
    merge_duplicates: bool = True
    secured_only: bool = False
    replay_dir: Optional[Path] = None
    live: bool = False
    fetch_details: bool = True
    truth_path: Optional[Path] = None

    @field_validator("variants")
    @classmethod
    def known_variants(cls, value: List[str]) -> List[str]:
        unknown = [name for name in value if name not in VARIANTS]
        if unknown:
            raise ValueError(f"unknown variants {unknown}; known: {list(VARIANTS)}")
        return value

    @property
    def project_keys(self) -> List[str]:
        return sorted({key for tracker in self.trackers for key in tracker.keys})

    def link_patterns(self) -> LinkPatterns:
        return LinkPatterns(github=tuple(self.patterns.github), jira_template=self.patterns.jira_template)

    def profile_registry(self) -> ProfileRegistry:
        return ProfileRegistry.load(self.language_profiles)


def _resolve_paths(data: Dict[str, Any], base: Path) -> Dict[str, Any]:
    resolved = dict(data)
    for key in PATH_FIELDS:
        value = resolved.get(key)
        if value is not None and not Path(value).is_absolute():
            resolved[key] = str((base / value).resolve())
    profiles = resolved.get("language_profiles")
    if isinstance(profiles, str) and not Path(profiles).is_absolute():
        resolved["language_profiles"] = str((base / profiles).resolve())
    return resolved


def _build(data: Dict[str, Any], source: str) -> ProjectConfig:
    try:
        return ProjectConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first.get("loc", ())) or "<root>"
        raise ConfigError(
            f"Invalid configuration in {source}: {field}: {first.get('msg')}", field=field
        ) from e


def load_config(path: Optional[Path], overrides: Optional[Dict[str, Any]] = None) -> ProjectConfig:
    """Read a YAML config and apply overrides; without a file the overrides must suffice."""
    overrides = {key: value for key, value in (overrides or {}).items() if value is not None}
    if path is None:
        return config_from_flags(overrides)
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle) or {}
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}", path=path) from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file {path} is not valid YAML: {e}", path=path) from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a mapping")
    data = _resolve_paths(data, path.parent.resolve())
    data.update(overrides)
    config = _build(data, str(path))
    logger.debug(f"Loaded configuration for {config.project_id} from {path}")
    return config


def trackers_from_snapshot(snapshot_dir: Path, project_id: str) -> List[Dict[str, Any]]:
    """Tracker entries implied by the tickets a snapshot already holds."""
    trackers: List[Dict[str, Any]] = [{"system": "github", "project": project_id}]
    manifest = Path(snapshot_dir) / "manifest.json"
    if manifest.is_file():
        data = read_json(manifest)
        keys = sorted({key.rsplit("-", 1)[0] for key in data.get("issues", []) if "-" in key})
        if keys:
            trackers.append({"system": "jira", "project": keys[0], "project_keys": keys})
    return trackers


def config_from_flags(overrides: Dict[str, Any]) -> ProjectConfig:
    missing = [key for key in ("repo_path", "snapshot_dir", "output_dir") if key not in overrides]
    if missing:
        raise ConfigError(f"Without --config the flags must give {', '.join(missing)}")
    data = dict(overrides)
    data.setdefault("project_id", Path(data["repo_path"]).resolve().name)
    data.setdefault("trackers", trackers_from_snapshot(data["snapshot_dir"], data["project_id"]))
    return _build(data, "command line flags")
