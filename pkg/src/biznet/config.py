"""Engine configuration: YAML file, validated at startup.

Structure::

    sources: ./sources            # mock source directory
    state: ./state.json           # engine state file (optional)
    listen: {host: 127.0.0.1, port: 8040}
    priorities:
      types: [landscape, runtime, configuration]
      origins: {originH7: landscape}
      overrides: {"originX::id7": 1}
    rules:
      - {id: r1, kind: sys, fields: [description]}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .equivalence import MatchRule
from .surrogate import SourcePriorityConfig


class ConfigError(ValueError):
    pass


@dataclass
class EngineConfig:
    source_dir: Path = Path("sources")
    state_path: Path | None = None
    host: str = "127.0.0.1"
    port: int = 8040
    priorities: SourcePriorityConfig = field(default_factory=SourcePriorityConfig)
    rules: list[MatchRule] = field(default_factory=list)
    ui_dir: Path | None = None

    def resolved_state_path(self) -> Path:
        if self.state_path is not None:
            return self.state_path
        return self.source_dir / ".engine-state.json"


def load_config(path: str | Path) -> EngineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ConfigError(f"{where}: {getattr(exc, 'problem', exc)}")
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config root must be a mapping")
    try:
        config = parse_config(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}")
    # relative paths are taken relative to the config file
    base = path.parent
    if not config.source_dir.is_absolute():
        config.source_dir = base / config.source_dir
    if config.state_path is not None and not config.state_path.is_absolute():
        config.state_path = base / config.state_path
    if config.ui_dir is not None and not config.ui_dir.is_absolute():
        config.ui_dir = base / config.ui_dir
    return config


def parse_config(doc: dict) -> EngineConfig:
    config = EngineConfig()
    known = {"sources", "state", "listen", "priorities", "rules", "ui"}
    for key in doc:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}")

    if "sources" in doc:
        config.source_dir = Path(_expect_str(doc["sources"], "sources"))
    if "state" in doc:
        config.state_path = Path(_expect_str(doc["state"], "state"))
    if "ui" in doc:
        config.ui_dir = Path(_expect_str(doc["ui"], "ui"))

    listen = doc.get("listen", {})
    if not isinstance(listen, dict):
        raise ConfigError("listen: must be a mapping")
    if "host" in listen:
        config.host = _expect_str(listen["host"], "listen.host")
    if "port" in listen:
        if not isinstance(listen["port"], int) or isinstance(listen["port"], bool):
            raise ConfigError("listen.port: must be an integer")
        config.port = listen["port"]

    priorities = doc.get("priorities", {})
    if not isinstance(priorities, dict):
        raise ConfigError("priorities: must be a mapping")
    types = priorities.get("types", [])
    if not isinstance(types, list):
        raise ConfigError("priorities.types: must be a list")
    origins = priorities.get("origins", {})
    if not isinstance(origins, dict):
        raise ConfigError("priorities.origins: must be a mapping")
    overrides = priorities.get("overrides", {})
    if not isinstance(overrides, dict):
        raise ConfigError("priorities.overrides: must be a mapping")
    for ref, rank in overrides.items():
        if "::" not in str(ref):
            raise ConfigError(f"priorities.overrides.{ref}: expected origin::id form")
        if not isinstance(rank, int) or isinstance(rank, bool):
            raise ConfigError(f"priorities.overrides.{ref}: rank must be an integer")
    config.priorities = SourcePriorityConfig(
        types=tuple(_expect_str(t, "priorities.types[]") for t in types),
        origins={str(o): _expect_str(t, f"priorities.origins.{o}") for o, t in origins.items()},
        overrides={str(r): int(v) for r, v in overrides.items()},
    )

    rules = doc.get("rules", [])
    if not isinstance(rules, list):
        raise ConfigError("rules: must be a list")
    parsed_rules = []
    for i, rule in enumerate(rules):
        if not isinstance(rule, dict):
            raise ConfigError(f"rules[{i}]: must be a mapping")
        try:
            parsed_rules.append(
                MatchRule(
                    rule_id=_expect_str(rule.get("id"), f"rules[{i}].id"),
                    kind=_expect_str(rule.get("kind"), f"rules[{i}].kind"),
                    fields=tuple(
                        _expect_str(f, f"rules[{i}].fields[]")
                        for f in rule.get("fields", [])
                    ),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"rules[{i}]: {exc}")
    config.rules = parsed_rules
    return config


def _expect_str(value, where: str) -> str:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{where}: must be a non-empty string")
    return value
