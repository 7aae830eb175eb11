import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from hiring_simulator.errors import DomainError
from hiring_simulator.models import ExperimentConfig, validate_model


class ConfigManager:
    """
    Experiment configuration for the simulate subcommand.

    A JSON file mirroring the command-line flags supplies the base values,
    flags given on the command line override them, and ``validate`` turns
    the merged mapping into an ExperimentConfig.
    """

    DEFAULT_CONFIG: Dict[str, Any] = {
        "distribution": {"kind": "uniform01"},
        "n": [1024],
        "reps": 1000,
        "seed": 0,
        "tier": "standard",
        "workers": 1,
    }

    def __init__(self, config_file_path: Optional[str] = None):
        """
        Args:
            config_file_path: JSON experiment file; None starts from the defaults

        Raises:
            DomainError: If the file does not exist
        """
        self.config_file_path = config_file_path
        self.logger = logging.getLogger("hiring.config")
        self.config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        config = json.loads(json.dumps(self.DEFAULT_CONFIG))
        if self.config_file_path is None:
            return config
        if not os.path.exists(self.config_file_path):
            raise DomainError(f"config file {self.config_file_path} does not exist")
        try:
            with open(self.config_file_path, "r") as f:
                loaded = json.load(f)
        except (json.JSONDecodeError, IOError) as e:
            self.logger.error(f"Error loading config file {self.config_file_path}: {e}")
            return config
        if not isinstance(loaded, dict):
            self.logger.error(f"Config file {self.config_file_path} does not hold a JSON object")
            return config
        config.update(_normalize_keys(loaded))
        self.logger.info(f"Loaded experiment config from {self.config_file_path}")
        return config

    def get_config(self) -> Dict[str, Any]:
        return json.loads(json.dumps(self.config))

    def get_value(self, key: str, default: Any = None) -> Any:
        return self.config.get(key, default)

    def set_value(self, key: str, value: Any) -> None:
        self.config[key.replace("-", "_")] = value

    def update_config(self, updates: Dict[str, Any]) -> None:
        """
        Merge overrides; keys whose value is None are ignored.

        Args:
            updates: Flag values keyed by config name
        """
        for key, value in _normalize_keys(updates).items():
            if value is not None:
                self.config[key] = value

    def update_policy(self, name: Optional[str], params: Iterable[str] = ()) -> None:
        """Select a policy by name and apply ``key=value`` parameters to it."""
        self.config["policy"] = _merge_spec(self.config.get("policy"), "policy", name, params)

    def update_distribution(self, kind: Optional[str], params: Iterable[str] = ()) -> None:
        """Select a distribution by kind and apply ``key=value`` parameters to it."""
        current = self.config.get("distribution")
        merged = _merge_spec(current, "kind", kind, ())
        extra = parse_assignments(params)
        if extra:
            merged["params"] = {**merged.get("params", {}), **extra}
        self.config["distribution"] = merged

    def validate(self) -> ExperimentConfig:
        """
        Raises:
            pydantic.ValidationError: Listing every invalid field
        """
        return validate_model(ExperimentConfig, self.config)

    def save_config(self, path: Optional[str] = None) -> None:
        """Write the resolved configuration, by default back to the loaded file."""
        target = path or self.config_file_path
        if target is None:
            raise DomainError("no path to save the configuration to")
        try:
            Path(target).write_text(json.dumps(self.config, indent=2) + "\n")
        except IOError as e:
            self.logger.error(f"Error saving config file {target}: {e}")


def parse_assignments(assignments: Iterable[str]) -> Dict[str, Any]:
    """
    Parse ``key=value`` strings; values are read as JSON when possible.

    Raises:
        DomainError: On an item without '='
    """
    parsed: Dict[str, Any] = {}
    for item in assignments:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise DomainError(f"expected key=value, got {item!r}")
        try:
            parsed[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            parsed[key.strip()] = raw
    return parsed


def _merge_spec(
    current: Any, name_key: str, name: Optional[str], params: Iterable[str]
) -> Dict[str, Any]:
    base = dict(current) if isinstance(current, dict) else {}
    if name is not None and base.get(name_key) != name:
        base = {name_key: name}
    base.update(parse_assignments(params))
    return base


def _normalize_keys(values: Dict[str, Any]) -> Dict[str, Any]:
    return {key.replace("-", "_"): value for key, value in values.items()}
