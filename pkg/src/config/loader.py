"""
Experiment configuration loading and validation.
"""

from pathlib import Path
from typing import Any, Dict, Union

import yaml
from pydantic import ValidationError

from ..exceptions import ConfigError
from .schema import ExperimentConfig

DEFAULT_CONFIG = Path(__file__).parent / "config.yaml"


def load_config(config_path: Union[str, Path] = DEFAULT_CONFIG) -> ExperimentConfig:
    """Load a YAML (or JSON) experiment file and validate it."""
    path = Path(config_path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r") as f:
        try:
            raw = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse config: {e}") from e
    # a run manifest carries the resolved config under "config"
    if isinstance(raw, dict) and "version" in raw and isinstance(raw.get("config"), dict):
        raw = raw["config"]
    return validate_config(raw)


def validate_config(raw: Dict[str, Any]) -> ExperimentConfig:
    """
    Validate a raw config mapping.

    Raises:
        ConfigError: with the dotted path of the first failing key
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        error = e.errors()[0]
        path = ".".join(str(part) for part in error["loc"]) or error.get("ctx", {}).get("key", "<root>")
        raise ConfigError(error["msg"], path=path) from e
