# Config module
from .loader import DEFAULT_CONFIG, load_config, validate_config
from .schema import CheckerConfig, ExperimentConfig, OptimizerConfig

__all__ = [
    "DEFAULT_CONFIG",
    "load_config",
    "validate_config",
    "CheckerConfig",
    "ExperimentConfig",
    "OptimizerConfig",
]
