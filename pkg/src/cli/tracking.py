"""
Optional MLflow tracking of experiment runs.
"""

from pathlib import Path
from typing import Any, Dict

import structlog

from ..config.schema import ExperimentConfig

logger = structlog.get_logger(__name__)


def _flatten(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def scalar_metrics(results: Dict[str, Any]) -> Dict[str, float]:
    """Numeric leaves of a results record (bools excluded)."""
    return {
        key: float(value)
        for key, value in _flatten(results).items()
        if isinstance(value, (int, float)) and not isinstance(value, bool)
    }


def log_run(config: ExperimentConfig, results: Dict[str, Any], out_dir: Path) -> bool:
    """
    Log parameters, scalar results and artifacts to MLflow.

    Returns:
        True when the run was logged, False when tracking is disabled or
        MLflow is not installed
    """
    if not config.tracking.enabled:
        return False
    try:
        import mlflow
    except ImportError:
        logger.warning("mlflow_unavailable", hint="pip install mlflow to enable tracking")
        return False

    mlflow.set_tracking_uri(config.tracking.tracking_uri)
    mlflow.set_experiment(config.tracking.experiment_name)
    params = {k: str(v) for k, v in _flatten(config.model_dump(mode="json")).items()}
    with mlflow.start_run(run_name=f"{config.command}_seed{config.seed}"):
        mlflow.log_params(params)
        mlflow.log_metrics(scalar_metrics(results))
        mlflow.log_artifacts(str(out_dir))
    logger.info("run_tracked", uri=config.tracking.tracking_uri, experiment=config.tracking.experiment_name)
    return True
