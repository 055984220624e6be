"""
Subcommand handlers. Each returns a JSON-ready results record and writes
its tabular series and optional fields into the output directory.
"""

import json
import math
from pathlib import Path
from typing import Any, Callable, Dict

import numpy as np
import pandas as pd
import structlog

from ..analysis.checker import verify_characterization
from ..analysis.gamma import gamma_compare
from ..config.schema import ExperimentConfig, OptimizerConfig
from ..energies.catalog import build_integrand
from ..energies.dictionary import default_dictionary
from ..energies.integrand import Integrand
from ..exceptions import ConfigError, InvalidArgumentError
from ..measures.constructions import (
    analytic_example_double_scale,
    analytic_example_single_scale,
    periodic_cell_measure,
)
from ..measures.estimate import estimate_from_sequence
from ..measures.young import TwoScaleYoungMeasure, aggregate, barycenter, moment, spread, y_marginal
from ..solvers.cell import as_gradient_matrix, estimate_fhom, solve_cell_problem
from ..solvers.epsilon import minimize_epsilon_functional
from ..utils.parallel import parallel_map

logger = structlog.get_logger(__name__)


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_json_default)


def boundary_matrix(config: ExperimentConfig) -> np.ndarray:
    """Config F as a d x N matrix matching grid.dim."""
    try:
        F = as_gradient_matrix(config.F)
    except InvalidArgumentError as e:
        raise ConfigError(str(e), path="F") from e
    if F.shape[1] != config.grid.dim:
        raise ConfigError(f"F has {F.shape[1]} columns but grid.dim is {config.grid.dim}", path="F")
    return F


def optimizer_for(config: ExperimentConfig) -> OptimizerConfig:
    """Optimizer settings seeded from the global seed."""
    return config.optimizer.model_copy(update={"seed": config.seed})


def run_cell(config: ExperimentConfig, out_dir: Path, progress: bool = False) -> Dict[str, Any]:
    f = build_integrand(config.integrand)
    F = boundary_matrix(config)
    estimate = estimate_fhom(
        f, F, config.T_list, config.grid.resolution, optimizer_for(config), config.plateau_tol, progress=progress
    )
    estimate.to_frame().to_csv(out_dir / "fhom_vs_T.csv", index=False)
    if config.save_fields:
        for result in estimate.results:
            write_json(out_dir / "fields" / f"cell_T{result.T}.json", result.to_dict(include_field=True))
    return {"integrand": f.name, **estimate.to_dict()}


def _solve_epsilons(config: ExperimentConfig, f: Integrand, F: np.ndarray, progress: bool):
    opt = optimizer_for(config)
    return parallel_map(
        lambda eps: minimize_epsilon_functional(f, eps, F, config.grid.resolution, opt),
        config.epsilon_list,
        config.threads,
        desc="epsilon",
        progress=progress,
    )


def run_epsilon(config: ExperimentConfig, out_dir: Path, progress: bool = False) -> Dict[str, Any]:
    f = build_integrand(config.integrand)
    F = boundary_matrix(config)
    results = _solve_epsilons(config, f, F, progress)
    frame = pd.DataFrame([r.to_dict() for r in results]).drop(columns=["F"])
    frame.to_csv(out_dir / "epsilon_energies.csv", index=False)
    if config.save_fields:
        for k, result in enumerate(results):
            write_json(out_dir / "fields" / f"epsilon_{k}.json", result.to_dict(include_field=True))
    return {"integrand": f.name, "F": F.tolist(), "results": [r.to_dict() for r in results]}


def build_measure(config: ExperimentConfig, progress: bool = False) -> TwoScaleYoungMeasure:
    """Measure described by the generator section of the config."""
    F = boundary_matrix(config)
    gen, binning, dim = config.generator, config.binning, config.grid.dim
    p = getattr(config.integrand, "p", 2.0)
    d = F.shape[0]

    def oscillation(t: np.ndarray) -> np.ndarray:
        # gradient of A sin(2 pi t_1) / (2 pi) in every component
        xi = np.zeros((d, dim))
        xi[:, 0] = gen.amplitude * np.cos(2 * np.pi * t[0])
        return xi

    if gen.kind == "example_single_scale":
        return analytic_example_single_scale(
            lambda x: F, lambda x, y: oscillation(y), binning.x_bins, binning.y_bins, dim, p
        )
    if gen.kind == "example_double_scale":
        return analytic_example_double_scale(
            lambda x: F,
            lambda x, y, z: oscillation(z),
            binning.x_bins,
            binning.y_bins,
            gen.z_resolution,
            dim,
            p,
            binning.merge_radius,
        )

    f = build_integrand(config.integrand)
    if gen.kind == "periodic_cell":
        cell = solve_cell_problem(f, F, gen.T, config.grid.resolution, optimizer_for(config))
        return periodic_cell_measure(
            F, cell.minimizer, binning.y_bins, x_bins=binning.x_bins, p=p, merge_radius=binning.merge_radius
        )

    results = _solve_epsilons(config, f, F, progress)
    pairs = sorted(((r.epsilon, r.minimizer) for r in results), key=lambda pair: -pair[0])
    return estimate_from_sequence(
        pairs, binning.x_bins, binning.y_bins, binning.merge_radius, p, binning.tail_fraction
    )


def measure_summary(nu: TwoScaleYoungMeasure) -> Dict[str, Any]:
    marginal = y_marginal(nu)
    return {
        "x_bins": nu.x_bins,
        "y_bins": nu.y_bins,
        "barycenter": barycenter(nu).mean(axis=(0, 1)).tolist(),
        "p_moment": moment(nu).total,
        "max_spread": float(spread(nu).max()),
        "y_marginal_deviation": float(np.max(np.abs(marginal * nu.num_y - 1.0))),
        "atoms": int(sum(len(dist) for row in nu.cells for dist in row)),
        "distinct_gradients": len(aggregate(nu)),
    }


def run_ym(config: ExperimentConfig, out_dir: Path, progress: bool = False) -> Dict[str, Any]:
    nu = build_measure(config, progress)
    write_json(out_dir / "measure.json", nu.to_dict())
    return {"generator": config.generator.kind, "measure": measure_summary(nu)}


def _check(nu: TwoScaleYoungMeasure, config: ExperimentConfig, out_dir: Path, tag: str):
    dictionary = default_dictionary(nu.shape, nu.p, config.checker.probes)
    checker = config.checker.model_copy(
        update={"optimizer": config.checker.optimizer.model_copy(update={"seed": config.seed})}
    )
    report = verify_characterization(nu, dictionary, checker, threads=config.threads)
    report.slacks.frame.to_csv(out_dir / f"{tag}slacks.csv", index=False)
    return report


def run_check(config: ExperimentConfig, out_dir: Path, progress: bool = False) -> Dict[str, Any]:
    nu = build_measure(config, progress)
    write_json(out_dir / "measure.json", nu.to_dict())
    report = _check(nu, config, out_dir, "")
    return {"generator": config.generator.kind, "report": report.to_dict()}


def run_gamma(config: ExperimentConfig, out_dir: Path, progress: bool = False) -> Dict[str, Any]:
    f = build_integrand(config.integrand)
    F = boundary_matrix(config)
    step = math.lcm(f.alignment, config.binning.y_bins)
    cell_resolution = step * max(1, math.ceil(config.grid.resolution * min(config.epsilon_list) / step))
    report = gamma_compare(
        f,
        F,
        config.epsilon_list,
        config.grid.resolution,
        optimizer_for(config),
        T_list=config.T_list,
        cell_resolution=cell_resolution,
        plateau_tol=config.plateau_tol,
        y_bins=config.binning.y_bins,
        threads=config.threads,
        progress=progress,
    )
    report.to_frame().to_csv(out_dir / "gamma.csv", index=False)
    return report.to_dict()


def run_examples(config: ExperimentConfig, out_dir: Path, progress: bool = False) -> Dict[str, Any]:
    results = {}
    for kind in ("example_single_scale", "example_double_scale"):
        example = config.model_copy(update={"generator": config.generator.model_copy(update={"kind": kind})})
        nu = build_measure(example, progress)
        write_json(out_dir / f"{kind}.json", nu.to_dict())
        report = _check(nu, config, out_dir, f"{kind}_")
        results[kind] = {"measure": measure_summary(nu), "report": report.to_dict()}
    results["passed"] = all(r["report"]["passed"] for r in results.values())
    return results


COMMANDS: Dict[str, Callable[..., Dict[str, Any]]] = {
    "cell": run_cell,
    "epsilon": run_epsilon,
    "ym": run_ym,
    "check": run_check,
    "gamma": run_gamma,
    "examples": run_examples,
}
