"""
Minimization of the oscillating functional  u -> int_Omega f(x, <x/eps>, grad u) dx
with affine boundary data on Omega = (0, 1)^N.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import structlog

from ..config.schema import OptimizerConfig
from ..energies.integrand import Integrand
from ..exceptions import InvalidArgumentError
from ..fields.grid import GridSpec, VectorField, affine_field, cell_centers, cell_coordinates
from .cell import _multi_start, _starts, as_gradient_matrix
from .energy import DiscreteEnergy

logger = structlog.get_logger(__name__)


@dataclass
class EpsilonResult:
    """Minimizer of the oscillating functional at one period."""

    epsilon: float
    F: np.ndarray
    minimizer: VectorField
    energy: float
    iterations: int
    converged: bool
    upper_bound: bool = False
    history: List[float] = field(default_factory=list)

    def to_dict(self, include_field: bool = False) -> Dict[str, Any]:
        record = {
            "epsilon": self.epsilon,
            "F": self.F.tolist(),
            "energy": self.energy,
            "iterations": self.iterations,
            "converged": self.converged,
            "upper_bound": self.upper_bound,
        }
        if include_field:
            record["minimizer"] = self.minimizer.to_dict()
        return record


def check_commensurate(epsilon: float, resolution: int) -> int:
    """
    Require 1/eps and eps * resolution to be integers.

    Returns:
        Grid cells per period

    Raises:
        InvalidArgumentError: naming the nearest valid period
    """
    if not np.isfinite(epsilon) or not 0 < epsilon <= 1:
        raise InvalidArgumentError(f"epsilon must lie in (0, 1], got {epsilon}")
    periods = 1.0 / epsilon
    cells = epsilon * resolution
    if abs(periods - round(periods)) > 1e-9 * periods or abs(cells - round(cells)) > 1e-9 * cells or round(cells) < 1:
        # nearest period that divides the grid
        divisors = [k for k in range(1, resolution + 1) if resolution % k == 0]
        nearest = min(divisors, key=lambda k: abs(1.0 / k - epsilon))
        raise InvalidArgumentError(
            f"epsilon={epsilon:g} is not commensurate with {resolution} cells; "
            f"nearest valid epsilon is 1/{nearest}"
        )
    return int(round(cells))


def minimize_epsilon_functional(
    f: Integrand,
    epsilon: float,
    F,
    resolution: int,
    opt: Optional[OptimizerConfig] = None,
) -> EpsilonResult:
    """
    Minimize the oscillating energy with u = F x on the boundary of (0, 1)^N.

    Args:
        f: Integrand
        epsilon: Period; 1/epsilon and epsilon * resolution must be integers
        F: d x N boundary matrix
        resolution: Grid cells per axis
        opt: Descent settings

    Returns:
        EpsilonResult with the best minimizer over all starts
    """
    opt = opt or OptimizerConfig()
    F = as_gradient_matrix(F)
    d, dim = F.shape
    cells = check_commensurate(epsilon, resolution)
    if cells % f.alignment:
        raise InvalidArgumentError(
            f"{cells} cells per period do not resolve the {f.alignment} phases of {f.name}"
        )

    grid = GridSpec.box(dim, resolution)
    centers = cell_centers(grid).reshape(-1, dim)
    y = cell_coordinates(centers, epsilon)
    free_mask = ~grid.boundary_mask()
    affine = affine_field(grid, F).flat()
    energy = DiscreteEnergy(f, grid, affine, free_mask, centers, y, average=False)

    starts = _starts(f, grid, free_mask, affine, opt, ("epsilon", F.tobytes(), float(epsilon)))
    best, best_name = _multi_start(energy, starts, opt)

    result = EpsilonResult(
        epsilon=float(epsilon),
        F=F,
        minimizer=energy.field(best.x),
        energy=best.value,
        iterations=best.iterations,
        converged=best.converged,
        upper_bound=not f.convex,
        history=best.history,
    )
    logger.info(
        "epsilon_problem_solved",
        integrand=f.name,
        epsilon=epsilon,
        energy=result.energy,
        iterations=result.iterations,
        converged=result.converged,
        start=best_name,
    )
    return result
