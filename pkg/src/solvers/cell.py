"""
Cell problems on (0, T)^N and the homogenized energy f_hom.

The cell problem at F averages f(<y>, F + grad phi) over (0, T)^N for phi
vanishing on the boundary; its infimum decreases towards f_hom(F) as T grows
through integer multiples.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from tqdm import tqdm

from ..config.schema import OptimizerConfig
from ..energies.integrand import Integrand
from ..exceptions import InvalidArgumentError
from ..fields.grid import GridSpec, VectorField, cell_centers, cell_coordinates
from ..utils.parallel import derive_seed
from .energy import DiscreteEnergy
from .optimizer import minimize

logger = structlog.get_logger(__name__)


def as_gradient_matrix(F) -> np.ndarray:
    """Scalar -> 1x1, row of length N -> 1xN, matrix unchanged."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    if F.ndim != 2 or F.shape[1] not in (1, 2):
        raise InvalidArgumentError(f"F must be a d x N matrix with N in (1, 2), got shape {F.shape}")
    if not np.all(np.isfinite(F)):
        raise InvalidArgumentError("F must be finite")
    return F


def check_cell_size(T) -> int:
    """Return T as int, or raise for non-integer or non-positive T."""
    if isinstance(T, bool) or not np.isfinite(T) or float(T) != int(T) or int(T) < 1:
        raise InvalidArgumentError(f"cell size T must be a positive integer, got {T}")
    return int(T)


@dataclass
class CellProblemResult:
    """Minimizer and averaged energy of one cell problem."""

    F: np.ndarray
    T: int
    value: float
    minimizer: VectorField
    iterations: int
    converged: bool
    resolution: int
    upper_bound: bool = False
    history: List[float] = field(default_factory=list)

    def to_dict(self, include_field: bool = False) -> Dict[str, Any]:
        record = {
            "F": self.F.tolist(),
            "T": self.T,
            "value": self.value,
            "iterations": self.iterations,
            "converged": self.converged,
            "resolution": self.resolution,
            "upper_bound": self.upper_bound,
        }
        if include_field:
            record["minimizer"] = self.minimizer.to_dict()
        return record


@dataclass
class FhomEstimate:
    """Cell values over a list of T and the plateau estimate of f_hom(F)."""

    F: np.ndarray
    results: List[CellProblemResult]
    value: float
    converged: bool
    rel_tol: float

    @property
    def table(self) -> List[Tuple[int, float]]:
        return [(r.T, r.value) for r in self.results]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "T": [r.T for r in self.results],
                "value": [r.value for r in self.results],
                "iterations": [r.iterations for r in self.results],
                "converged": [r.converged for r in self.results],
            }
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "F": self.F.tolist(),
            "table": [{"T": t, "value": v} for t, v in self.table],
            "value": self.value,
            "converged": self.converged,
            "rel_tol": self.rel_tol,
        }


def sawtooth_start(grid: GridSpec, free_mask: np.ndarray, components: int) -> np.ndarray:
    """Node values h * (i mod 2) along the first axis: slopes alternate +1, -1."""
    h = grid.spacing[0]
    index = np.indices(grid.node_shape)[0]
    values = np.where(free_mask, h * (index % 2), 0.0)
    return np.repeat(values.reshape(-1, 1), components, axis=1)


def random_start(grid: GridSpec, free_mask: np.ndarray, components: int, amplitude: float, seed: int) -> np.ndarray:
    """Uniform node noise whose gradients are of size ``amplitude``."""
    rng = np.random.default_rng(seed)
    h = min(grid.spacing)
    values = amplitude * h * rng.uniform(-1.0, 1.0, size=(grid.num_nodes, components))
    values[~free_mask.ravel()] = 0.0
    return values


def tile_field(u: VectorField, k: int) -> VectorField:
    """
    Repeat a field that vanishes on the boundary of (0, T)^N onto (0, kT)^N.

    Args:
        u: Field on a non-periodic box grid with zero boundary values
        k: Repetitions per axis

    Returns:
        Field on the enlarged grid
    """
    grid = u.grid
    big = GridSpec.box(grid.dim, [k * m for m in grid.n], [k * e for e in grid.extent])
    index = np.ix_(*[np.arange(k * m + 1) % m for m in grid.n])
    return VectorField(big, u.values[index])


def _multi_start(
    energy: DiscreteEnergy,
    starts: List[Tuple[str, np.ndarray]],
    opt: OptimizerConfig,
):
    """Run the descent from every start and keep the lowest energy (first wins ties)."""
    best, best_name = None, None
    for name, start in starts:
        result = minimize(energy, energy.free_values(start), opt, energy.gradient_scale())
        logger.debug("start_finished", start=name, value=result.value, iterations=result.iterations)
        if best is None or result.value < best.value:
            best, best_name = result, name
    return best, best_name


def _starts(
    f: Integrand,
    grid: GridSpec,
    free_mask: np.ndarray,
    base: np.ndarray,
    opt: OptimizerConfig,
    task: tuple,
    warm_start: Optional[VectorField] = None,
) -> List[Tuple[str, np.ndarray]]:
    d = base.shape[1]
    starts = [("zero", base)]
    if warm_start is not None:
        starts.append(("warm", warm_start.flat()))
    if not f.convex:
        if grid.dim == 1:
            starts.append(("sawtooth", base + sawtooth_start(grid, free_mask, d)))
        for r in range(opt.restarts - 1):
            seed = derive_seed(opt.seed, *task, r)
            starts.append((f"random{r}", base + random_start(grid, free_mask, d, opt.init_amplitude, seed)))
    return starts


def solve_cell_problem(
    f: Integrand,
    F,
    T: int,
    resolution: int,
    opt: Optional[OptimizerConfig] = None,
    x=None,
    warm_start: Optional[VectorField] = None,
) -> CellProblemResult:
    """
    Minimize the averaged energy of F + grad phi over (0, T)^N, phi = 0 on the boundary.

    Args:
        f: Integrand; x is frozen at ``x`` (origin by default)
        F: d x N matrix (scalar or row accepted)
        T: Positive integer cell size
        resolution: Grid cells per unit cell along each axis
        opt: Descent settings
        x: Macroscopic point for x-dependent integrands
        warm_start: Optional extra starting field on the same grid

    Returns:
        CellProblemResult holding the best minimizer over all starts
    """
    opt = opt or OptimizerConfig()
    T = check_cell_size(T)
    F = as_gradient_matrix(F)
    d, dim = F.shape
    if resolution % f.alignment:
        raise InvalidArgumentError(
            f"resolution {resolution} does not resolve the {f.alignment} phases of {f.name}"
        )

    grid = GridSpec.box(dim, T * resolution, extent=float(T))
    centers = cell_centers(grid).reshape(-1, dim)
    y = cell_coordinates(centers, 1.0)
    x_points = np.broadcast_to(np.zeros(dim) if x is None else np.asarray(x, float), centers.shape)

    free_mask = ~grid.boundary_mask()
    base = np.zeros((grid.num_nodes, d))
    energy = DiscreteEnergy(f, grid, base, free_mask, x_points, y, offset=F)
    if warm_start is not None and warm_start.grid != grid:
        raise InvalidArgumentError("warm start lives on a different grid")

    starts = _starts(f, grid, free_mask, base, opt, ("cell", F.tobytes(), T), warm_start)
    best, best_name = _multi_start(energy, starts, opt)

    result = CellProblemResult(
        F=F,
        T=T,
        value=best.value,
        minimizer=energy.field(best.x),
        iterations=best.iterations,
        converged=best.converged,
        resolution=resolution,
        upper_bound=not f.convex,
        history=best.history,
    )
    logger.info(
        "cell_problem_solved",
        integrand=f.name,
        T=T,
        value=result.value,
        iterations=result.iterations,
        converged=result.converged,
        start=best_name,
    )
    return result


def estimate_fhom(
    f: Integrand,
    F,
    T_list: Sequence[int],
    resolution: int,
    opt: Optional[OptimizerConfig] = None,
    rel_tol: float = 1e-3,
    x=None,
    progress: bool = False,
) -> FhomEstimate:
    """
    Solve the cell problem for increasing T and detect a plateau.

    Each T after the first also starts from the previous minimizer tiled
    onto the larger cell, so values never increase along the list beyond
    the descent tolerance.

    Args:
        f: Integrand
        F: d x N matrix
        T_list: Increasing integer multiples, e.g. [1, 2, 4]
        resolution: Grid cells per unit cell
        opt: Descent settings
        rel_tol: Plateau criterion |v(2T) - v(T)| <= rel_tol (1 + |v(T)|)
        x: Macroscopic point for x-dependent integrands
        progress: Show a progress bar over T_list

    Returns:
        FhomEstimate; value is the last cell value, converged tells whether
        the final pair of the list sits on a plateau
    """
    T_list = [check_cell_size(T) for T in T_list]
    if not T_list:
        raise InvalidArgumentError("T_list must not be empty")
    for small, large in zip(T_list, T_list[1:]):
        if large <= small or large % small:
            raise InvalidArgumentError(f"T_list must increase through integer multiples, got {T_list}")

    results: List[CellProblemResult] = []
    for T in tqdm(T_list, desc="cell sizes", disable=not progress):
        warm = None
        if results:
            warm = tile_field(results[-1].minimizer, T // results[-1].T)
        results.append(solve_cell_problem(f, F, T, resolution, opt, x=x, warm_start=warm))

    values = [r.value for r in results]
    converged = False
    if len(values) > 1:
        previous, last = values[-2], values[-1]
        converged = abs(last - previous) <= rel_tol * (1.0 + abs(previous))
    elif f.convex:
        converged = results[0].converged

    estimate = FhomEstimate(
        F=as_gradient_matrix(F), results=results, value=values[-1], converged=converged, rel_tol=rel_tol
    )
    logger.info("fhom_estimated", integrand=f.name, value=estimate.value, converged=converged, T_list=T_list)
    return estimate


def solve_periodic_cell_problem(
    f: Integrand,
    F,
    resolution: int,
    opt: Optional[OptimizerConfig] = None,
    x=None,
) -> CellProblemResult:
    """
    Single-cell periodic formula: minimize over Q-periodic correctors.

    Equals f_hom(F) for convex integrands. One node is pinned to remove the
    constant null space.

    Returns:
        CellProblemResult with T = 1 and a minimizer on the periodic grid
    """
    opt = opt or OptimizerConfig()
    F = as_gradient_matrix(F)
    d, dim = F.shape
    if resolution % f.alignment:
        raise InvalidArgumentError(
            f"resolution {resolution} does not resolve the {f.alignment} phases of {f.name}"
        )

    grid = GridSpec.box(dim, resolution, periodic=True)
    centers = cell_centers(grid).reshape(-1, dim)
    y = cell_coordinates(centers, 1.0)
    x_points = np.broadcast_to(np.zeros(dim) if x is None else np.asarray(x, float), centers.shape)

    free_mask = np.ones(grid.node_shape, dtype=bool)
    free_mask.flat[0] = False
    base = np.zeros((grid.num_nodes, d))
    energy = DiscreteEnergy(f, grid, base, free_mask, x_points, y, offset=F)

    starts = _starts(f, grid, free_mask, base, opt, ("periodic", F.tobytes()))
    best, _ = _multi_start(energy, starts, opt)
    logger.info("periodic_cell_problem_solved", integrand=f.name, value=best.value, iterations=best.iterations)
    return CellProblemResult(
        F=F,
        T=1,
        value=best.value,
        minimizer=energy.field(best.x),
        iterations=best.iterations,
        converged=best.converged,
        resolution=resolution,
        upper_bound=not f.convex,
        history=best.history,
    )
