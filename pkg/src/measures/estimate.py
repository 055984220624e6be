"""
Empirical two-scale Young measures of generating sequences.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..exceptions import InvalidArgumentError, UnderResolvedError
from ..fields.grid import VectorField, apply_gradient, cell_centers, cell_coordinates
from .young import DEFAULT_MERGE_RADIUS, DiscreteDistribution, TwoScaleYoungMeasure, bin_index

logger = structlog.get_logger(__name__)


@dataclass
class SequenceSpec:
    """
    Description of a generating sequence.

    Attributes:
        epsilons: Strictly decreasing periods
        generator: Generator tag (minimizer, example_single_scale, ...)
        params: Generator parameters
        tail_fraction: Fraction of the sequence accumulated; None keeps the last member only
    """

    epsilons: List[float]
    generator: str
    params: Dict[str, Any] = field(default_factory=dict)
    tail_fraction: Optional[float] = None

    def __post_init__(self):
        if not self.epsilons:
            raise InvalidArgumentError("a sequence needs at least one epsilon")
        if any(e <= 0 for e in self.epsilons):
            raise InvalidArgumentError("epsilons must be positive")
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise InvalidArgumentError("epsilons must decrease strictly")
        if self.tail_fraction is not None and not 0 < self.tail_fraction <= 1:
            raise InvalidArgumentError("tail fraction must lie in (0, 1]")

    def tail(self, members: Sequence) -> list:
        """Members used for accumulation."""
        members = list(members)
        if self.tail_fraction is None:
            return members[-1:]
        count = max(1, math.ceil(self.tail_fraction * len(members)))
        return members[-count:]


def estimate_from_sequence(
    fields: Sequence[Tuple[float, VectorField]],
    x_bins: int,
    y_bins: int,
    merge_radius: float = DEFAULT_MERGE_RADIUS,
    p: float = 2.0,
    tail_fraction: Optional[float] = None,
) -> TwoScaleYoungMeasure:
    """
    Bin the cell gradients of a sequence by (x, <x/eps>).

    Every grid cell contributes its gradient at the cell center x, with
    mass equal to the cell volume, to the bin of x and the bin of
    ``cell_coordinates(x, eps)``.

    Args:
        fields: (epsilon, u) pairs ordered by decreasing epsilon, all on one grid of (0,1)^N
        x_bins: Bins per axis of Omega
        y_bins: Bins per axis of Q
        merge_radius: Relative atom merge radius
        p: Growth exponent stored on the measure
        tail_fraction: Accumulate over the last fraction of the sequence; last member only by default

    Returns:
        Empirical TwoScaleYoungMeasure with its raw bin masses

    Raises:
        UnderResolvedError: when some (x-bin, y-bin) pair receives no sample
    """
    if not fields:
        raise InvalidArgumentError("no fields to estimate from")
    spec = SequenceSpec([float(e) for e, _ in fields], "fields", tail_fraction=tail_fraction)
    grid = fields[0][1].grid
    if any(u.grid != grid for _, u in fields):
        raise InvalidArgumentError("all fields must share one grid")
    if any(abs(e - 1.0) > 1e-12 for e in grid.extent):
        raise InvalidArgumentError("fields must live on the unit box")

    dim = grid.dim
    num_x, num_y = x_bins ** dim, y_bins ** dim
    centers = cell_centers(grid).reshape(-1, dim)
    i_index = bin_index(centers, x_bins)
    members = spec.tail(fields)
    mass_per_sample = grid.cell_volume / len(members)

    atoms, keys = [], []
    for epsilon, u in members:
        grad = apply_gradient(grid, u.flat())
        j_index = bin_index(cell_coordinates(centers, epsilon), y_bins)
        atoms.append(grad)
        keys.append(i_index * num_y + j_index)
    atoms = np.concatenate(atoms)
    keys = np.concatenate(keys)

    counts = np.bincount(keys, minlength=num_x * num_y)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        i, j = divmod(int(empty[0]), num_y)
        raise UnderResolvedError(
            f"bin (i={i}, j={j}) received no samples; refine the grid or use fewer bins "
            f"({empty.size} empty bins)"
        )

    order = np.argsort(keys, kind="stable")
    groups = np.split(order, np.cumsum(counts)[:-1])
    cells: List[List[DiscreteDistribution]] = [[None] * num_y for _ in range(num_x)]
    for key, group in enumerate(groups):
        i, j = divmod(key, num_y)
        cells[i][j] = DiscreteDistribution.from_samples(atoms[group], np.full(group.size, mass_per_sample), merge_radius)

    mass = (counts * mass_per_sample).reshape(num_x, num_y)
    logger.debug("measure_estimated", members=len(members), x_bins=x_bins, y_bins=y_bins, samples=int(counts.sum()))
    x_resolution, y_resolution = _sampling_resolutions(grid, [e for e, _ in members], x_bins, y_bins)
    return TwoScaleYoungMeasure(dim, x_bins, y_bins, cells, p, mass, x_resolution, y_resolution)


def _sampling_resolutions(
    grid, epsilons: Sequence[float], x_bins: int, y_bins: int
) -> Tuple[Optional[int], Optional[int]]:
    """Cells per axis behind each x-bin and per period behind each y-bin, None when bins cut cells."""
    n = grid.n[0]
    if len(set(grid.n)) > 1:
        return None, None
    x_resolution = n if n % x_bins == 0 else None
    y_resolution: Optional[int] = 1
    for epsilon in epsilons:
        per_period = epsilon * n
        if per_period < y_bins or abs(per_period - round(per_period)) > 1e-9 or round(per_period) % y_bins:
            y_resolution = None
            break
        y_resolution = math.lcm(y_resolution, int(round(per_period)))
    return x_resolution, y_resolution
