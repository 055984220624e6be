"""
Cached f_hom values on a lattice of matrices with multilinear interpolation.
"""

import itertools
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.interpolate import RegularGridInterpolator

from ..config.schema import CheckerConfig
from ..energies.integrand import Integrand
from ..exceptions import HomogenizationError
from ..solvers.cell import estimate_fhom
from ..utils.parallel import parallel_map

logger = structlog.get_logger(__name__)

Axes = Tuple[np.ndarray, ...]


def lattice_axes(points: np.ndarray, lattice_size: int) -> Axes:
    """
    One axis per matrix entry spanning the sampled values.

    Entries taking at most ``lattice_size`` distinct values keep exactly
    those values; others get ``lattice_size`` equally spaced values.
    """
    flat = np.asarray(points, dtype=np.float64).reshape(len(points), -1)
    axes = []
    for column in flat.T:
        unique = np.unique(np.round(column, 12))
        if unique.size > lattice_size:
            unique = np.linspace(unique[0], unique[-1], lattice_size)
        axes.append(unique)
    return tuple(axes)


class FhomProvider:
    """
    f_hom(F) per integrand, solved on a lattice and interpolated in between.

    Args:
        config: Checker settings (cell sizes, resolution, lattice size, optimizer)
        threads: Workers for the lattice solves
        progress: Show progress bars
        axes: Optional fixed lattice; queries outside it are reported as uncovered
    """

    def __init__(
        self,
        config: Optional[CheckerConfig] = None,
        threads: int = 1,
        progress: bool = False,
        axes: Optional[Axes] = None,
    ):
        self.config = config or CheckerConfig()
        self.threads = threads
        self.progress = progress
        self.fixed_axes = axes
        self._values: Dict[Tuple[str, bytes], float] = {}
        self._interpolators: Dict[str, Tuple[Tuple[int, int], RegularGridInterpolator, Axes]] = {}
        self.failures: List[str] = []

    def solve(self, f: Integrand, F: np.ndarray) -> float:
        """Cell-formula value at one matrix, cached by (name, F)."""
        F = np.asarray(F, dtype=np.float64)
        key = (f.name, F.tobytes())
        if key not in self._values:
            cfg = self.config
            estimate = estimate_fhom(f, F, cfg.T_list, cfg.resolution, cfg.optimizer, rel_tol=cfg.plateau_tol)
            self._values[key] = estimate.value
        return self._values[key]

    def prepare(self, f: Integrand, points: Sequence[np.ndarray]) -> None:
        """Solve f_hom on the lattice covering ``points`` (d x N matrices)."""
        points = np.asarray(points, dtype=np.float64)
        shape = points.shape[1:]
        axes = self.fixed_axes or lattice_axes(points, self.config.lattice_size)
        nodes = [np.array(node).reshape(shape) for node in itertools.product(*axes)]

        def task(F):
            try:
                return self.solve(f, F)
            except HomogenizationError as e:
                logger.warning("fhom_lattice_solve_failed", integrand=f.name, F=F.tolist(), error=str(e))
                self.failures.append(f"{f.name} at {F.tolist()}: {e}")
                return np.nan

        values = parallel_map(task, nodes, self.threads, desc=f"f_hom {f.name}", progress=self.progress)
        grid_values = np.asarray(values).reshape(tuple(len(a) for a in axes))

        # singleton axes cannot be interpolated; they are matched exactly instead
        active = [k for k, a in enumerate(axes) if len(a) > 1]
        if active:
            squeezed = grid_values.reshape(tuple(len(axes[k]) for k in active))
            interpolator = RegularGridInterpolator(
                tuple(axes[k] for k in active), squeezed, method="linear", bounds_error=False, fill_value=np.nan
            )
        else:
            interpolator = None
        self._interpolators[f.name] = (shape, interpolator, axes)
        logger.info("fhom_lattice_ready", integrand=f.name, nodes=len(nodes))

    def __call__(self, f: Integrand, F) -> Optional[float]:
        """Interpolated f_hom(F), or None when F lies off the lattice."""
        if f.name not in self._interpolators:
            self.prepare(f, [np.asarray(F, dtype=np.float64)])
        shape, interpolator, axes = self._interpolators[f.name]
        flat = np.asarray(F, dtype=np.float64).reshape(-1)
        active = []
        for k, axis in enumerate(axes):
            if len(axis) == 1:
                if abs(flat[k] - axis[0]) > 1e-12 * (1.0 + abs(axis[0])):
                    return None
            else:
                active.append(k)
        if interpolator is None:
            try:
                value = self.solve(f, np.array([a[0] for a in axes]).reshape(shape))
            except HomogenizationError as e:
                self.failures.append(f"{f.name}: {e}")
                return None
        else:
            value = float(interpolator(flat[active][None, :])[0])
        return None if not np.isfinite(value) else float(value)
