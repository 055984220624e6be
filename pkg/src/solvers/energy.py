"""
Discrete energies  sum_c w f(x_c, y_c, F + grad u(c))  over grid cells.
"""

from typing import Optional, Tuple

import numpy as np

from ..energies.integrand import Integrand, gradient_xi_batch
from ..exceptions import InvalidArgumentError
from ..fields.grid import GridSpec, VectorField, apply_gradient, gradient_operators


class DiscreteEnergy:
    """
    Midpoint-quadrature energy of a node field with some nodes held fixed.

    The unknowns are the values at the free nodes, flattened to a vector of
    length ``num_free * d``. Fixed nodes keep the values of ``base``.

    Args:
        integrand: Energy density
        grid: Grid carrying the field
        base: Node values ``(num_nodes, d)``; entries at free nodes are ignored
        free_mask: Boolean node array, True where the value is an unknown
        x: Macroscopic points per cell ``(num_cells, N)``
        y: Cell points per cell ``(num_cells, N)`` in [0, 1)
        offset: Constant matrix added to every cell gradient (the F of a cell problem)
        average: Divide by the domain volume
    """

    def __init__(
        self,
        integrand: Integrand,
        grid: GridSpec,
        base: np.ndarray,
        free_mask: np.ndarray,
        x: np.ndarray,
        y: np.ndarray,
        offset: Optional[np.ndarray] = None,
        average: bool = True,
    ):
        self.integrand = integrand
        self.grid = grid
        self.x = np.asarray(x, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        if self.y.shape != (grid.num_cells, grid.dim):
            raise InvalidArgumentError("cell points do not match the grid")

        base = np.array(base, dtype=np.float64).reshape(grid.num_nodes, -1)
        self.components = base.shape[1]
        free = np.asarray(free_mask, dtype=bool).ravel()
        self.free_index = np.flatnonzero(free)
        base[self.free_index] = 0.0
        self.base = base

        ops = gradient_operators(grid)
        self.ops = tuple(op.tocsc()[:, self.free_index].tocsr() for op in ops)
        self.ops_t = tuple(op.T.tocsr() for op in self.ops)
        fixed = apply_gradient(grid, base)
        if offset is not None:
            fixed = fixed + np.asarray(offset, dtype=np.float64)[None, :, :]
        self.fixed_gradient = fixed
        self.weight = grid.cell_volume / grid.volume if average else grid.cell_volume

    @property
    def size(self) -> int:
        return self.free_index.size * self.components

    def gradients(self, free: np.ndarray) -> np.ndarray:
        """Cell gradients ``(num_cells, d, N)`` including the fixed part."""
        u = np.asarray(free, dtype=np.float64).reshape(-1, self.components)
        moving = np.stack([op @ u for op in self.ops], axis=-1)
        return self.fixed_gradient + moving

    def value(self, free: np.ndarray) -> float:
        xi = self.gradients(free)
        return float(self.weight * np.sum(self.integrand.density(self.x, self.y, xi)))

    def __call__(self, free: np.ndarray) -> Tuple[float, np.ndarray]:
        xi = self.gradients(free)
        with np.errstate(over="ignore", invalid="ignore"):
            total = self.weight * np.sum(self.integrand.density(self.x, self.y, xi))
        if not np.isfinite(total):
            return float("inf"), np.zeros(self.size)
        sigma = gradient_xi_batch(self.integrand, self.x, self.y, xi)
        grad = sum(self.ops_t[a] @ sigma[:, :, a] for a in range(self.grid.dim))
        return float(total), (self.weight * grad).ravel()

    def free_values(self, nodes: np.ndarray) -> np.ndarray:
        """Extract the unknown vector from full node values."""
        nodes = np.asarray(nodes, dtype=np.float64).reshape(self.grid.num_nodes, -1)
        return nodes[self.free_index].ravel()

    def field(self, free: np.ndarray) -> VectorField:
        """Assemble the full node field from the unknowns."""
        nodes = self.base.copy()
        nodes[self.free_index] = np.asarray(free, dtype=np.float64).reshape(-1, self.components)
        return VectorField.from_flat(self.grid, nodes)

    def gradient_scale(self) -> float:
        """Factor turning nodal gradients into jumps of the stress between neighbouring cells."""
        return min(self.grid.spacing) / self.weight
