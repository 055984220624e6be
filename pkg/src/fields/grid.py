"""
Uniform box grids, node and cell fields, and the discrete operators on them.

Nodes carry deformations and test functions, cells carry gradients. Every
grid axis has ``n`` cells of width ``h = extent / n``; a periodic axis stores
``n`` nodes (the wrap-around node is identified with node 0), a non-periodic
axis stores ``n + 1``.
"""

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from ..exceptions import InvalidArgumentError

ArrayLike = Union[float, Sequence[float], np.ndarray]


def _per_axis(value, dim: int, cast) -> tuple:
    """Broadcast a scalar or sequence to a per-axis tuple."""
    if np.ndim(value) == 0:
        return tuple(cast(value) for _ in range(dim))
    values = tuple(cast(v) for v in value)
    if len(values) != dim:
        raise InvalidArgumentError(f"expected {dim} per-axis values, got {len(values)}")
    return values


@dataclass(frozen=True)
class GridSpec:
    """
    Uniform box grid on (0, extent_1) x ... x (0, extent_N).

    Attributes:
        dim: Space dimension N (1 or 2)
        n: Cells per axis
        extent: Box length per axis (1.0 for Q and Omega, T for cell problems)
        periodic: Per-axis periodicity flags
    """

    dim: int
    n: Tuple[int, ...]
    extent: Tuple[float, ...]
    periodic: Tuple[bool, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidArgumentError(f"dim must be 1 or 2, got {self.dim}")
        if not (len(self.n) == len(self.extent) == len(self.periodic) == self.dim):
            raise InvalidArgumentError("per-axis tuples must have length dim")
        if any(k < 2 for k in self.n):
            raise InvalidArgumentError(f"need at least 2 cells per axis, got {self.n}")
        if any(not np.isfinite(e) or e <= 0 for e in self.extent):
            raise InvalidArgumentError(f"extent must be positive, got {self.extent}")

    @classmethod
    def box(
        cls,
        dim: int,
        n: Union[int, Sequence[int]],
        extent: ArrayLike = 1.0,
        periodic: Union[bool, Sequence[bool]] = False,
    ) -> "GridSpec":
        """Build a grid from scalar or per-axis parameters."""
        return cls(
            dim=dim,
            n=_per_axis(n, dim, int),
            extent=_per_axis(extent, dim, float),
            periodic=_per_axis(periodic, dim, bool),
        )

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(e / k for e, k in zip(self.extent, self.n))

    @property
    def node_shape(self) -> Tuple[int, ...]:
        return tuple(k if p else k + 1 for k, p in zip(self.n, self.periodic))

    @property
    def cell_shape(self) -> Tuple[int, ...]:
        return tuple(self.n)

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.node_shape))

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.cell_shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def is_periodic(self) -> bool:
        return all(self.periodic)

    def boundary_mask(self) -> np.ndarray:
        """Boolean node array, True on the boundary of every non-periodic axis."""
        mask = np.zeros(self.node_shape, dtype=bool)
        for axis, periodic in enumerate(self.periodic):
            if periodic:
                continue
            index = [slice(None)] * self.dim
            index[axis] = 0
            mask[tuple(index)] = True
            index[axis] = -1
            mask[tuple(index)] = True
        return mask

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dim": self.dim,
            "n": list(self.n),
            "extent": list(self.extent),
            "periodic": list(self.periodic),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GridSpec":
        return cls(
            dim=int(data["dim"]),
            n=tuple(int(k) for k in data["n"]),
            extent=tuple(float(e) for e in data["extent"]),
            periodic=tuple(bool(p) for p in data["periodic"]),
        )


def _freeze(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class VectorField:
    """
    Node-valued field with ``d`` components.

    Attributes:
        grid: Grid the field lives on
        values: Array of shape ``(*grid.node_shape, d)``
    """

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == self.grid.dim:
            values = values[..., None]
        if values.shape[:-1] != self.grid.node_shape:
            raise InvalidArgumentError(
                f"field shape {values.shape} does not match nodes {self.grid.node_shape}"
            )
        object.__setattr__(self, "values", _freeze(values))

    @classmethod
    def from_flat(cls, grid: GridSpec, flat: np.ndarray) -> "VectorField":
        flat = np.asarray(flat, dtype=np.float64)
        d = flat.shape[1] if flat.ndim == 2 else 1
        return cls(grid, flat.reshape(grid.node_shape + (d,)))

    @property
    def components(self) -> int:
        return self.values.shape[-1]

    def flat(self) -> np.ndarray:
        """Values as a ``(num_nodes, d)`` array."""
        return self.values.reshape(self.grid.num_nodes, self.components)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": self.grid.to_dict(),
            "components": self.components,
            "values": self.values.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "VectorField":
        grid = GridSpec.from_dict(data["grid"])
        values = np.asarray(data["values"], dtype=np.float64)
        return cls(grid, values.reshape(grid.node_shape + (int(data["components"]),)))


@dataclass(frozen=True, eq=False)
class GradientField:
    """
    Cell-valued d x N matrix field.

    Attributes:
        grid: Grid the field lives on
        values: Array of shape ``(*grid.cell_shape, d, N)``
    """

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        expected = self.grid.cell_shape
        if values.shape[: self.grid.dim] != expected or values.ndim != self.grid.dim + 2:
            raise InvalidArgumentError(
                f"gradient shape {values.shape} does not match cells {expected} x (d, N)"
            )
        if values.shape[-1] != self.grid.dim:
            raise InvalidArgumentError("last axis of a gradient must have length N")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("gradient field has non-finite entries")
        object.__setattr__(self, "values", _freeze(values))

    @property
    def components(self) -> int:
        return self.values.shape[-2]

    def flat(self) -> np.ndarray:
        """Values as a ``(num_cells, d, N)`` array."""
        return self.values.reshape((self.grid.num_cells,) + self.values.shape[-2:])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": self.grid.to_dict(),
            "components": self.components,
            "values": self.values.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GradientField":
        grid = GridSpec.from_dict(data["grid"])
        shape = grid.cell_shape + (int(data["components"]), grid.dim)
        return cls(grid, np.asarray(data["values"], dtype=np.float64).reshape(shape))


def cell_coordinates(x: ArrayLike, epsilon: float) -> np.ndarray:
    """
    Fractional part of x / epsilon, componentwise.

    Args:
        x: Point (or array of points) in Omega
        epsilon: Period of the microstructure

    Returns:
        Array of the same shape as x with entries in [0, 1)
    """
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    z = np.asarray(x, dtype=np.float64) / epsilon
    if not np.all(np.isfinite(z)):
        raise InvalidArgumentError("x must be finite")
    y = z - np.floor(z)
    # floor can leave 1.0 behind for tiny negative z
    return np.where(y >= 1.0, 0.0, y)


def node_coordinates(grid: GridSpec) -> np.ndarray:
    """Node positions, shape ``(*node_shape, N)``."""
    axes = [np.arange(k) * h for k, h in zip(grid.node_shape, grid.spacing)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def cell_centers(grid: GridSpec) -> np.ndarray:
    """Cell midpoints, shape ``(*cell_shape, N)``."""
    axes = [(np.arange(k) + 0.5) * h for k, h in zip(grid.n, grid.spacing)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


@lru_cache(maxsize=64)
def gradient_operators(grid: GridSpec) -> Tuple[sparse.csr_matrix, ...]:
    """
    Sparse cell-centered derivative matrices, one per axis.

    ``D[a] @ u`` is the derivative along axis ``a`` of the multilinear
    interpolant of the node values ``u``, evaluated at each cell center.
    Periodic axes wrap their node indices.

    Args:
        grid: Grid to discretize

    Returns:
        Tuple of N matrices of shape ``(num_cells, num_nodes)``
    """
    dim = grid.dim
    node_shape = grid.node_shape
    cell_index = np.indices(grid.cell_shape).reshape(dim, -1)
    rows = np.arange(grid.num_cells)
    scale = 0.5 ** (dim - 1)

    operators = []
    for axis in range(dim):
        all_rows, all_cols, all_vals = [], [], []
        for corner in itertools.product((0, 1), repeat=dim):
            node = cell_index + np.asarray(corner)[:, None]
            for b in range(dim):
                if grid.periodic[b]:
                    node[b] %= node_shape[b]
            cols = np.ravel_multi_index(tuple(node), node_shape)
            coef = (2 * corner[axis] - 1) * scale / grid.spacing[axis]
            all_rows.append(rows)
            all_cols.append(cols)
            all_vals.append(np.full(grid.num_cells, coef))
        matrix = sparse.csr_matrix(
            (np.concatenate(all_vals), (np.concatenate(all_rows), np.concatenate(all_cols))),
            shape=(grid.num_cells, grid.num_nodes),
        )
        operators.append(matrix)
    return tuple(operators)


def apply_gradient(grid: GridSpec, flat_nodes: np.ndarray) -> np.ndarray:
    """Cell gradients ``(num_cells, d, N)`` of flat node values ``(num_nodes, d)``."""
    return np.stack([op @ flat_nodes for op in gradient_operators(grid)], axis=-1)


def discrete_gradient(u: VectorField) -> GradientField:
    """
    Cell-centered gradient of a node field.

    Exact for affine fields; on periodic grids the stencil wraps.

    Args:
        u: Node field

    Returns:
        GradientField of shape ``(*cell_shape, d, N)``
    """
    grad = apply_gradient(u.grid, u.flat())
    return GradientField(u.grid, grad.reshape(u.grid.cell_shape + grad.shape[1:]))


def sample(u: VectorField, points: ArrayLike) -> np.ndarray:
    """
    Multilinear interpolation of a node field.

    Periodic axes wrap, non-periodic axes clamp to the box.

    Args:
        u: Node field
        points: One point ``(N,)`` or many ``(M, N)``

    Returns:
        ``(d,)`` for one point, ``(M, d)`` for many
    """
    grid = u.grid
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim <= 1
    pts = pts.reshape(-1, grid.dim)

    lower, frac = [], []
    for axis in range(grid.dim):
        t = pts[:, axis] / grid.spacing[axis]
        k = grid.n[axis]
        if grid.periodic[axis]:
            t = np.mod(t, k)
            i0 = np.floor(t).astype(int)
            w = t - i0
            i0 = np.mod(i0, k)
        else:
            t = np.clip(t, 0.0, k)
            i0 = np.minimum(np.floor(t).astype(int), k - 1)
            w = t - i0
        lower.append(i0)
        frac.append(w)

    result = np.zeros((pts.shape[0], u.components))
    for corner in itertools.product((0, 1), repeat=grid.dim):
        weight = np.ones(pts.shape[0])
        index = []
        for axis, c in enumerate(corner):
            weight = weight * (frac[axis] if c else 1.0 - frac[axis])
            idx = lower[axis] + c
            if grid.periodic[axis]:
                idx = np.mod(idx, grid.n[axis])
            index.append(idx)
        result += weight[:, None] * u.values[tuple(index)]
    return result[0] if single else result


def sample_periodic(u: VectorField, y: ArrayLike) -> np.ndarray:
    """
    Evaluate a Q-periodic node field at y with periodic wrap.

    Args:
        u: Field on a fully periodic grid
        y: Point or points

    Returns:
        Interpolated value(s), identical at y and y + e_j
    """
    if not u.grid.is_periodic:
        raise InvalidArgumentError("sample_periodic needs a fully periodic grid")
    return sample(u, y)


def integrate(values: np.ndarray, grid: GridSpec, average: bool = False):
    """
    Midpoint quadrature of cell values.

    Args:
        values: Cell values, shape ``(*cell_shape, ...)`` or ``(num_cells, ...)``
        grid: Grid the values live on
        average: Divide by the domain volume

    Returns:
        Float for scalar cell values, array otherwise
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[: grid.dim] == grid.cell_shape:
        values = values.reshape((grid.num_cells,) + values.shape[grid.dim:])
    elif values.shape[0] != grid.num_cells:
        raise InvalidArgumentError(
            f"values shape {values.shape} does not match {grid.num_cells} cells"
        )
    total = values.sum(axis=0) * grid.cell_volume
    if average:
        total = total / grid.volume
    return float(total) if np.ndim(total) == 0 else total


def affine_field(grid: GridSpec, F: ArrayLike, c: ArrayLike = 0.0) -> VectorField:
    """Node field u(x) = F x + c for a d x N matrix F."""
    F = as_matrix(F, grid.dim)
    coords = node_coordinates(grid)
    values = np.einsum("kn,...n->...k", F, coords) + np.broadcast_to(c, (F.shape[0],))
    return VectorField(grid, values)


def as_matrix(F: ArrayLike, dim: int) -> np.ndarray:
    """Coerce a scalar, row, or matrix to a ``(d, N)`` float array."""
    F = np.asarray(F, dtype=np.float64)
    if F.ndim == 0:
        F = F.reshape(1, 1)
    if F.ndim == 1:
        F = F.reshape(-1, dim) if F.size % dim == 0 else F.reshape(1, -1)
    if F.shape[-1] != dim:
        raise InvalidArgumentError(f"matrix of shape {F.shape} does not have N={dim} columns")
    return F
