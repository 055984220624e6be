"""
Measures and sequences built from explicit constructions.

Analytic single- and double-scale examples, the periodic measure of a
cell-problem minimizer, x-averaging, boundary gluing with a cut-off and
the tiling of a sequence by rescaled copies.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..exceptions import InvalidArgumentError, UnderResolvedError
from ..fields.grid import GridSpec, VectorField, apply_gradient, cell_centers, node_coordinates, sample
from ..solvers.cell import as_gradient_matrix, check_cell_size
from .young import (
    DEFAULT_MERGE_RADIUS,
    DiscreteDistribution,
    TwoScaleYoungMeasure,
    bin_centers,
    bin_index,
    combine,
    uniform_measure,
)

MacroGradient = Callable[[np.ndarray], np.ndarray]
CellGradient = Callable[[np.ndarray, np.ndarray], np.ndarray]
FastGradient = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def analytic_example_single_scale(
    grad_u: MacroGradient,
    grad_y_u1: CellGradient,
    x_bins: int,
    y_bins: int,
    dim: int = 1,
    p: float = 2.0,
) -> TwoScaleYoungMeasure:
    """
    delta of grad u(x) + grad_y u_1(x, y) at every bin center.

    Args:
        grad_u: x -> d x N gradient of the macroscopic deformation
        grad_y_u1: (x, y) -> d x N cell gradient of the Q-periodic corrector
        x_bins: Bins per axis of Omega
        y_bins: Bins per axis of Q
        dim: Space dimension
        p: Moment exponent

    Returns:
        TwoScaleYoungMeasure of Diracs
    """
    xs, ys = bin_centers(x_bins, dim), bin_centers(y_bins, dim)

    def build(i, j):
        xi = np.atleast_2d(grad_u(xs[i])) + np.atleast_2d(grad_y_u1(xs[i], ys[j]))
        return DiscreteDistribution.dirac(xi)

    return uniform_measure(dim, x_bins, y_bins, build, p)


def analytic_example_double_scale(
    grad_u: MacroGradient,
    grad_z_u2: FastGradient,
    x_bins: int,
    y_bins: int,
    z_resolution: int,
    dim: int = 1,
    p: float = 2.0,
    merge_radius: float = DEFAULT_MERGE_RADIUS,
) -> TwoScaleYoungMeasure:
    """
    Midpoint quadrature of  int_Q delta of grad u(x) + grad_z u_2(x, y, z) dz.

    Each bin holds one atom per quadrature point z_k (K^N of them, weight
    1/K^N before merging).
    """
    if z_resolution < 1:
        raise InvalidArgumentError("z_resolution must be positive")
    xs, ys, zs = bin_centers(x_bins, dim), bin_centers(y_bins, dim), bin_centers(z_resolution, dim)

    def build(i, j):
        base = np.atleast_2d(grad_u(xs[i]))
        atoms = np.asarray([base + np.atleast_2d(grad_z_u2(xs[i], ys[j], z)) for z in zs])
        return DiscreteDistribution.from_samples(atoms, None, merge_radius)

    return uniform_measure(dim, x_bins, y_bins, build, p)


def periodic_cell_measure(
    F,
    phi: VectorField,
    y_bins: int,
    T: Optional[int] = None,
    x_bins: int = 1,
    p: float = 2.0,
    merge_radius: float = DEFAULT_MERGE_RADIUS,
) -> TwoScaleYoungMeasure:
    """
    Homogeneous measure  T^-N sum_a delta of F + grad phi(a + y)  (x) dy.

    Every y-bin collects the gradients of all cells of (0, T)^N whose cell
    coordinate falls in it, one per integer translate a, with equal mass.

    Args:
        F: d x N matrix
        phi: Field on (0, T)^N vanishing on the boundary
        y_bins: Bins per axis of Q; must divide the cells per unit length
        T: Cell size; read from the grid when omitted
        x_bins: Bins per axis of Omega (all rows equal)
        p: Moment exponent
        merge_radius: Relative atom merge radius

    Returns:
        x-homogeneous TwoScaleYoungMeasure
    """
    grid = phi.grid
    extent = grid.extent[0]
    T = check_cell_size(extent if T is None else T)
    if any(abs(e - T) > 1e-12 for e in grid.extent) or any(grid.periodic):
        raise InvalidArgumentError(f"phi must live on the box (0, {T})^N")
    F = as_gradient_matrix(F)
    resolution = grid.n[0] // T
    if resolution % y_bins:
        raise InvalidArgumentError(f"{resolution} cells per unit do not split into {y_bins} y-bins")

    dim = grid.dim
    grad = F[None] + apply_gradient(grid, phi.flat())
    centers = cell_centers(grid).reshape(-1, dim)
    j_index = bin_index(centers - np.floor(centers), y_bins)

    row = [
        DiscreteDistribution.from_samples(grad[j_index == j], None, merge_radius)
        for j in range(y_bins ** dim)
    ]
    return TwoScaleYoungMeasure(dim, x_bins, y_bins, [row] * (x_bins ** dim), p, y_resolution=resolution)


def two_atom_laminate(F, s: float, y_bins: int = 1, p: float = 2.0) -> TwoScaleYoungMeasure:
    """Homogeneous  (delta_{F-s} + delta_{F+s}) / 2  (x) dy for scalar 1-D gradients."""
    F = as_gradient_matrix(F)
    if F.shape != (1, 1):
        raise InvalidArgumentError("two-atom laminates are scalar and one-dimensional")
    dist = DiscreteDistribution(np.array([F - s, F + s]), np.array([0.5, 0.5]))
    return uniform_measure(1, 1, y_bins, lambda i, j: dist, p)


def average_measure(nu: TwoScaleYoungMeasure, merge_radius: float = DEFAULT_MERGE_RADIUS) -> TwoScaleYoungMeasure:
    """
    Average over x: bin j becomes the mixture of all (i, j) with weight 1/I^N.

    A single x-bin is returned unchanged, so averaging is idempotent.
    """
    if nu.num_x == 1:
        return nu
    masses = [1.0 / nu.num_x] * nu.num_x
    row = [combine([nu.cells[i][j] for i in range(nu.num_x)], masses, merge_radius) for j in range(nu.num_y)]
    mass = None if nu.mass is None else nu.mass.sum(axis=0, keepdims=True)
    return TwoScaleYoungMeasure(nu.dim, 1, nu.y_bins, [row], nu.p, mass, y_resolution=nu.y_resolution)


@dataclass
class CutOff:
    """Piecewise-multilinear cut-off Phi_k at the grid nodes."""

    values: np.ndarray
    k: int
    slope_bound: float


def boundary_cutoff(grid: GridSpec, k: int) -> CutOff:
    """
    Phi_k = clip((dist(x, boundary) - 1/(k+1)) / (1/k - 1/(k+1)), 0, 1).

    Phi_k is 1 at distance above 1/k and 0 within 1/(k+1) of the boundary;
    its slope is at most k (k + 1).

    Raises:
        UnderResolvedError: if 1/k is below two grid spacings
    """
    if k < 1:
        raise InvalidArgumentError(f"cut-off index must be positive, got {k}")
    if 1.0 / k < 2 * max(grid.spacing):
        raise UnderResolvedError(
            f"cut-off at 1/{k} needs a grid spacing below {0.5 / k:g}, got {max(grid.spacing):g}"
        )
    coords = node_coordinates(grid)
    extent = np.asarray(grid.extent)
    dist = np.min(np.minimum(coords, extent - coords), axis=-1)
    inner, outer = 1.0 / k, 1.0 / (k + 1)
    values = np.clip((dist - outer) / (inner - outer), 0.0, 1.0)
    return CutOff(values=values, k=k, slope_bound=float(k * (k + 1)))


def glue_boundary(u_n: VectorField, u: VectorField, k: int) -> VectorField:
    """
    Replace u_n by u near the boundary:  u + Phi_k (u_n - u).

    Args:
        u_n: Sequence member
        u: Target field on the same grid
        k: Cut-off index

    Returns:
        Field equal to u on every node within 1/(k+1) of the boundary
    """
    if u_n.grid != u.grid:
        raise InvalidArgumentError("glued fields must share a grid")
    cut = boundary_cutoff(u.grid, k)
    return VectorField(u.grid, u.values + cut.values[..., None] * (u_n.values - u.values))


def tile_rescale(
    generator: Callable[[int], VectorField],
    F,
    epsilons: Sequence[float],
    grid: GridSpec,
) -> List[VectorField]:
    """
    Homogenize a sequence by tiling Q with rescaled copies.

    For eps = 1/m^2 the tiles have side rho = 1/m and each holds
    rho u_m((x - a)/rho) + F a, where ``generator(m)`` is the sequence
    member with period 1/m. The tiles cover Q exactly.

    Args:
        generator: m -> field on (0,1)^N equal to F x on the boundary
        F: d x N boundary matrix
        epsilons: Periods of the output sequence, each of the form 1/m^2
        grid: Grid of the output fields

    Returns:
        One field per epsilon

    Raises:
        InvalidArgumentError: when some eps is not 1/m^2 (names the nearest valid value)
    """
    F = as_gradient_matrix(F)
    coords = node_coordinates(grid).reshape(-1, grid.dim)
    outputs = []
    for epsilon in epsilons:
        m = max(1, int(round(1.0 / np.sqrt(epsilon))))
        if abs(epsilon * m * m - 1.0) > 1e-9:
            raise InvalidArgumentError(
                f"epsilon={epsilon:g} is not of the form 1/m^2; nearest valid epsilon is 1/{m * m}"
            )
        rho = 1.0 / m
        u_m = generator(m)
        corner = np.minimum(np.floor(coords / rho + 1e-12), m - 1) * rho
        local = (coords - corner) / rho
        values = rho * sample(u_m, local) + corner @ F.T
        outputs.append(VectorField(grid, values.reshape(grid.node_shape + (F.shape[0],))))
    return outputs
