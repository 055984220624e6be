"""
Two-scale Young measures on binned (x, y) partitions.

A measure holds, for every pair of an x-bin of Omega = (0,1)^N and a y-bin
of Q = [0,1)^N, a discrete probability distribution on d x N matrices.
Bins are uniform boxes, indexed in C order; the y-partition stands for the
Lebesgue measure dy.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import wasserstein_distance

from ..energies.integrand import Integrand, xi_norm
from ..exceptions import InvalidArgumentError

WEIGHT_TOL = 1e-12
DEFAULT_MERGE_RADIUS = 1e-3


def merge_atoms(atoms: np.ndarray, weights: np.ndarray, radius: float = DEFAULT_MERGE_RADIUS):
    """
    Greedy mass-weighted merging of nearby atoms.

    Atoms are visited in lexicographic order; each joins the first anchor
    within ``radius * (1 + |anchor|)`` or becomes a new anchor. A cluster
    is replaced by its mass-weighted mean, so the first moment is kept.

    Args:
        atoms: ``(k, d, N)`` array
        weights: ``(k,)`` positive masses
        radius: Relative merge radius; 0 merges identical atoms only

    Returns:
        (atoms, weights) of the merged distribution, in lexicographic order
    """
    k = atoms.shape[0]
    flat = atoms.reshape(k, -1)
    order = np.lexsort(flat.T[::-1])
    flat, weights = flat[order], weights[order]

    anchors: List[np.ndarray] = []
    members: List[List[int]] = []
    for idx in range(k):
        point = flat[idx]
        if anchors:
            stacked = np.asarray(anchors)
            dist = np.sqrt(np.sum((stacked - point) ** 2, axis=1))
            limit = radius * (1.0 + np.sqrt(np.sum(stacked ** 2, axis=1)))
            hits = np.flatnonzero(dist <= limit)
            if hits.size:
                members[hits[0]].append(idx)
                continue
        anchors.append(point)
        members.append([idx])

    merged, masses = [], []
    for anchor, group in zip(anchors, members):
        w = weights[group]
        mass = w.sum()
        # mean written as anchor + shift keeps identical atoms bit-exact
        merged.append(anchor + (w[:, None] * (flat[group] - anchor)).sum(axis=0) / mass)
        masses.append(mass)
    return np.asarray(merged).reshape((len(merged),) + atoms.shape[1:]), np.asarray(masses)


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """
    Finitely many atoms in R^{d x N} with positive weights summing to one.

    Attributes:
        atoms: ``(k, d, N)`` array
        weights: ``(k,)`` array
    """

    atoms: np.ndarray = field(repr=False)
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=np.float64)
        weights = np.array(self.weights, dtype=np.float64).ravel()
        if atoms.ndim != 3 or atoms.shape[0] == 0:
            raise InvalidArgumentError("atoms must be a non-empty (k, d, N) array")
        if weights.shape != (atoms.shape[0],):
            raise InvalidArgumentError("one weight per atom is required")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise InvalidArgumentError("atoms and weights must be finite")
        if np.any(weights <= 0):
            raise InvalidArgumentError("weights must be positive")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise InvalidArgumentError(f"weights sum to {weights.sum():.15g}, not 1")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def dirac(cls, xi) -> "DiscreteDistribution":
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        return cls(xi[None], np.ones(1))

    @classmethod
    def from_samples(
        cls, atoms: np.ndarray, weights: Optional[np.ndarray] = None, radius: float = DEFAULT_MERGE_RADIUS
    ) -> "DiscreteDistribution":
        """Normalize raw masses and merge atoms closer than ``radius``."""
        atoms = np.asarray(atoms, dtype=np.float64)
        weights = np.ones(atoms.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
        keep = weights > 0
        atoms, weights = atoms[keep], weights[keep]
        if atoms.shape[0] == 0:
            raise InvalidArgumentError("no atoms with positive mass")
        atoms, weights = merge_atoms(atoms, weights, radius)
        return cls(atoms, weights / weights.sum())

    @property
    def shape(self) -> Tuple[int, int]:
        return self.atoms.shape[1], self.atoms.shape[2]

    def __len__(self) -> int:
        return self.atoms.shape[0]

    def mean(self) -> np.ndarray:
        return np.einsum("k,kij->ij", self.weights, self.atoms)

    def expect(self, values: np.ndarray) -> float:
        """Weighted sum of per-atom values."""
        return float(np.dot(self.weights, values))

    def moment(self, p: float) -> float:
        return self.expect(xi_norm(self.atoms) ** p)

    def spread(self) -> float:
        """Standard deviation  sqrt(sum w |xi - mean|^2)."""
        centered = self.atoms - self.mean()[None]
        return float(np.sqrt(self.expect(np.sum(centered ** 2, axis=(1, 2)))))

    def to_list(self) -> List[Dict[str, Any]]:
        return [{"xi": atom.tolist(), "w": float(w)} for atom, w in zip(self.atoms, self.weights)]


def combine(
    parts: Sequence[DiscreteDistribution], masses: Sequence[float], radius: float = DEFAULT_MERGE_RADIUS
) -> DiscreteDistribution:
    """Mixture  sum_k masses_k parts_k  (masses are normalized, zero masses skipped)."""
    atoms, weights = [], []
    for part, mass in zip(parts, masses):
        if mass > 0:
            atoms.append(part.atoms)
            weights.append(mass * part.weights)
    if not atoms:
        raise InvalidArgumentError("mixture has no positive mass")
    return DiscreteDistribution.from_samples(np.concatenate(atoms), np.concatenate(weights), radius)


def bin_centers(bins: int, dim: int) -> np.ndarray:
    """Centers of a uniform ``bins^dim`` partition of the unit box, C order."""
    axis = (np.arange(bins) + 0.5) / bins
    return np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)


def bin_index(points: np.ndarray, bins: int) -> np.ndarray:
    """Flat C-order bin index of points in the unit box."""
    points = np.asarray(points, dtype=np.float64)
    per_axis = np.clip(np.floor(points * bins).astype(int), 0, bins - 1)
    return np.ravel_multi_index(tuple(per_axis.T), (bins,) * points.shape[1])


@dataclass(frozen=True, eq=False)
class TwoScaleYoungMeasure:
    """
    Binned two-scale Young measure.

    Attributes:
        dim: Space dimension N
        x_bins: Bins per axis of Omega
        y_bins: Bins per axis of Q
        cells: ``cells[i][j]`` is the distribution on x-bin i, y-bin j
        p: Growth exponent used by default moment queries
        mass: Optional raw Lebesgue mass per (i, j) recorded by empirical estimation
        x_resolution: Cells per axis of the grid the x-bins average over, when known
        y_resolution: Cells per unit period the y-bins average over, when known
    """

    dim: int
    x_bins: int
    y_bins: int
    cells: Tuple[Tuple[DiscreteDistribution, ...], ...] = field(repr=False)
    p: float = 2.0
    mass: Optional[np.ndarray] = field(default=None, repr=False)
    x_resolution: Optional[int] = None
    y_resolution: Optional[int] = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidArgumentError(f"dim must be 1 or 2, got {self.dim}")
        if self.x_bins < 1 or self.y_bins < 1:
            raise InvalidArgumentError("bin counts must be positive")
        if not self.p > 1:
            raise InvalidArgumentError("moment exponent p must exceed 1")
        cells = tuple(tuple(row) for row in self.cells)
        if len(cells) != self.num_x or any(len(row) != self.num_y for row in cells):
            raise InvalidArgumentError(
                f"expected {self.num_x} x {self.num_y} cells for {self.x_bins}/{self.y_bins} bins"
            )
        shapes = {dist.shape for row in cells for dist in row}
        if len(shapes) != 1:
            raise InvalidArgumentError(f"atoms of mixed shapes {sorted(shapes)}")
        if next(iter(shapes))[1] != self.dim:
            raise InvalidArgumentError("atom matrices must have N columns")
        object.__setattr__(self, "cells", cells)
        if self.mass is not None:
            mass = np.array(self.mass, dtype=np.float64)
            if mass.shape != (self.num_x, self.num_y):
                raise InvalidArgumentError("mass table does not match the bins")
            mass.setflags(write=False)
            object.__setattr__(self, "mass", mass)
        for name, bins in (("x_resolution", self.x_bins), ("y_resolution", self.y_bins)):
            value = getattr(self, name)
            if value is None:
                continue
            if int(value) < 1 or int(value) % bins:
                raise InvalidArgumentError(f"{name} = {value} is not a positive multiple of {bins} bins")
            object.__setattr__(self, name, int(value))

    @property
    def num_x(self) -> int:
        return self.x_bins ** self.dim

    @property
    def num_y(self) -> int:
        return self.y_bins ** self.dim

    @property
    def shape(self) -> Tuple[int, int]:
        return self.cells[0][0].shape

    def cell(self, i: int, j: int) -> DiscreteDistribution:
        return self.cells[i][j]

    def x_centers(self) -> np.ndarray:
        return bin_centers(self.x_bins, self.dim)

    def y_centers(self) -> np.ndarray:
        return bin_centers(self.y_bins, self.dim)

    def is_homogeneous(self) -> bool:
        """True when every x-bin carries the same distributions."""
        if self.num_x == 1:
            return True
        first = self.cells[0]
        for row in self.cells[1:]:
            for a, b in zip(first, row):
                if a.atoms.shape != b.atoms.shape:
                    return False
                if not (np.array_equal(a.atoms, b.atoms) and np.array_equal(a.weights, b.weights)):
                    return False
        return True

    def map_cells(self, fn: Callable[[int, int, DiscreteDistribution], DiscreteDistribution]) -> "TwoScaleYoungMeasure":
        cells = [[fn(i, j, dist) for j, dist in enumerate(row)] for i, row in enumerate(self.cells)]
        return replace(self, cells=cells)

    def to_dict(self) -> Dict[str, Any]:
        record = {
            "dim": self.dim,
            "x_bins": self.x_bins,
            "y_bins": self.y_bins,
            "p": self.p,
            "cells": [
                {"i": i, "j": j, "atoms": dist.to_list()}
                for i, row in enumerate(self.cells)
                for j, dist in enumerate(row)
            ],
        }
        if self.mass is not None:
            record["mass"] = self.mass.tolist()
        for name in ("x_resolution", "y_resolution"):
            if getattr(self, name) is not None:
                record[name] = getattr(self, name)
        return record

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TwoScaleYoungMeasure":
        dim = int(data.get("dim", 1))
        x_bins, y_bins = int(data["x_bins"]), int(data["y_bins"])
        cells: List[List[Optional[DiscreteDistribution]]] = [
            [None] * (y_bins ** dim) for _ in range(x_bins ** dim)
        ]
        for entry in data["cells"]:
            atoms = np.asarray([a["xi"] for a in entry["atoms"]], dtype=np.float64)
            if atoms.ndim == 2:
                atoms = atoms[:, None, :]
            weights = np.asarray([a["w"] for a in entry["atoms"]], dtype=np.float64)
            cells[int(entry["i"])][int(entry["j"])] = DiscreteDistribution(atoms, weights)
        if any(dist is None for row in cells for dist in row):
            raise InvalidArgumentError("serialized measure is missing cells")
        return cls(
            dim,
            x_bins,
            y_bins,
            cells,
            float(data.get("p", 2.0)),
            data.get("mass"),
            data.get("x_resolution"),
            data.get("y_resolution"),
        )


def uniform_measure(
    dim: int,
    x_bins: int,
    y_bins: int,
    build: Callable[[int, int], DiscreteDistribution],
    p: float = 2.0,
) -> TwoScaleYoungMeasure:
    """Measure whose cell (i, j) is ``build(i, j)``."""
    cells = [[build(i, j) for j in range(y_bins ** dim)] for i in range(x_bins ** dim)]
    return TwoScaleYoungMeasure(dim, x_bins, y_bins, cells, p)


def dirac_measure(F, dim: int = 1, x_bins: int = 1, y_bins: int = 1, p: float = 2.0) -> TwoScaleYoungMeasure:
    """delta_F (x) dy on every bin."""
    dist = DiscreteDistribution.dirac(np.reshape(F, (-1, dim)))
    return uniform_measure(dim, x_bins, y_bins, lambda i, j: dist, p)


# Queries

def barycenter(nu: TwoScaleYoungMeasure) -> np.ndarray:
    """Per-bin means, shape ``(I^N, J^N, d, N)``."""
    return np.asarray([[dist.mean() for dist in row] for row in nu.cells])


@dataclass
class Moment:
    """Per-bin values and their bin-quadrature integrals."""

    cells: np.ndarray
    per_x: np.ndarray
    total: float


def moment(nu: TwoScaleYoungMeasure, g: Optional[Integrand] = None) -> Moment:
    """
    Integrate g against the measure.

    Args:
        nu: Measure
        g: Integrand evaluated at bin centers (x_i, y_j); |xi|^p when omitted

    Returns:
        Moment with per-(i, j) expectations, their y-averages per x-bin and
        the full integral over Omega x Q
    """
    values = np.zeros((nu.num_x, nu.num_y))
    xs, ys = nu.x_centers(), nu.y_centers()
    for i, row in enumerate(nu.cells):
        for j, dist in enumerate(row):
            if g is None:
                values[i, j] = dist.moment(nu.p)
                continue
            k = len(dist)
            x = np.broadcast_to(xs[i], (k, nu.dim))
            y = np.broadcast_to(ys[j], (k, nu.dim))
            values[i, j] = dist.expect(g.density(x, y, dist.atoms))
    per_x = values.mean(axis=1)
    return Moment(cells=values, per_x=per_x, total=float(per_x.mean()))


def spread(nu: TwoScaleYoungMeasure) -> np.ndarray:
    """Per-bin standard deviation of the atoms, ``(I^N, J^N)``."""
    return np.asarray([[dist.spread() for dist in row] for row in nu.cells])


def aggregate(nu: TwoScaleYoungMeasure, radius: float = DEFAULT_MERGE_RADIUS) -> DiscreteDistribution:
    """Distribution of gradients over all of Omega x Q."""
    parts = [dist for row in nu.cells for dist in row]
    return combine(parts, [1.0] * len(parts), radius)


def y_marginal(nu: TwoScaleYoungMeasure) -> np.ndarray:
    """Mass per y-bin: recorded Lebesgue mass when present, uniform otherwise."""
    if nu.mass is None:
        return np.full(nu.num_y, 1.0 / nu.num_y)
    totals = nu.mass.sum(axis=0)
    return totals / totals.sum()


def common_resolution(a: Optional[int], b: Optional[int]) -> Optional[int]:
    """Finest grid refining both resolutions; unknown when either is."""
    if a is None or b is None:
        return None
    return math.lcm(a, b)


def _check_same_bins(a: TwoScaleYoungMeasure, b: TwoScaleYoungMeasure) -> None:
    if (a.dim, a.x_bins, a.y_bins) != (b.dim, b.x_bins, b.y_bins) or a.shape != b.shape:
        raise InvalidArgumentError("measures live on different partitions")


def distribution_distance(a: DiscreteDistribution, b: DiscreteDistribution) -> float:
    """
    Mass-transport distance between two discrete distributions.

    Exact for scalar atoms; otherwise mass moves greedily along the
    cheapest remaining pair, which bounds W1 from above.
    """
    if a.shape != b.shape:
        raise InvalidArgumentError("distributions of different shapes")
    if a.shape == (1, 1):
        return float(wasserstein_distance(a.atoms.ravel(), b.atoms.ravel(), a.weights, b.weights))

    cost = cdist(a.atoms.reshape(len(a), -1), b.atoms.reshape(len(b), -1))
    supply, demand = a.weights.copy(), b.weights.copy()
    total = 0.0
    for flat in np.argsort(cost, axis=None, kind="stable"):
        r, c = divmod(int(flat), cost.shape[1])
        moved = min(supply[r], demand[c])
        if moved <= 0:
            continue
        total += moved * cost[r, c]
        supply[r] -= moved
        demand[c] -= moved
    return float(total)


def transport_distance(a: TwoScaleYoungMeasure, b: TwoScaleYoungMeasure) -> float:
    """Bin-averaged transport distance between measures on the same partition."""
    _check_same_bins(a, b)
    dists = [
        distribution_distance(da, db)
        for row_a, row_b in zip(a.cells, b.cells)
        for da, db in zip(row_a, row_b)
    ]
    return float(np.mean(dists))


def mixture(
    a: TwoScaleYoungMeasure, b: TwoScaleYoungMeasure, t: float, radius: float = DEFAULT_MERGE_RADIUS
) -> TwoScaleYoungMeasure:
    """Cellwise convex combination  t a + (1 - t) b."""
    _check_same_bins(a, b)
    if not 0 <= t <= 1:
        raise InvalidArgumentError(f"mixture weight must lie in [0, 1], got {t}")
    mixed = a.map_cells(lambda i, j, dist: combine([dist, b.cells[i][j]], [t, 1.0 - t], radius))
    mass = None if a.mass is None or b.mass is None else t * a.mass + (1.0 - t) * b.mass
    return replace(
        mixed,
        mass=mass,
        x_resolution=common_resolution(a.x_resolution, b.x_resolution),
        y_resolution=common_resolution(a.y_resolution, b.y_resolution),
    )


def piecewise_in_x(a: TwoScaleYoungMeasure, b: TwoScaleYoungMeasure, t: float) -> TwoScaleYoungMeasure:
    """
    ``a`` on the x-bins whose first coordinate lies in (0, t), ``b`` elsewhere.

    t * x_bins must be an integer so that the split falls on bin faces.
    """
    _check_same_bins(a, b)
    split = t * a.x_bins
    if abs(split - round(split)) > 1e-9 or not 0 <= t <= 1:
        raise InvalidArgumentError(f"t * x_bins = {split:g} must be an integer in [0, x_bins]")
    split = int(round(split))
    first_axis = np.unravel_index(np.arange(a.num_x), (a.x_bins,) * a.dim)[0]
    take_a = first_axis < split
    cells = [a.cells[i] if take_a[i] else b.cells[i] for i in range(a.num_x)]
    mass = None
    if a.mass is not None and b.mass is not None:
        mass = np.where(take_a[:, None], a.mass, b.mass)
    return TwoScaleYoungMeasure(
        a.dim,
        a.x_bins,
        a.y_bins,
        cells,
        a.p,
        mass,
        common_resolution(a.x_resolution, b.x_resolution),
        common_resolution(a.y_resolution, b.y_resolution),
    )
