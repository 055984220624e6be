"""
Energy densities f(x, y, xi) with p-growth and their xi-gradients.

Densities are vectorized: they receive ``x`` and ``y`` of shape ``(M, N)``
and ``xi`` of shape ``(M, d, N)`` and return ``(M,)`` values. The cell
variable ``y`` must already lie in [0, 1)^N.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import InvalidArgumentError

Density = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
Gradient = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Growth:
    """
    Growth record  alpha|xi|^p - offset <= f <= beta (1 + |xi|^p).

    Signed members of the test dictionary use alpha = 0 and only the upper
    bound on |f| is meaningful.
    """

    alpha: float
    beta: float
    p: float
    offset: float = 0.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta <= 0:
            raise InvalidArgumentError(f"need alpha >= 0 and beta > 0, got {self.alpha}, {self.beta}")
        if not self.p > 1:
            raise InvalidArgumentError(f"growth exponent must exceed 1, got {self.p}")
        if self.offset < 0:
            raise InvalidArgumentError("coercivity offset must be nonnegative")

    def lower(self, norm: np.ndarray) -> np.ndarray:
        return self.alpha * norm ** self.p - self.offset

    def upper(self, norm: np.ndarray) -> np.ndarray:
        return self.beta * (1.0 + norm ** self.p)


@dataclass(frozen=True)
class Integrand:
    """
    Energy density with growth constants.

    Attributes:
        name: Catalog name
        density: Vectorized evaluator (x, y, xi) -> values
        growth: Growth constants
        gradient: Optional vectorized xi-gradient evaluator
        x_independent: Density ignores x
        y_independent: Density ignores y
        convex: Density is convex in xi (advisory, selects single-start solves)
        nonnegative: Density is nonnegative
        alignment: Number of equal y-phases per axis whose jumps the grid must resolve
    """

    name: str
    density: Density = field(repr=False)
    growth: Growth
    gradient: Optional[Gradient] = field(default=None, repr=False)
    x_independent: bool = True
    y_independent: bool = False
    convex: bool = False
    nonnegative: bool = True
    alignment: int = 1

    def scaled(self, factor: float) -> "Integrand":
        """Return factor * f (factor > 0)."""
        if factor <= 0:
            raise InvalidArgumentError("scale factor must be positive")
        density, gradient = self.density, self.gradient
        return replace(
            self,
            name=f"{factor:g}*{self.name}",
            density=lambda x, y, xi: factor * density(x, y, xi),
            gradient=None if gradient is None else (lambda x, y, xi: factor * gradient(x, y, xi)),
            growth=Growth(factor * self.growth.alpha, factor * self.growth.beta,
                          self.growth.p, factor * self.growth.offset),
        )


def xi_norm(xi: np.ndarray) -> np.ndarray:
    """Frobenius norm over the trailing (d, N) axes."""
    return np.sqrt(np.sum(xi * xi, axis=(-2, -1)))


def _batch(x, y, xi) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coerce a single evaluation point to batch shapes."""
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    dim = y.shape[-1]
    x = np.broadcast_to(np.atleast_1d(np.asarray(x, dtype=np.float64)), (dim,))
    xi = np.asarray(xi, dtype=np.float64)
    if xi.ndim == 0:
        xi = xi.reshape(1, 1)
    elif xi.ndim == 1:
        xi = xi.reshape(1, dim)
    return x[None, :], y[None, :], xi[None, :, :]


def _check_cell(y: np.ndarray) -> None:
    if np.any(y < 0.0) or np.any(y >= 1.0):
        raise InvalidArgumentError("y must lie in [0, 1)^N; wrap it with cell_coordinates")


def evaluate(f: Integrand, x, y, xi) -> float:
    """
    Evaluate f at one point.

    Args:
        f: Integrand
        x: Macroscopic point (scalar or length-N)
        y: Cell point in [0, 1)^N
        xi: Scalar, length-N row, or d x N matrix

    Returns:
        f(x, y, xi)
    """
    xb, yb, xib = _batch(x, y, xi)
    _check_cell(yb)
    return float(f.density(xb, yb, xib)[0])


def evaluate_batch(f: Integrand, x: np.ndarray, y: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Vectorized :func:`evaluate` on ``(M, N)``, ``(M, N)``, ``(M, d, N)`` inputs."""
    _check_cell(y)
    return f.density(x, y, xi)


def finite_difference_gradient(f: Integrand, x: np.ndarray, y: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Central differences in xi with step 1e-6 (1 + |xi|)."""
    step = 1e-6 * (1.0 + xi_norm(xi))
    grad = np.zeros_like(xi)
    for k in range(xi.shape[1]):
        for a in range(xi.shape[2]):
            bump = np.zeros_like(xi)
            bump[:, k, a] = step
            grad[:, k, a] = (f.density(x, y, xi + bump) - f.density(x, y, xi - bump)) / (2 * step)
    return grad


def gradient_xi_batch(f: Integrand, x: np.ndarray, y: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Vectorized xi-gradient, ``(M, d, N)``."""
    if f.gradient is not None:
        return f.gradient(x, y, xi)
    return finite_difference_gradient(f, x, y, xi)


def gradient_xi(f: Integrand, x, y, xi) -> np.ndarray:
    """
    xi-gradient of f at one point.

    Uses the analytic gradient when the integrand provides one, central
    differences otherwise.

    Returns:
        d x N matrix
    """
    xb, yb, xib = _batch(x, y, xi)
    _check_cell(yb)
    return gradient_xi_batch(f, xb, yb, xib)[0]


def ep_norm_estimate(
    f: Integrand,
    radius: float,
    samples: int = 2000,
    shape: Tuple[int, int] = (1, 1),
    seed: int = 0,
) -> float:
    """
    Lower estimate of the E_p norm  sup |f(y, xi)| / (1 + |xi|^p).

    Combines uniform random samples of (y, xi) with |xi| <= radius and a
    deterministic radial sweep along each coordinate direction.

    Args:
        f: Integrand (x is fixed at the origin)
        radius: Sampling radius R > 0
        samples: Random sample count
        shape: (d, N) of xi
        seed: Random seed

    Returns:
        Largest sampled ratio
    """
    if radius <= 0:
        raise InvalidArgumentError("sampling radius must be positive")
    d, dim = shape
    rng = np.random.default_rng(seed)

    directions = rng.normal(size=(samples, d, dim))
    directions /= np.maximum(xi_norm(directions), 1e-300)[:, None, None]
    radii = radius * rng.uniform(size=samples) ** (1.0 / (d * dim))
    xi = directions * radii[:, None, None]

    # radial sweep along +/- unit matrices, including xi = 0 and |xi| = R
    ts = np.linspace(0.0, radius, max(samples // 4, 2))
    sweep = []
    for k in range(d):
        for a in range(dim):
            for sign in (1.0, -1.0):
                unit = np.zeros((d, dim))
                unit[k, a] = sign
                sweep.append(ts[:, None, None] * unit)
    xi = np.concatenate([xi] + sweep)

    y = rng.uniform(size=(xi.shape[0], dim))
    x = np.zeros_like(y)
    ratio = np.abs(f.density(x, y, xi)) / (1.0 + xi_norm(xi) ** f.growth.p)
    return float(np.max(ratio))


# Built-in integrands

def p_norm(p: float = 2.0) -> Integrand:
    """f(xi) = |xi|^p."""

    def density(x, y, xi):
        return xi_norm(xi) ** p

    def gradient(x, y, xi):
        norm = xi_norm(xi)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(norm > 0, p * norm ** (p - 2), 0.0)
        return factor[:, None, None] * xi

    return Integrand(
        name="p_norm",
        density=density,
        gradient=gradient,
        growth=Growth(alpha=1.0, beta=1.0, p=p),
        y_independent=True,
        convex=True,
    )


def double_well() -> Integrand:
    """f(xi) = (|xi|^2 - 1)^2 with wells on the unit sphere."""

    def density(x, y, xi):
        return (np.sum(xi * xi, axis=(-2, -1)) - 1.0) ** 2

    def gradient(x, y, xi):
        s = np.sum(xi * xi, axis=(-2, -1)) - 1.0
        return (4.0 * s)[:, None, None] * xi

    # (t^2 - 1)^2 - t^4/2 + 1 = (t^2 - 2)^2 / 2 >= 0
    return Integrand(
        name="double_well",
        density=density,
        gradient=gradient,
        growth=Growth(alpha=0.5, beta=1.0, p=4.0, offset=1.0),
        y_independent=True,
        convex=False,
    )


def linear_probe(phi: Sequence, p: float = 2.0) -> Integrand:
    """Signed test function f(xi) = xi : Phi."""
    phi = np.atleast_2d(np.asarray(phi, dtype=np.float64))
    scale = float(np.sqrt(np.sum(phi * phi)))

    def density(x, y, xi):
        return np.einsum("mkn,kn->m", xi, phi)

    def gradient(x, y, xi):
        return np.broadcast_to(phi, xi.shape).copy()

    return Integrand(
        name="linear_probe[" + ",".join(f"{v:g}" for v in phi.ravel()) + "]",
        density=density,
        gradient=gradient,
        growth=Growth(alpha=0.0, beta=max(scale, 1e-12), p=p),
        y_independent=True,
        convex=True,
        nonnegative=False,
    )


def laminate_weight(a: Sequence[float], axis: int = 0) -> Callable[[np.ndarray], np.ndarray]:
    """Piecewise-constant a(y) with equal-width phases along one axis."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise InvalidArgumentError("laminate coefficients must be a non-empty list")
    if np.any(a <= 0):
        raise InvalidArgumentError("laminate coefficients must be positive")

    def weight(y: np.ndarray) -> np.ndarray:
        phase = np.minimum((y[:, axis] * a.size).astype(int), a.size - 1)
        return a[phase]

    return weight


def weighted(inner: Integrand, a: Sequence[float], axis: int = 0, name: Optional[str] = None) -> Integrand:
    """
    Product a(y) w(xi) of a laminate weight and an xi-only integrand.

    Args:
        inner: y-independent integrand w
        a: Phase coefficients, equal widths along ``axis``
        axis: Lamination axis
        name: Optional catalog name

    Returns:
        Weighted integrand
    """
    if not inner.y_independent:
        raise InvalidArgumentError("weighted() needs a y-independent inner integrand")
    weight = laminate_weight(a, axis)
    a_min, a_max = float(np.min(a)), float(np.max(a))
    inner_density, inner_gradient = inner.density, inner.gradient

    def density(x, y, xi):
        return weight(y) * inner_density(x, y, xi)

    gradient = None
    if inner_gradient is not None:
        def gradient(x, y, xi):
            return weight(y)[:, None, None] * inner_gradient(x, y, xi)

    g = inner.growth
    return Integrand(
        name=name or f"weighted[{inner.name};" + ",".join(f"{v:g}" for v in a) + "]",
        density=density,
        gradient=gradient,
        growth=Growth(a_min * g.alpha, a_max * g.beta, g.p, a_max * g.offset),
        x_independent=inner.x_independent,
        y_independent=False,
        convex=inner.convex,
        nonnegative=inner.nonnegative,
        alignment=len(a),
    )


def laminate(a: Sequence[float], p: float = 2.0, axis: int = 0) -> Integrand:
    """Layered material a(y)|xi|^p."""
    return weighted(p_norm(p), a, axis, name="laminate[" + ",".join(f"{v:g}" for v in a) + "]")


def modulated_laminate(a: Sequence[float], axis: int = 0) -> Integrand:
    """x-dependent laminate a(y)(1 + x_1/2)|xi|^2 on Omega = (0,1)^N."""
    base = laminate(a, 2.0, axis)
    base_density, base_gradient = base.density, base.gradient

    def density(x, y, xi):
        return (1.0 + 0.5 * x[:, 0]) * base_density(x, y, xi)

    def gradient(x, y, xi):
        return (1.0 + 0.5 * x[:, 0])[:, None, None] * base_gradient(x, y, xi)

    g = base.growth
    return replace(
        base,
        name="modulated_" + base.name,
        density=density,
        gradient=gradient,
        growth=Growth(g.alpha, 1.5 * g.beta, g.p),
        x_independent=False,
    )


def from_callable(
    name: str,
    density: Density,
    growth: Growth,
    gradient: Optional[Gradient] = None,
    **flags,
) -> Integrand:
    """User-defined integrand from vectorized closures."""
    return Integrand(name=name, density=density, growth=growth, gradient=gradient, **flags)
