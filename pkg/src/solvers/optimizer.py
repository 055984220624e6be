"""
First-order descent with Armijo backtracking.

Search directions come from a bounded-memory quasi-Newton two-loop
recursion; with ``memory=0`` the method is plain steepest descent. Every
accepted step satisfies the sufficient-decrease condition, so the recorded
energies never increase.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, List, Tuple

import numpy as np

from ..config.schema import OptimizerConfig
from ..exceptions import NumericalFailureError

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]

MAX_BACKTRACKS = 60


@dataclass
class OptimizationResult:
    """Outcome of one descent run."""

    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    message: str
    history: List[float] = field(default_factory=list)


def _two_loop(g: np.ndarray, pairs_s: Deque[np.ndarray], pairs_y: Deque[np.ndarray]) -> np.ndarray:
    """Apply the inverse-Hessian approximation to g (returns a descent direction)."""
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(pairs_s), reversed(pairs_y)):
        rho = 1.0 / np.dot(y, s)
        a = rho * np.dot(s, q)
        q -= a * y
        alphas.append((rho, a))
    if pairs_s:
        s, y = pairs_s[-1], pairs_y[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y), (rho, a) in zip(zip(pairs_s, pairs_y), reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def armijo_search(
    objective: Objective,
    x: np.ndarray,
    f: float,
    direction: np.ndarray,
    slope: float,
    step: float,
    shrink: float,
    c1: float,
):
    """
    Backtrack until f(x + t d) <= f(x) + c1 t <g, d>.

    Returns:
        (step, x_new, f_new, g_new), or None when no step is accepted
    """
    for _ in range(MAX_BACKTRACKS):
        x_new = x + step * direction
        f_new, g_new = objective(x_new)
        if np.isfinite(f_new) and f_new <= f + c1 * step * slope:
            return step, x_new, f_new, g_new
        step *= shrink
    return None


def minimize(
    objective: Objective,
    x0: np.ndarray,
    config: OptimizerConfig,
    gradient_scale: float = 1.0,
) -> OptimizationResult:
    """
    Minimize a smooth objective from a starting point.

    Args:
        objective: Callable returning (value, gradient) for a flat vector
        x0: Starting point
        config: Descent settings
        gradient_scale: Factor applied to the gradient max-norm before the
            tolerance test (makes the test resolution independent)

    Returns:
        OptimizationResult with the final iterate and energy history
    """
    x = np.array(x0, dtype=np.float64).ravel()
    f, g = objective(x)
    if not np.isfinite(f):
        raise NumericalFailureError("energy is not finite at the starting point")

    history = [f]
    pairs_s: Deque[np.ndarray] = deque(maxlen=config.memory or 1)
    pairs_y: Deque[np.ndarray] = deque(maxlen=config.memory or 1)
    converged = False
    message = "iteration budget exhausted"
    iteration = 0

    while iteration < config.max_iterations:
        if np.max(np.abs(g), initial=0.0) * gradient_scale <= config.tolerance:
            converged, message = True, "gradient tolerance reached"
            break

        use_memory = config.memory > 0 and len(pairs_s) > 0
        direction = _two_loop(g, pairs_s, pairs_y) if use_memory else -g
        slope = float(np.dot(g, direction))
        if not slope < 0:
            pairs_s.clear()
            pairs_y.clear()
            use_memory = False
            direction = -g
            slope = -float(np.dot(g, g))

        step = 1.0 if use_memory else min(1.0, 1.0 / max(np.linalg.norm(g), 1e-300))
        accepted = armijo_search(
            objective, x, f, direction, slope, step, config.shrink, config.sufficient_decrease
        )
        if accepted is None:
            if use_memory:
                # retry once along the steepest descent direction
                pairs_s.clear()
                pairs_y.clear()
                continue
            message = "line search failed"
            break

        iteration += 1
        _, x_new, f_new, g_new = accepted
        s, y = x_new - x, g_new - g
        if config.memory > 0 and np.dot(s, y) > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs_s.append(s)
            pairs_y.append(y)
        x, f, g = x_new, f_new, g_new
        if config.record_history:
            history.append(f)
        else:
            history = [history[0], f]

        window = config.stall_window
        if config.record_history and len(history) > window:
            if history[-window - 1] - f <= config.stall_tolerance * max(1.0, abs(f)):
                converged, message = True, "energy stalled"
                break

    return OptimizationResult(
        x=x, value=float(f), iterations=iteration, converged=converged, message=message, history=history
    )
