"""
Desk-scale comparison of min F_eps, the cell formula, and energies of candidate measures.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from ..config.schema import OptimizerConfig
from ..energies.integrand import Integrand
from ..exceptions import EmptyFeasibleSetError, InvalidArgumentError, NumericalFailureError
from ..measures.constructions import periodic_cell_measure, two_atom_laminate
from ..measures.young import TwoScaleYoungMeasure, barycenter, dirac_measure, moment
from ..solvers.cell import FhomEstimate, as_gradient_matrix, estimate_fhom
from ..solvers.epsilon import EpsilonResult, minimize_epsilon_functional
from ..utils.parallel import parallel_map

logger = structlog.get_logger(__name__)

TWO_ATOM_SPLITS = (0.25, 0.5, 1.0, 1.5)
TREND_TOL = 1e-6
BARYCENTER_TOL = 1e-8

Candidate = Tuple[str, TwoScaleYoungMeasure]


def energy_of_measure(f: Integrand, nu: TwoScaleYoungMeasure) -> float:
    """int_Omega int_Q int f(x, y, xi) dnu dy dx by bin quadrature."""
    return moment(nu, f).total


@dataclass
class CandidateMinimum:
    """Minimum of the measure energy over the admitted candidates."""

    value: float
    argmin: str
    energies: Dict[str, float]
    rejected: Dict[str, str] = field(default_factory=dict)

    def __iter__(self):
        # unpacks as (value, argmin)
        return iter((self.value, self.argmin))


def fhom_via_measures(f: Integrand, F, candidates: Sequence[Candidate]) -> CandidateMinimum:
    """
    Minimize the measure energy over x-homogeneous candidates with barycenter F.

    Args:
        f: Integrand
        F: d x N matrix
        candidates: (id, measure) pairs

    Returns:
        CandidateMinimum (first candidate wins ties)

    Raises:
        EmptyFeasibleSetError: when every candidate is rejected
    """
    F = as_gradient_matrix(F)
    energies: Dict[str, float] = {}
    rejected: Dict[str, str] = {}
    for name, nu in candidates:
        if not nu.is_homogeneous():
            rejected[name] = "not homogeneous in x"
            continue
        if nu.shape != F.shape:
            rejected[name] = f"atoms of shape {nu.shape}, expected {F.shape}"
            continue
        mean = barycenter(nu).mean(axis=(0, 1))
        gap = float(np.max(np.abs(mean - F)))
        if gap > BARYCENTER_TOL * (1.0 + float(np.max(np.abs(F)))):
            rejected[name] = f"barycenter differs from F by {gap:.3g}"
            continue
        energies[name] = energy_of_measure(f, nu)

    if not energies:
        raise EmptyFeasibleSetError(f"all {len(rejected)} candidates were rejected: {rejected}")
    argmin = min(energies, key=lambda name: energies[name])
    logger.info("fhom_via_measures", integrand=f.name, value=energies[argmin], argmin=argmin, rejected=len(rejected))
    return CandidateMinimum(energies[argmin], argmin, energies, rejected)


def default_candidates(F, estimate: Optional[FhomEstimate] = None, y_bins: int = 16) -> List[Candidate]:
    """
    delta_F, the periodic measures of the computed cell minimizers and,
    for scalar 1-D F, symmetric two-atom laminates.
    """
    F = as_gradient_matrix(F)
    d, dim = F.shape
    candidates: List[Candidate] = [("dirac", dirac_measure(F, dim, 1, y_bins))]
    if estimate is not None:
        for result in estimate.results:
            if result.resolution % y_bins:
                logger.warning("cell_candidate_skipped", T=result.T, resolution=result.resolution, y_bins=y_bins)
                continue
            candidates.append((f"cell_T{result.T}", periodic_cell_measure(F, result.minimizer, y_bins)))
    if F.shape == (1, 1):
        candidates += [(f"two_atom_{s:g}", two_atom_laminate(F, s, y_bins)) for s in TWO_ATOM_SPLITS]
    return candidates


@dataclass
class GammaReport:
    """Bracket of min F_eps, f_hom and the candidate minimum for one F."""

    integrand: str
    F: np.ndarray
    epsilons: List[float]
    energies: List[Optional[float]]
    fhom: float
    fhom_converged: bool
    candidates: Optional[CandidateMinimum]
    failures: Dict[float, str] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def gaps(self) -> List[Optional[float]]:
        return [None if e is None else abs(e - self.fhom) / (1.0 + abs(self.fhom)) for e in self.energies]

    @property
    def gap_increasing(self) -> bool:
        """True when some gap grows by more than the trend tolerance as eps shrinks."""
        known = [g for g in self.gaps if g is not None]
        return any(b > a + TREND_TOL for a, b in zip(known, known[1:]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "epsilon": self.epsilons,
                "min_energy": self.energies,
                "fhom": [self.fhom] * len(self.epsilons),
                "gap": self.gaps,
            }
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "integrand": self.integrand,
            "F": self.F.tolist(),
            "epsilons": self.epsilons,
            "energies": self.energies,
            "fhom": self.fhom,
            "fhom_converged": self.fhom_converged,
            "gaps": self.gaps,
            "gap_increasing": self.gap_increasing,
            "candidates": None
            if self.candidates is None
            else {
                "value": self.candidates.value,
                "argmin": self.candidates.argmin,
                "energies": self.candidates.energies,
                "rejected": self.candidates.rejected,
            },
            "failures": {str(k): v for k, v in self.failures.items()},
            "notes": self.notes,
        }


def gamma_compare(
    f: Integrand,
    F,
    epsilons: Sequence[float],
    resolution: int,
    opt: Optional[OptimizerConfig] = None,
    T_list: Sequence[int] = (1, 2, 4),
    cell_resolution: int = 64,
    plateau_tol: float = 1e-3,
    candidates: Optional[Sequence[Candidate]] = None,
    y_bins: int = 16,
    threads: int = 1,
    progress: bool = False,
) -> GammaReport:
    """
    Compare min F_eps over a list of periods with the cell formula at F.

    Args:
        f: Integrand
        F: d x N matrix of the affine target u(x) = F x on (0,1)^N
        epsilons: Periods, coarse to fine
        resolution: Grid cells per axis for the eps problems
        opt: Descent settings
        T_list: Cell sizes for f_hom
        cell_resolution: Grid cells per unit cell for f_hom
        plateau_tol: Plateau criterion for f_hom
        candidates: Measures for the measure-side minimum; default family when omitted
        y_bins: y-bins of the default candidates
        threads: Workers for the per-eps solves
        progress: Show progress bars

    Returns:
        GammaReport; eps solves that fail numerically are recorded, not raised
    """
    if not epsilons:
        raise InvalidArgumentError("epsilon_list must be non-empty")
    opt = opt or OptimizerConfig()
    F = as_gradient_matrix(F)

    def solve(epsilon: float) -> Tuple[Optional[EpsilonResult], Optional[str]]:
        try:
            return minimize_epsilon_functional(f, epsilon, F, resolution, opt), None
        except NumericalFailureError as e:
            logger.error("epsilon_solve_failed", epsilon=epsilon, error=str(e))
            return None, str(e)

    outcomes = parallel_map(solve, list(epsilons), threads, desc="epsilon", progress=progress)
    energies = [None if r is None else r.energy for r, _ in outcomes]
    failures = {float(e): msg for e, (_, msg) in zip(epsilons, outcomes) if msg is not None}

    estimate = estimate_fhom(f, F, T_list, cell_resolution, opt, rel_tol=plateau_tol, progress=progress)
    if candidates is None:
        candidates = default_candidates(F, estimate, y_bins)
    try:
        minimum = fhom_via_measures(f, F, candidates)
    except EmptyFeasibleSetError as e:
        logger.warning("no_admissible_candidates", error=str(e))
        minimum = None

    notes = ["min F_eps pins u = F x on the boundary; the boundary layer perturbs it by O(eps)"]
    if not f.convex:
        notes.append("nonconvex integrand: every computed minimum is an upper bound")
    if cell_resolution % y_bins:
        notes.append(f"cell minimizers at {cell_resolution} cells per unit do not split into {y_bins} y-bins")
    if minimum is not None and minimum.value > estimate.value * (1.0 + 1e-2) + 1e-2:
        notes.append("no candidate attains the cell value within tolerance")

    report = GammaReport(
        integrand=f.name,
        F=F,
        epsilons=[float(e) for e in epsilons],
        energies=energies,
        fhom=estimate.value,
        fhom_converged=estimate.converged,
        candidates=minimum,
        failures=failures,
        notes=notes,
    )
    logger.info("gamma_compared", integrand=f.name, fhom=report.fhom, gaps=report.gaps, increasing=report.gap_increasing)
    return report
