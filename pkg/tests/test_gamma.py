"""
Unit tests for measure energies and the epsilon / cell / measure comparison.
"""

import pytest
import numpy as np
import os
import sys

# Add src to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.analysis import gamma
from src.analysis.gamma import (
    GammaReport,
    default_candidates,
    energy_of_measure,
    fhom_via_measures,
    gamma_compare,
)
from src.config.schema import OptimizerConfig
from src.energies.integrand import double_well, laminate, p_norm
from src.exceptions import EmptyFeasibleSetError, InvalidArgumentError, NumericalFailureError
from src.measures.constructions import analytic_example_single_scale, two_atom_laminate
from src.measures.young import DiscreteDistribution, dirac_measure, uniform_measure
from src.solvers.cell import estimate_fhom


class TestEnergyOfMeasure:
    """Tests for bin quadrature of measure energies."""

    def test_dirac(self):
        """Test |F|^2 for delta_F."""
        assert energy_of_measure(p_norm(2.0), dirac_measure([[1.0, 2.0]], dim=2)) == pytest.approx(5.0)

    def test_double_well_pair(self):
        """Test that atoms at both well bottoms cost nothing."""
        assert energy_of_measure(double_well(), two_atom_laminate(0.0, 1.0)) == pytest.approx(0.0, abs=1e-15)

    def test_single_scale_example(self):
        """Test the integral of cos^2 for the F = 0 example."""
        nu = analytic_example_single_scale(
            lambda x: np.zeros((1, 1)), lambda x, y: np.array([[np.cos(2 * np.pi * y[0])]]), 1, 64
        )
        assert energy_of_measure(p_norm(2.0), nu) == pytest.approx(0.5, abs=1e-3)

    def test_monotone_in_integrand(self):
        """Test that a pointwise larger integrand gives a larger energy."""
        nu = two_atom_laminate(1.0, 0.5, y_bins=4)
        f = laminate((1.0, 4.0))
        assert energy_of_measure(f, nu) <= energy_of_measure(f.scaled(2.0), nu)


class TestFhomViaMeasures:
    """Tests for the minimum over candidate measures."""

    def test_single_dirac(self):
        """Test |F|^2 with delta_F as the only candidate."""
        value, argmin = fhom_via_measures(p_norm(2.0), 2.0, [("dirac", dirac_measure(2.0))])
        assert value == pytest.approx(4.0)
        assert argmin == "dirac"

    def test_double_well_pair_wins(self):
        """Test that the symmetric pair attains f_hom(0) = 0."""
        minimum = fhom_via_measures(double_well(), 0.0, default_candidates(0.0))
        assert minimum.value == 0.0
        assert minimum.argmin == "two_atom_1"
        assert minimum.energies["dirac"] == pytest.approx(1.0)

    def test_cell_minimizer_candidate(self):
        """Test that the measure of the cell minimizer reaches the laminate value."""
        f = laminate((1.0, 4.0))
        estimate = estimate_fhom(f, 1.0, [1], 32)
        minimum = fhom_via_measures(f, 1.0, default_candidates(1.0, estimate))
        assert minimum.argmin == "cell_T1"
        assert minimum.value == pytest.approx(1.6, rel=2e-2)

    def test_argmin_invariant_under_scaling(self):
        """Test that a positive multiple of f keeps the argmin."""
        f = laminate((1.0, 4.0))
        candidates = default_candidates(1.0, y_bins=4)
        assert fhom_via_measures(f, 1.0, candidates).argmin == fhom_via_measures(f.scaled(3.0), 1.0, candidates).argmin

    def test_rejections(self):
        """Test that wrong barycenters and x-dependent candidates are rejected."""
        varying = uniform_measure(1, 2, 1, lambda i, j: DiscreteDistribution.dirac([[float(i)]]))
        candidates = [("shifted", dirac_measure(3.0)), ("varying", varying), ("dirac", dirac_measure(1.0))]
        minimum = fhom_via_measures(p_norm(2.0), 1.0, candidates)
        assert minimum.argmin == "dirac"
        assert set(minimum.rejected) == {"shifted", "varying"}
        assert minimum.rejected["varying"] == "not homogeneous in x"

    def test_all_rejected(self):
        """Test the empty feasible set."""
        with pytest.raises(EmptyFeasibleSetError):
            fhom_via_measures(p_norm(2.0), 1.0, [("shifted", dirac_measure(3.0))])


class TestDefaultCandidates:
    """Tests for the default candidate family."""

    def test_scalar_family(self):
        """Test delta_F and the two-atom splits in 1-D."""
        names = [name for name, _ in default_candidates(1.0)]
        assert names == ["dirac", "two_atom_0.25", "two_atom_0.5", "two_atom_1", "two_atom_1.5"]

    def test_matrix_family(self):
        """Test that only delta_F is offered for 2-D gradients."""
        names = [name for name, _ in default_candidates([[1.0, 0.0]])]
        assert names == ["dirac"]

    def test_skips_unaligned_cell(self):
        """Test that cell minimizers too coarse for the y-bins are skipped."""
        estimate = estimate_fhom(p_norm(2.0), 1.0, [1], 8)
        names = [name for name, _ in default_candidates(1.0, estimate, y_bins=16)]
        assert "cell_T1" not in names
        names = [name for name, _ in default_candidates(1.0, estimate, y_bins=8)]
        assert "cell_T1" in names


class TestGammaReport:
    """Tests for gaps and the trend flag."""

    def test_increasing_gap_flagged(self):
        """Test that growing gaps are flagged."""
        report = GammaReport("f", np.ones((1, 1)), [0.5, 0.25], [1.1, 1.2], 1.0, True, None)
        assert report.gaps == pytest.approx([0.05, 0.1])
        assert report.gap_increasing

    def test_missing_energies_skipped(self):
        """Test that failed solves leave None gaps and do not break the trend."""
        report = GammaReport("f", np.ones((1, 1)), [0.5, 0.25, 0.125], [1.2, None, 1.1], 1.0, True, None)
        assert report.gaps[1] is None
        assert not report.gap_increasing
        assert list(report.to_frame().columns) == ["epsilon", "min_energy", "fhom", "gap"]


class TestGammaCompare:
    """Tests for the full comparison."""

    def test_convex_y_independent(self):
        """Test that |xi|^2 gives identical values on every scale."""
        report = gamma_compare(p_norm(2.0), 1.0, [1 / 4, 1 / 8], 32, T_list=[1], cell_resolution=8, y_bins=8)
        assert max(report.gaps) <= 1e-8
        assert not report.gap_increasing
        assert report.fhom == pytest.approx(1.0)
        assert report.candidates.argmin == "dirac"
        record = report.to_dict()
        assert record["candidates"]["value"] == pytest.approx(1.0)
        assert len(report.to_frame()) == 2

    def test_laminate_bracket(self):
        """Test the laminate gaps on three periods."""
        f = laminate((1.0, 4.0))
        report = gamma_compare(f, 1.0, [1 / 16, 1 / 32, 1 / 64], 1024, T_list=[1, 2], cell_resolution=32)
        assert not report.gap_increasing
        assert abs(report.energies[-1] - 1.6) <= 0.03 * 1.6
        assert report.fhom == pytest.approx(1.6, rel=1e-2)
        assert report.candidates.value == pytest.approx(1.6, rel=2e-2)

    def test_double_well(self):
        """Test the sawtooth bracket for the double well at F = 0."""
        opt = OptimizerConfig(restarts=8)
        report = gamma_compare(double_well(), 0.0, [1 / 16], 256, opt, T_list=[1, 2], cell_resolution=32)
        assert report.energies[0] <= 0.05
        assert report.fhom <= 0.02
        assert abs(report.energies[0] - report.fhom) <= 0.07
        assert any("nonconvex" in note for note in report.notes)

    def test_failure_recorded(self, monkeypatch):
        """Test that a failing epsilon solve leaves a partial report."""
        solve = gamma.minimize_epsilon_functional

        def flaky(f, epsilon, *args, **kwargs):
            if epsilon == 1 / 8:
                raise NumericalFailureError("energy became nan")
            return solve(f, epsilon, *args, **kwargs)

        monkeypatch.setattr(gamma, "minimize_epsilon_functional", flaky)
        report = gamma_compare(p_norm(2.0), 1.0, [1 / 4, 1 / 8], 32, T_list=[1], cell_resolution=8)
        assert report.energies[0] == pytest.approx(1.0)
        assert report.energies[1] is None
        assert report.failures == {0.125: "energy became nan"}
        assert report.to_dict()["failures"] == {"0.125": "energy became nan"}

    def test_empty_epsilon_list(self):
        """Test that at least one period is required."""
        with pytest.raises(InvalidArgumentError, match="epsilon_list"):
            gamma_compare(p_norm(2.0), 1.0, [], 32)

    def test_unsplit_cell_resolution_noted(self):
        """Test that cell minimizers lost to the y-binning are mentioned."""
        report = gamma_compare(p_norm(2.0), 1.0, [1 / 4], 32, T_list=[1], cell_resolution=8, y_bins=16)
        assert "cell_T1" not in report.candidates.energies
        assert any("do not split into 16 y-bins" in note for note in report.notes)

    def test_no_admissible_candidates(self):
        """Test that an empty candidate family leaves the measure side empty."""
        report = gamma_compare(p_norm(2.0), 1.0, [1 / 4], 32, T_list=[1], cell_resolution=8, candidates=[])
        assert report.candidates is None
        assert report.to_dict()["candidates"] is None
