"""
Unit tests for the characterization checks and the f_hom provider.
"""

import pytest
import numpy as np
import pandas as pd
import os
import sys
from dataclasses import replace

# Add src to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.analysis.checker import (
    SlackTable,
    block_average,
    check_condition_i,
    check_condition_ii,
    check_condition_iii,
    oversized_atoms,
    project_onto_gradients,
    verify_characterization,
)
from src.analysis.fhom_provider import FhomProvider, lattice_axes
from src.config.schema import CheckerConfig, OptimizerConfig
from src.energies.dictionary import TestDictionary
from src.energies.integrand import laminate, linear_probe, p_norm
from src.exceptions import InvalidArgumentError
from src.fields.grid import GridSpec, VectorField, affine_field, apply_gradient
from src.measures.constructions import analytic_example_single_scale, periodic_cell_measure, two_atom_laminate
from src.measures.estimate import estimate_from_sequence
from src.measures.young import DiscreteDistribution, dirac_measure, uniform_measure
from src.solvers.cell import solve_cell_problem, tile_field
from src.solvers.epsilon import minimize_epsilon_functional

FAST = CheckerConfig(T_list=[1], resolution=16, optimizer=OptimizerConfig(restarts=2, max_iterations=2000))


def _example(F=1.0, amplitude=1.0, x_bins=4, y_bins=16):
    """Single-scale example: u = F x, u_1 = A sin(2 pi y) / (2 pi)."""
    return analytic_example_single_scale(
        lambda x: np.full((1, 1), F),
        lambda x, y: np.array([[amplitude * np.cos(2 * np.pi * y[0])]]),
        x_bins,
        y_bins,
    )


def _laminate_cell_measure(F=((1.0, 0.5),), resolution=16, y_bins=8):
    """2-D measure of a laminate cell minimizer on (0, 1)^2."""
    cell = solve_cell_problem(laminate((1.0, 4.0)), F, 1, resolution)
    return periodic_cell_measure(F, cell.minimizer, y_bins)


def _periodic_sequence_member(F=((1.0, 0.5),), periods=4, resolution=16):
    """u = F x + eps phi(x / eps) on (0, 1)^2 for a laminate cell minimizer phi."""
    cell = solve_cell_problem(laminate((1.0, 4.0)), F, 1, resolution)
    tiled = tile_field(cell.minimizer, periods)
    grid = GridSpec.box(2, periods * resolution)
    return VectorField(grid, affine_field(grid, F).values + tiled.values / periods)


def _vortex(y_bins=8):
    """2-D measure delta of (sin(2 pi y_2), 0): not a periodic gradient."""
    centers = (np.arange(y_bins) + 0.5) / y_bins
    y2 = np.meshgrid(centers, centers, indexing="ij")[1].ravel()
    return uniform_measure(2, 1, y_bins, lambda i, j: DiscreteDistribution.dirac([[np.sin(2 * np.pi * y2[j]), 0.0]]))


class TestProjection:
    """Tests for the periodic-gradient projection."""

    def test_gradient_is_reproduced(self):
        """Test that a discrete gradient projects onto itself."""
        grid = GridSpec.box(2, 8, periodic=True)
        rng = np.random.default_rng(0)
        g = apply_gradient(grid, rng.normal(size=(grid.num_nodes, 1)))
        projected, _ = project_onto_gradients(grid, g)
        np.testing.assert_allclose(projected, g, atol=1e-8)

    def test_zero_field(self):
        """Test that zero stays zero without a solve."""
        grid = GridSpec.box(1, 8, periodic=True)
        projected, nodes = project_onto_gradients(grid, np.zeros((8, 1, 1)))
        np.testing.assert_array_equal(projected, 0.0)
        np.testing.assert_array_equal(nodes, 0.0)

    def test_block_averaged_gradients_are_reproduced(self):
        """Test that bin averages of fine gradients project onto themselves."""
        grid = GridSpec.box(2, 16, periodic=True)
        rng = np.random.default_rng(3)
        fine = apply_gradient(grid, rng.normal(size=(grid.num_nodes, 1)))
        average = block_average(grid, 4)
        g = np.stack([average @ fine[:, :, a] for a in range(2)], axis=-1)
        projected, _ = project_onto_gradients(grid, g, bins=4)
        np.testing.assert_allclose(projected, g, atol=1e-8)
        coarse, _ = project_onto_gradients(GridSpec.box(2, 4, periodic=True), g)
        assert np.max(np.abs(coarse - g)) > 1e-6

    def test_block_average_rows(self):
        """Test that each bin averages its own cells."""
        average = block_average(GridSpec.box(1, 8), 2).toarray()
        np.testing.assert_allclose(average, [[0.25] * 4 + [0.0] * 4, [0.0] * 4 + [0.25] * 4])
        with pytest.raises(InvalidArgumentError):
            block_average(GridSpec.box(1, 8), 3)


class TestConditionI:
    """Tests for the corrector decomposition."""

    def test_example_measure(self):
        """Test that the single-scale example splits exactly."""
        decomposition = check_condition_i(_example(F=1.5))
        assert decomposition.residual <= 1e-8
        np.testing.assert_allclose(decomposition.grad_u, 1.5, atol=1e-12)
        field = decomposition.corrector_field(0)
        np.testing.assert_allclose(field.values.mean(), 0.0, atol=1e-10)

    def test_dirac_has_zero_corrector(self):
        """Test delta_F: no corrector and no residual."""
        decomposition = check_condition_i(dirac_measure([[1.0, 2.0]], dim=2, x_bins=2, y_bins=4))
        np.testing.assert_array_equal(decomposition.corrector, 0.0)
        assert decomposition.residual == 0.0
        assert decomposition.x_residual == pytest.approx(0.0, abs=1e-12)

    def test_vortex_detected(self):
        """Test that a curl-carrying field leaves its full norm as residual."""
        decomposition = check_condition_i(_vortex())
        assert decomposition.residual > 0.1
        assert decomposition.residual == pytest.approx(np.sqrt(0.5), abs=1e-6)

    def test_invariant_under_constant_shift(self):
        """Test that adding a constant matrix only moves grad u."""
        nu = _example(F=0.0)
        shifted = nu.map_cells(lambda i, j, d: DiscreteDistribution(d.atoms + 3.0, d.weights))
        a, b = check_condition_i(nu), check_condition_i(shifted)
        assert b.residual == pytest.approx(a.residual, abs=1e-12)
        np.testing.assert_allclose(b.grad_u - a.grad_u, 3.0, atol=1e-12)

    def test_x_residual_for_non_gradient_macro_field(self):
        """Test that an incompatible 2-D grad u field is reported."""
        x_bins = 4
        centers = (np.arange(x_bins) + 0.5) / x_bins
        x2 = np.meshgrid(centers, centers, indexing="ij")[1].ravel()
        nu = uniform_measure(2, x_bins, 2, lambda i, j: DiscreteDistribution.dirac([[np.sin(2 * np.pi * x2[i]), 0.0]]))
        decomposition = check_condition_i(nu)
        assert decomposition.residual == pytest.approx(0.0, abs=1e-12)
        assert decomposition.x_residual > 0.1
        assert decomposition.deformation.shape == ((x_bins + 1) ** 2, 1)

    def test_two_dimensional_cell_measure(self):
        """Test that a 2-D cell minimizer measure splits up to solver precision."""
        nu = _laminate_cell_measure()
        assert nu.y_resolution == 16
        decomposition = check_condition_i(nu)
        assert decomposition.residual <= 1e-6
        np.testing.assert_allclose(decomposition.grad_u, [[[1.0, 0.5]]], atol=1e-10)
        coarse = check_condition_i(replace(nu, y_resolution=None))
        assert coarse.residual > 1e-3

    def test_two_dimensional_periodic_sequence(self):
        """Test the empirical measure of F x + eps phi(x / eps) in 2-D."""
        nu = estimate_from_sequence([(0.25, _periodic_sequence_member())], 2, 4)
        assert (nu.x_resolution, nu.y_resolution) == (64, 16)
        decomposition = check_condition_i(nu)
        assert decomposition.residual <= 1e-6
        assert decomposition.x_residual <= 1e-6

    def test_two_dimensional_minimizer(self):
        """Test the empirical measure of a 2-D laminate minimizer."""
        result = minimize_epsilon_functional(laminate((1.0, 4.0)), 1 / 8, [[1.0, 0.5]], 64)
        nu = estimate_from_sequence([(1 / 8, result.minimizer)], 2, 4)
        decomposition = check_condition_i(nu)
        assert decomposition.x_residual <= 1e-6
        assert decomposition.residual <= CheckerConfig().sequence_residual_tol * decomposition.barycenter_norm


class TestFhomProvider:
    """Tests for lattice f_hom values."""

    def test_lattice_axes(self):
        """Test exact values for few distinct entries, linspace otherwise."""
        points = np.array([[[0.0]], [[1.0]], [[1.0]]])
        (axis,) = lattice_axes(points, 3)
        np.testing.assert_array_equal(axis, [0.0, 1.0])
        (axis,) = lattice_axes(np.linspace(0.0, 2.0, 10).reshape(10, 1, 1), 3)
        np.testing.assert_allclose(axis, [0.0, 1.0, 2.0])

    def test_interpolation(self):
        """Test multilinear interpolation between lattice values."""
        provider = FhomProvider(FAST)
        f = p_norm(2.0)
        provider.prepare(f, list(np.linspace(0.0, 2.0, 10).reshape(10, 1, 1)))
        assert provider(f, np.array([[1.0]])) == pytest.approx(1.0, abs=1e-8)
        assert provider(f, np.array([[0.5]])) == pytest.approx(0.5, abs=1e-8)
        assert provider(f, np.array([[3.0]])) is None

    def test_singleton_lattice(self):
        """Test that a single matrix is matched exactly."""
        provider = FhomProvider(FAST)
        f = laminate((1.0, 4.0))
        assert provider(f, np.array([[1.0]])) == pytest.approx(1.6, rel=1e-3)
        assert provider(f, np.array([[1.1]])) is None

    def test_cache(self):
        """Test that repeated solves reuse cached values."""
        provider = FhomProvider(FAST)
        f = p_norm(2.0)
        first = provider.solve(f, np.array([[2.0]]))
        assert provider.solve(f, np.array([[2.0]])) == first
        assert len(provider._values) == 1


class TestConditionII:
    """Tests for the lower-bound slacks."""

    def test_linear_probe_equality(self):
        """Test that linear probes have zero slack on a genuine measure."""
        nu = _example(F=0.75)
        dictionary = TestDictionary((linear_probe([[1.0]]), linear_probe([[-0.5]])))
        table = check_condition_ii(nu, dictionary, FhomProvider(FAST))
        assert np.all(table.frame["tested"])
        assert np.all(np.abs(table.frame["slack"]) <= 1e-10)
        assert len(table.frame) == 2 * nu.num_x

    def test_linear_probe_equality_on_sequence(self):
        """Test zero linear-probe slack on the measure of a minimizing sequence."""
        result = minimize_epsilon_functional(laminate((1.0, 4.0)), 1 / 16, 1.0, 128)
        nu = estimate_from_sequence([(1 / 16, result.minimizer)], 4, 8)
        dictionary = TestDictionary((linear_probe([[1.0]]), linear_probe([[-0.5]])))
        table = check_condition_ii(nu, dictionary, FhomProvider(FAST))
        assert np.all(table.frame["tested"])
        assert np.all(np.abs(table.frame["slack"]) <= 1e-10)

    def test_dirac_p_norm(self):
        """Test slack |F|^2 - |F|^2 = 0 for delta_F."""
        nu = dirac_measure(2.0, x_bins=2, y_bins=4)
        table = check_condition_ii(nu, TestDictionary((p_norm(2.0),)), FhomProvider(FAST))
        np.testing.assert_allclose(table.frame["slack"], 0.0, atol=1e-8)
        assert table.passed(1e-2)

    def test_laminate_minimizing_sequence(self):
        """Test the laminate slack on the measure of its own minimizers."""
        f = laminate((1.0, 4.0))
        result = minimize_epsilon_functional(f, 1 / 32, 1.0, 512)
        nu = estimate_from_sequence([(1 / 32, result.minimizer)], 2, 16)
        table = check_condition_ii(nu, TestDictionary((f,)), FhomProvider(FAST))
        assert np.all(np.abs(table.frame["slack"]) <= 0.03)
        assert table.worst()[f.name] == pytest.approx(0.0, abs=0.03)

    def test_negative_slack_fails(self):
        """Test the verdict on a slack below the relative tolerance."""
        frame = pd.DataFrame(
            [
                {"member": "p_norm", "x_bin": 0, "lhs": 0.9, "fhom": 1.0, "slack": -0.1, "tested": True},
                {"member": "p_norm", "x_bin": 1, "lhs": 1.0, "fhom": np.nan, "slack": np.nan, "tested": False},
            ]
        )
        table = SlackTable(frame, ["p_norm: x-bin 1"])
        assert table.worst() == {"p_norm": pytest.approx(-0.1)}
        assert not table.passed(1e-2)
        assert table.passed(0.1)

    def test_untested_bins(self):
        """Test that bins off a fixed lattice are listed as untested."""
        provider = FhomProvider(FAST, axes=(np.array([0.0, 1.0]),))
        nu = dirac_measure(2.0, y_bins=2)
        table = check_condition_ii(nu, TestDictionary((p_norm(2.0),)), provider)
        assert table.untested == ["p_norm: x-bin 0"]
        assert table.to_dict()["rows"][0]["slack"] is None


class TestConditionIII:
    """Tests for the p-th moment."""

    def test_values(self):
        """Test |F|^2, the symmetric pair and the single-scale example."""
        assert check_condition_iii(dirac_measure([[1.0, 2.0]], dim=2)) == pytest.approx(5.0)
        assert check_condition_iii(two_atom_laminate(0.0, 1.0), p=4.0) == pytest.approx(1.0)
        assert check_condition_iii(_example(F=0.0)) == pytest.approx(0.5, abs=1e-3)

    def test_homogeneous(self):
        """Test scaling of atoms by s scales the moment by |s|^p."""
        nu = _example(F=0.5)
        scaled = nu.map_cells(lambda i, j, d: DiscreteDistribution(3.0 * d.atoms, d.weights))
        assert check_condition_iii(scaled) == pytest.approx(9.0 * check_condition_iii(nu))

    def test_oversized_atoms(self):
        """Test counting of atoms above the cap."""
        assert oversized_atoms(two_atom_laminate(0.0, 10.0, y_bins=2), 5.0) == 4
        assert oversized_atoms(two_atom_laminate(0.0, 1.0), 5.0) == 0


class TestVerifyCharacterization:
    """Tests for the combined verdict."""

    def test_example_measure_passes(self):
        """Test that the single-scale example passes all checks."""
        report = verify_characterization(_example(F=1.0, x_bins=2), config=FAST)
        assert report.verdicts["condition_i"]
        assert report.verdicts["condition_ii"], report.slacks.frame
        assert report.verdicts["condition_iii"]
        assert report.passed
        record = report.to_dict()
        assert record["passed"] is True
        assert record["condition_iii"]["p_moment"] == pytest.approx(1.5, abs=1e-3)

    def test_periodic_cell_measure_passes(self):
        """Test that the measure of a laminate cell minimizer passes."""
        cell = solve_cell_problem(laminate((1.0, 4.0)), 1.0, 1, 32)
        nu = periodic_cell_measure(1.0, cell.minimizer, 16)
        report = verify_characterization(nu, config=FAST)
        assert report.passed, report.slacks.frame

    def test_two_dimensional_cell_measure_passes(self):
        """Test that a 2-D laminate cell measure passes with default tolerances."""
        report = verify_characterization(_laminate_cell_measure(), config=FAST)
        assert report.decomposition.residual <= FAST.residual_tol
        assert report.passed, report.slacks.frame

    def test_two_dimensional_sequence_passes(self):
        """Test that the empirical 2-D periodic-sequence measure passes."""
        nu = estimate_from_sequence([(0.25, _periodic_sequence_member())], 2, 4)
        report = verify_characterization(nu, config=FAST)
        assert report.verdicts["condition_i"]
        assert report.passed, report.slacks.frame

    def test_vortex_fails(self):
        """Test that the non-gradient 2-D measure fails condition (i)."""
        dictionary = TestDictionary((p_norm(2.0), linear_probe([[1.0, 0.0]])))
        report = verify_characterization(_vortex(), dictionary, FAST)
        assert report.decomposition.residual > 0.1
        assert not report.verdicts["condition_i"]
        assert not report.passed
