"""
Unit tests for integrands, the test dictionary and the integrand catalog.
"""

import pytest
import numpy as np
import os
import sys

# Add src to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.config.schema import DoubleWellSpec, LaminateSpec, LinearProbeSpec, PNormSpec, WeightedSpec
from src.energies.catalog import build_integrand
from src.energies.dictionary import TestDictionary, default_dictionary, probe_matrices
from src.energies.integrand import (
    Growth,
    double_well,
    ep_norm_estimate,
    evaluate,
    evaluate_batch,
    finite_difference_gradient,
    from_callable,
    gradient_xi,
    gradient_xi_batch,
    laminate,
    linear_probe,
    modulated_laminate,
    p_norm,
    weighted,
    xi_norm,
)
from src.exceptions import ConfigError, InvalidArgumentError


def _samples(shape, count=10000, scale=3.0, seed=0):
    rng = np.random.default_rng(seed)
    d, dim = shape
    x = rng.uniform(size=(count, dim))
    y = rng.uniform(size=(count, dim))
    xi = scale * rng.normal(size=(count, d, dim))
    return x, y, xi


NONNEGATIVE_BUILTINS = [
    (p_norm(2.0), (1, 1)),
    (p_norm(3.0), (2, 2)),
    (laminate((1.0, 4.0)), (1, 1)),
    (laminate((1.0, 10.0), p=3.0, axis=1), (1, 2)),
    (double_well(), (1, 1)),
    (double_well(), (2, 2)),
    (weighted(double_well(), (1.0, 4.0)), (1, 2)),
    (modulated_laminate((1.0, 4.0)), (1, 1)),
]


class TestEvaluate:
    """Tests for pointwise evaluation of the built-ins."""

    def test_laminate_phases(self):
        """Test a(y)|xi|^2 on both phases of a two-phase laminate."""
        f = laminate((1.0, 4.0))
        assert evaluate(f, 0.0, 0.25, 2.0) == pytest.approx(4.0)
        assert evaluate(f, 0.0, 0.75, 2.0) == pytest.approx(16.0)

    def test_double_well_bottom(self):
        """Test that the well bottom has zero energy."""
        assert evaluate(double_well(), 0.0, 0.5, 1.0) == 0.0
        assert evaluate(double_well(), 0.0, [0.5, 0.5], [[0.6, 0.8]]) == pytest.approx(0.0, abs=1e-15)

    def test_p_norm_matrix(self):
        """Test the Frobenius norm for matrix arguments."""
        value = evaluate(p_norm(2.0), 0.0, [0.1, 0.2], [[1.0, 2.0], [2.0, 0.0]])
        assert value == pytest.approx(9.0)

    def test_modulated_laminate_depends_on_x(self):
        """Test the (1 + x_1/2) modulation."""
        f = modulated_laminate((1.0, 4.0))
        assert not f.x_independent
        assert evaluate(f, 1.0, 0.25, 1.0) == pytest.approx(1.5)
        assert evaluate(f, 0.0, 0.75, 1.0) == pytest.approx(4.0)

    def test_rejects_y_outside_cell(self):
        """Test that y must already be wrapped into [0, 1)."""
        with pytest.raises(InvalidArgumentError):
            evaluate(p_norm(), 0.0, 1.0, 1.0)
        with pytest.raises(InvalidArgumentError):
            evaluate_batch(p_norm(), np.zeros((1, 1)), np.array([[-0.1]]), np.ones((1, 1, 1)))

    def test_growth_bounds_hold(self):
        """Test alpha|xi|^p - offset <= f <= beta(1 + |xi|^p) on random samples."""
        for f, shape in NONNEGATIVE_BUILTINS:
            x, y, xi = _samples(shape)
            values = evaluate_batch(f, x, y, xi)
            norm = xi_norm(xi)
            assert np.all(values >= 0.0), f.name
            assert np.all(values >= f.growth.lower(norm) - 1e-9), f.name
            assert np.all(values <= f.growth.upper(norm) + 1e-9), f.name

    def test_linear_probe_is_additive(self):
        """Test f(xi + eta) = f(xi) + f(eta) for a linear probe."""
        f = linear_probe([[1.0, -2.0]])
        x, y, xi = _samples((1, 2), count=100, seed=1)
        _, _, eta = _samples((1, 2), count=100, seed=2)
        lhs = evaluate_batch(f, x, y, xi + eta)
        rhs = evaluate_batch(f, x, y, xi) + evaluate_batch(f, x, y, eta)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-14, atol=1e-14)
        assert not f.nonnegative
        assert f.name == "linear_probe[1,-2]"


class TestGradientXi:
    """Tests for xi-gradients."""

    def test_p_norm_scalar(self):
        """Test d/dxi xi^2 at 3."""
        assert gradient_xi(p_norm(2.0), 0.0, 0.5, 3.0)[0, 0] == pytest.approx(6.0)

    def test_double_well_values(self):
        """Test the critical point and the chain-rule value at 1/2."""
        f = double_well()
        assert gradient_xi(f, 0.0, 0.5, 1.0)[0, 0] == pytest.approx(0.0)
        assert gradient_xi(f, 0.0, 0.5, 0.5)[0, 0] == pytest.approx(-1.5)

    def test_p_norm_at_zero(self):
        """Test that the p-norm gradient vanishes at the origin."""
        np.testing.assert_array_equal(gradient_xi(p_norm(3.0), 0.0, [0.5, 0.5], np.zeros((2, 2))), 0.0)

    def test_matches_central_differences(self):
        """Test analytic gradients against central differences at random points."""
        for f, shape in NONNEGATIVE_BUILTINS + [(linear_probe([[0.5, 2.0]]), (1, 2))]:
            x, y, xi = _samples(shape, count=100, scale=1.5, seed=5)
            analytic = gradient_xi_batch(f, x, y, xi)
            numeric = finite_difference_gradient(f, x, y, xi)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-5, err_msg=f.name)

    def test_fallback_uses_finite_differences(self):
        """Test that integrands without a gradient fall back to central differences."""
        f = from_callable(
            "cubic",
            lambda x, y, xi: np.sum(xi**3, axis=(-2, -1)) + np.sum(xi**2, axis=(-2, -1)),
            Growth(alpha=0.0, beta=2.0, p=3.0),
        )
        assert gradient_xi(f, 0.0, 0.5, 2.0)[0, 0] == pytest.approx(16.0, rel=1e-5)


class TestEpNormEstimate:
    """Tests for the sampled E_p norm."""

    def test_p_norm_ratio(self):
        """Test that |xi|^2 gives a ratio just below one."""
        estimate = ep_norm_estimate(p_norm(2.0), radius=10.0)
        assert 0.9 < estimate <= 1.0

    def test_linear_function(self):
        """Test that xi / (1 + xi^2) peaks at 1/2."""
        estimate = ep_norm_estimate(linear_probe([[1.0]], p=2.0), radius=10.0)
        assert estimate == pytest.approx(0.5, abs=1e-3)
        assert estimate <= 0.5 + 1e-12

    def test_constant(self):
        """Test that a constant c gives |c|."""
        f = from_callable("const", lambda x, y, xi: np.full(xi.shape[0], -3.0), Growth(0.0, 3.0, 2.0))
        assert ep_norm_estimate(f, radius=5.0) == pytest.approx(3.0)

    def test_rejects_non_positive_radius(self):
        """Test that R must be positive."""
        with pytest.raises(InvalidArgumentError):
            ep_norm_estimate(p_norm(), radius=0.0)


class TestBuiltinConstruction:
    """Tests for parameter validation of the built-ins."""

    def test_growth_validation(self):
        """Test that invalid growth constants are rejected."""
        with pytest.raises(InvalidArgumentError):
            Growth(alpha=1.0, beta=1.0, p=1.0)
        with pytest.raises(InvalidArgumentError):
            Growth(alpha=-1.0, beta=1.0, p=2.0)

    def test_laminate_rejects_non_positive_phase(self):
        """Test that phase coefficients must be positive."""
        with pytest.raises(InvalidArgumentError):
            laminate((1.0, 0.0))

    def test_weighted_needs_y_independent_inner(self):
        """Test that products a(y) w(xi) need an xi-only w."""
        with pytest.raises(InvalidArgumentError):
            weighted(laminate((1.0, 2.0)), (1.0, 4.0))

    def test_laminate_alignment(self):
        """Test that the phase count is exposed for grid alignment."""
        assert laminate((1.0, 2.0, 4.0, 8.0)).alignment == 4
        assert p_norm().alignment == 1

    def test_scaled(self):
        """Test that scaling multiplies values and growth constants."""
        f = double_well().scaled(2.0)
        assert evaluate(f, 0.0, 0.5, 0.0) == pytest.approx(2.0)
        assert f.growth.beta == pytest.approx(2.0)


class TestDefaultDictionary:
    """Tests for the finite test dictionary."""

    def test_default_members(self):
        """Test the composition of the default dictionary."""
        dictionary = default_dictionary((1, 1), p=2.0, probes=4)
        assert len(dictionary) == 11
        assert dictionary.names[0] == "p_norm"
        assert "laminate[1,4]" in dictionary.names
        assert "double_well" in dictionary.names
        assert sum(name.startswith("linear_probe") for name in dictionary.names) == 4
        assert all(entry.x_independent for entry in dictionary)

    def test_lookup_by_name(self):
        """Test that members can be fetched by name."""
        dictionary = default_dictionary()
        assert dictionary["double_well"].name == "double_well"
        with pytest.raises(KeyError):
            dictionary["missing"]

    def test_rejects_empty_and_x_dependent(self):
        """Test dictionary validation."""
        with pytest.raises(InvalidArgumentError):
            TestDictionary(())
        with pytest.raises(InvalidArgumentError):
            TestDictionary((modulated_laminate((1.0, 4.0)),))
        with pytest.raises(InvalidArgumentError):
            TestDictionary((p_norm(), p_norm()))

    def test_probe_matrices_distinct(self):
        """Test that probe matrices are distinct and correctly shaped."""
        probes = probe_matrices((2, 2), 6)
        assert len(probes) == 6
        assert all(phi.shape == (2, 2) for phi in probes)
        flat = {tuple(phi.ravel()) for phi in probes}
        assert len(flat) == 6


class TestCatalog:
    """Tests for building integrands from config specs."""

    def test_build_each_kind(self):
        """Test that each spec kind builds the matching integrand."""
        assert build_integrand(PNormSpec(p=3.0)).growth.p == 3.0
        assert build_integrand(LaminateSpec(a=[1.0, 4.0])).name == "laminate[1,4]"
        assert build_integrand(DoubleWellSpec()).name == "double_well"
        assert build_integrand(LinearProbeSpec(phi=[[1.0]])).nonnegative is False
        assert build_integrand(WeightedSpec(a=[1.0, 4.0])).alignment == 2

    def test_modulated_laminate(self):
        """Test the modulated variant and its quadratic restriction."""
        assert not build_integrand(LaminateSpec(a=[1.0, 4.0], modulated=True)).x_independent
        with pytest.raises(ConfigError):
            build_integrand(LaminateSpec(a=[1.0, 4.0], p=3.0, modulated=True))
