#!/usr/bin/env python3
"""
Results validation script for CI.
Checks an experiment's results directory against closed-form oracles.
"""

import json
import os
import sys

# Add project root to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np

from src.config.loader import validate_config


def harmonic_mean(a, p=2.0):
    """1-D homogenized coefficient of a(y)|xi|^p with equal phases: (mean a^(-1/(p-1)))^-(p-1)."""
    a = np.asarray(a, dtype=np.float64)
    return float(np.mean(a ** (-1.0 / (p - 1.0))) ** (-(p - 1.0)))


def expected_value(config):
    """Closed-form f_hom(F) when one is known, else None."""
    spec = config.integrand
    F = np.atleast_2d(np.asarray(config.F, dtype=np.float64))
    norm = float(np.sqrt(np.sum(F * F)))
    if spec.kind == "p_norm":
        return norm ** spec.p
    if spec.kind == "laminate" and config.grid.dim == 1 and not spec.modulated:
        return harmonic_mean(spec.a, spec.p) * norm ** spec.p
    if spec.kind == "double_well" and norm <= 1.0:
        return 0.0
    return None


def validate_results(results_dir: str = "results", rel_tol: float = 0.03):
    """Validate one results directory; exits with status 1 on a failed gate."""

    print("=" * 50)
    print("RESULTS VALIDATION")
    print("=" * 50)

    try:
        with open(os.path.join(results_dir, "manifest.json")) as f:
            manifest = json.load(f)
        with open(os.path.join(results_dir, "results.json")) as f:
            results = json.load(f)
        config = validate_config(manifest["config"])
        print("✅ Manifest and results loaded")
    except Exception as e:
        print(f"❌ Failed to load results: {e}")
        sys.exit(1)

    print(f"   Command: {config.command}")
    print(f"   Version: {manifest.get('version', 'N/A')}")

    if results.get("status") != "ok":
        print(f"❌ Run ended with status {results.get('status')}: {results.get('error')}")
        sys.exit(1)
    print("✅ Run finished")

    expected = expected_value(config)
    if config.command in ("cell", "gamma") and expected is not None:
        value = results["value"] if config.command == "cell" else results["fhom"]
        bound = rel_tol * (1.0 + abs(expected))
        if abs(value - expected) > bound:
            print(f"❌ f_hom {value:.6f} differs from the closed form {expected:.6f}")
            sys.exit(1)
        print(f"✅ f_hom {value:.6f} matches the closed form {expected:.6f}")

    if config.command == "gamma":
        gaps = [g for g in results["gaps"] if g is not None]
        if not gaps or gaps[-1] > rel_tol:
            print(f"❌ Final gap {gaps[-1] if gaps else 'N/A'} above {rel_tol}")
            sys.exit(1)
        print(f"✅ Final gap {gaps[-1]:.4f}")

    if config.command in ("check", "examples"):
        passed = results["report"]["passed"] if config.command == "check" else results["passed"]
        if not passed:
            print("❌ Characterization checks failed")
            sys.exit(1)
        print("✅ Characterization checks passed")

    print("=" * 50)
    print("ALL VALIDATIONS PASSED")
    print("=" * 50)
    return True


if __name__ == "__main__":
    results_dir = sys.argv[1] if len(sys.argv) > 1 else "results"
    validate_results(results_dir)
