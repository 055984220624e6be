"""
Catalog of built-in integrands, measure generators and dictionaries.
"""

from typing import Any, Dict

from ..config.schema import (
    DoubleWellSpec,
    GeneratorConfig,
    LaminateSpec,
    LinearProbeSpec,
    PNormSpec,
    WeightedSpec,
)
from ..energies.dictionary import LAMINATE_CONTRASTS

INTEGRANDS = {
    "p_norm": PNormSpec,
    "laminate": LaminateSpec,
    "double_well": DoubleWellSpec,
    "linear_probe": LinearProbeSpec,
    "weighted": WeightedSpec,
}

GENERATORS = {
    "minimizer": "epsilon-problem minimizers over epsilon_list",
    "example_single_scale": "u = F x, u_1 = A sin(2 pi y) / (2 pi)",
    "example_double_scale": "u = F x, u_2 = A sin(2 pi z) / (2 pi), z_resolution quadrature points",
    "periodic_cell": "minimizer of the cell problem of size T, repeated periodically",
}


def list_builtins() -> Dict[str, Any]:
    """Names and parameter schemas, in a fixed order."""
    return {
        "integrands": [
            {"name": name, "schema": spec.model_json_schema()} for name, spec in INTEGRANDS.items()
        ],
        "generators": [
            {"name": name, "description": text, "schema": GeneratorConfig.model_json_schema()}
            for name, text in GENERATORS.items()
        ],
        "dictionaries": [
            {
                "name": "default",
                "members": ["p_norm", "laminate x3", "double_well", "linear_probe x probes", "weighted x2"],
                "laminate_contrasts": [list(c) for c in LAMINATE_CONTRASTS],
            }
        ],
    }
