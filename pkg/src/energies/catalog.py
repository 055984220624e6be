"""
Build integrands from configuration specs.
"""

from ..config.schema import (
    DoubleWellSpec,
    LaminateSpec,
    LinearProbeSpec,
    PNormSpec,
    WeightedSpec,
)
from ..exceptions import ConfigError
from .integrand import (
    Integrand,
    double_well,
    laminate,
    linear_probe,
    modulated_laminate,
    p_norm,
    weighted,
)


def build_integrand(spec) -> Integrand:
    """
    Create the integrand described by a spec model.

    Args:
        spec: One of the integrand spec models (selected by ``kind``)

    Returns:
        Integrand
    """
    if isinstance(spec, PNormSpec):
        return p_norm(spec.p)
    if isinstance(spec, LaminateSpec):
        if spec.modulated:
            if spec.p != 2:
                raise ConfigError("modulated laminates are quadratic", path="integrand.p")
            return modulated_laminate(spec.a, spec.axis)
        return laminate(spec.a, spec.p, spec.axis)
    if isinstance(spec, DoubleWellSpec):
        return double_well()
    if isinstance(spec, LinearProbeSpec):
        return linear_probe(spec.phi, spec.p)
    if isinstance(spec, WeightedSpec):
        inner = p_norm(spec.p) if spec.inner == "p_norm" else double_well()
        return weighted(inner, spec.a, spec.axis)
    raise ConfigError(f"unknown integrand spec {type(spec).__name__}", path="integrand.kind")
