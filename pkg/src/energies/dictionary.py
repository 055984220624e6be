"""
Finite test dictionaries standing in for the space E_p.
"""

from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from ..exceptions import InvalidArgumentError
from .integrand import Integrand, double_well, laminate, linear_probe, p_norm, weighted

LAMINATE_CONTRASTS = ((1.0, 4.0), (1.0, 2.0), (1.0, 10.0))


@dataclass(frozen=True)
class TestDictionary:
    """Ordered, named list of y-dependent test integrands."""

    __test__ = False  # not a pytest class

    entries: Tuple[Integrand, ...]

    def __post_init__(self):
        if not self.entries:
            raise InvalidArgumentError("test dictionary must not be empty")
        for entry in self.entries:
            if not entry.x_independent:
                raise InvalidArgumentError(f"dictionary member {entry.name} depends on x")
        names = self.names
        if len(set(names)) != len(names):
            raise InvalidArgumentError("dictionary member names must be unique")

    @property
    def names(self) -> List[str]:
        return [entry.name for entry in self.entries]

    def __iter__(self) -> Iterator[Integrand]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, name: str) -> Integrand:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)


def probe_matrices(shape: Tuple[int, int], count: int = 4) -> List[np.ndarray]:
    """
    Probe matrices for linear test functions.

    Unit matrices first, then signed and summed combinations until ``count``
    distinct matrices exist.
    """
    d, dim = shape
    units = []
    for k in range(d):
        for a in range(dim):
            unit = np.zeros(shape)
            unit[k, a] = 1.0
            units.append(unit)

    candidates = list(units)
    if len(units) > 1:
        candidates.append(units[0] + units[1])
        candidates.append(units[0] - units[1])
    candidates += [-u for u in units]
    candidates += [2.0 * u for u in units]
    candidates += [-0.5 * u for u in units]
    return candidates[:count]


def default_dictionary(
    shape: Tuple[int, int] = (1, 1),
    p: float = 2.0,
    probes: int = 4,
    contrasts: Sequence[Sequence[float]] = LAMINATE_CONTRASTS,
) -> TestDictionary:
    """
    Default desk-scale dictionary.

    Members: |xi|^p, one laminate per contrast, the double well, ``probes``
    linear probes and two products a(y) w(xi).

    Args:
        shape: (d, N) of the gradients being tested
        p: Growth exponent of the measures being tested
        probes: Number of linear probe matrices
        contrasts: Laminate phase coefficients

    Returns:
        TestDictionary
    """
    entries = [p_norm(p)]
    entries += [laminate(a, p) for a in contrasts]
    entries.append(double_well())
    entries += [linear_probe(phi, p) for phi in probe_matrices(shape, probes)]
    entries.append(weighted(double_well(), (1.0, 4.0)))
    entries.append(weighted(p_norm(p), (1.0, 2.0, 4.0, 8.0)))
    return TestDictionary(tuple(entries))
