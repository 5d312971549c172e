"""Condensation of a fixed number of i.i.d. sites: exact ensembles, oracles and ZRP simulation."""

from .errors import DivergenceError, OutOfRangeError, SizeGuardError, TailCertificationError
from .weights import GeometricPolynomial, PowerLaw, Tabulated, parse_family

__version__ = "0.1.0"

__all__ = [
    "DivergenceError",
    "OutOfRangeError",
    "SizeGuardError",
    "TailCertificationError",
    "PowerLaw",
    "GeometricPolynomial",
    "Tabulated",
    "parse_family",
]
