"""Weighted complex projective 2-designs from orthonormal bases, and their use in tomography."""

from .algebra import AbelianGroup, FiniteField, GaloisRing, GroupElement, FieldElement
from .design import (
    DesignReport,
    WeightedBasisFamily,
    build_design,
    dedupe,
    design_bound,
    dim6_design,
    min_bases_upper_bound,
    moment_operator,
    mub_check,
    mub_family,
    standard_mub_family,
    verify_design,
    welch_sum,
)
from .exceptions import (
    CapacityError,
    DesignError,
    DomainError,
    FormatError,
    NotInformationallyCompleteError,
    StructureError,
)
from .nonlinear import NonlinearFunction, quadruple_count, verify_one_uniform

__version__ = "0.1.0"

__all__ = [
    "AbelianGroup", "FiniteField", "GaloisRing", "GroupElement", "FieldElement",
    "DesignReport", "WeightedBasisFamily", "build_design", "dedupe", "design_bound",
    "dim6_design", "min_bases_upper_bound", "moment_operator", "mub_check", "mub_family",
    "standard_mub_family", "verify_design", "welch_sum",
    "CapacityError", "DesignError", "DomainError", "FormatError",
    "NotInformationallyCompleteError", "StructureError",
    "NonlinearFunction", "quadruple_count", "verify_one_uniform",
]
