"""Finite-scale free fusions, stationary independence relations, generic
automorphisms built by constrained back-and-forth, and four-conjugate
conjugacy certificates."""

from .core import (
    FiniteStructure,
    RelationSymbol,
    Signature,
    TupleType,
    compute_type,
    reduct,
    same_type_over,
)
from .classes import AmalgamationClass, OnePointConstraint, amalgamate, contains, extend_one_point
from .independence import AxiomReport, IndependenceRelation, check_axiom, indep, indep_corner
from .fusion import FusedClass, World, free_fuse, fusion_by_name

__all__ = [
    "AmalgamationClass",
    "AxiomReport",
    "FiniteStructure",
    "FusedClass",
    "IndependenceRelation",
    "OnePointConstraint",
    "RelationSymbol",
    "Signature",
    "TupleType",
    "World",
    "amalgamate",
    "check_axiom",
    "compute_type",
    "contains",
    "extend_one_point",
    "free_fuse",
    "fusion_by_name",
    "indep",
    "indep_corner",
    "reduct",
    "same_type_over",
]
